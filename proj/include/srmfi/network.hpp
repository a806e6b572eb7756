#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace srmfi {

// Global simulation clock: timestamps t_j = j * period_ms for j = 1..num_steps.
struct Clock
{
    double period_ms = 1.0;
    int num_steps = 1;

    void validate() const;
    bool operator==(const Clock &) const = default;
};

// SRM parameters shared by all neurons of a layer.
struct NeuronParams
{
    double tau_s = 1.0;   // membrane time constant (ms)
    double tau_ref = 1.0; // refractory time constant (ms)
    double theta = 1.0;   // firing threshold
    double u_rest = 0.0;

    void validate() const;
    bool operator==(const NeuronParams &) const = default;
};

struct Shape3
{
    int channels = 1;
    int height = 1;
    int width = 1;

    std::size_t size() const
    {
        return static_cast<std::size_t>(channels) * height * width;
    }
    bool valid() const { return channels > 0 && height > 0 && width > 0; }
    std::string str() const;
    bool operator==(const Shape3 &) const = default;
};

// Position of a neuron inside a layer's (channel, y, x) volume.
struct Coord
{
    int c = 0;
    int y = 0;
    int x = 0;

    auto operator<=>(const Coord &) const = default;
};

inline bool contains(const Shape3 &shape, const Coord &pos)
{
    return pos.c >= 0 && pos.c < shape.channels && pos.y >= 0 &&
            pos.y < shape.height && pos.x >= 0 && pos.x < shape.width;
}

inline std::size_t flat_index(const Shape3 &shape, const Coord &pos)
{
    return (static_cast<std::size_t>(pos.c) * shape.height + pos.y) *
            shape.width +
            pos.x;
}

Coord unflatten(const Shape3 &shape, std::size_t index);

enum class LayerKind
{
    dense,
    conv2d,
    sumpool,
};

std::string_view to_string(LayerKind kind);
std::optional<LayerKind> parse_layer_kind(std::string_view name);

struct ConvGeometry
{
    int kernel_h = 1;
    int kernel_w = 1;
    int stride = 1;
    int padding = 0;

    bool operator==(const ConvGeometry &) const = default;
};

struct PoolGeometry
{
    int window_h = 2;
    int window_w = 2;

    bool operator==(const PoolGeometry &) const = default;
};

// Optional [min, max] override for a layer's weight quantizer.
struct WeightRange
{
    double min = -1.0;
    double max = 1.0;

    bool operator==(const WeightRange &) const = default;
};

// One feed-forward layer. Dense weights are laid out (out x in) with the
// input flattened; conv2d weights are (out_ch x in_ch x kh x kw). Sum-pool
// layers hold neither weights nor neuron parameters.
struct LayerSpec
{
    std::string name;
    LayerKind kind = LayerKind::dense;
    Shape3 input_shape;
    Shape3 output_shape;
    std::vector<double> weights;
    ConvGeometry conv;
    PoolGeometry pool;
    std::optional<NeuronParams> params;
    std::optional<WeightRange> quant_range;

    bool has_neurons() const { return kind != LayerKind::sumpool; }
    std::size_t neuron_count() const { return output_shape.size(); }
    std::size_t expected_weight_count() const;

    // Throws ShapeError / ConfigError when the layer is internally inconsistent.
    void validate() const;

    bool operator==(const LayerSpec &) const = default;

    static LayerSpec dense(std::string name, Shape3 input, int outputs,
            NeuronParams params, std::vector<double> weights = {});
    static LayerSpec conv2d(std::string name, Shape3 input, int out_channels,
            ConvGeometry geometry, NeuronParams params,
            std::vector<double> weights = {});
    static LayerSpec sumpool(std::string name, Shape3 input,
            PoolGeometry window);
};

Shape3 conv_output_shape(const Shape3 &input, int out_channels,
        const ConvGeometry &geometry);
Shape3 pool_output_shape(const Shape3 &input, const PoolGeometry &window);

struct Network
{
    std::vector<LayerSpec> layers;
    Clock clock;
    int num_classes = 0;

    std::size_t size() const { return layers.size(); }
    const Shape3 &input_shape() const;

    // Index of the layer called `name`, if any.
    std::optional<int> find_layer(std::string_view name) const;

    // Layer chain, final dense layer and clock checks. Throws on failure.
    void validate() const;

    bool operator==(const Network &) const = default;
};

} // namespace srmfi

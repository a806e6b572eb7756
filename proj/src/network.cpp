#include "srmfi/network.hpp"

#include <cmath>
#include <set>
#include <sstream>

#include "srmfi/error.hpp"
#include "srmfi/time_matrix.hpp"

namespace srmfi {

void Clock::validate() const
{
    if (!std::isfinite(period_ms) || period_ms <= 0.0)
    {
        throw ConfigError("clock period must be finite and positive");
    }
    if (num_steps < 1)
    {
        throw ConfigError("clock must have at least one step");
    }
}

void NeuronParams::validate() const
{
    auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(tau_s))
    {
        throw ConfigError("tau_s must be finite and positive");
    }
    if (!positive(tau_ref))
    {
        throw ConfigError("tau_ref must be finite and positive");
    }
    if (!positive(theta))
    {
        throw ConfigError("theta must be finite and positive");
    }
    if (!std::isfinite(u_rest))
    {
        throw ConfigError("u_rest must be finite");
    }
}

std::string Shape3::str() const
{
    std::ostringstream os;
    os << channels << "x" << height << "x" << width;
    return os.str();
}

Coord unflatten(const Shape3 &shape, std::size_t index)
{
    const std::size_t plane = static_cast<std::size_t>(shape.height) *
            shape.width;
    Coord pos;
    pos.c = static_cast<int>(index / plane);
    const std::size_t rem = index % plane;
    pos.y = static_cast<int>(rem / shape.width);
    pos.x = static_cast<int>(rem % shape.width);
    return pos;
}

std::string_view to_string(LayerKind kind)
{
    switch (kind)
    {
    case LayerKind::dense:
        return "dense";
    case LayerKind::conv2d:
        return "conv2d";
    case LayerKind::sumpool:
        return "sumpool";
    }
    return "unknown";
}

std::optional<LayerKind> parse_layer_kind(std::string_view name)
{
    if (name == "dense")
    {
        return LayerKind::dense;
    }
    if (name == "conv2d")
    {
        return LayerKind::conv2d;
    }
    if (name == "sumpool")
    {
        return LayerKind::sumpool;
    }
    return std::nullopt;
}

Shape3 conv_output_shape(const Shape3 &input, int out_channels,
        const ConvGeometry &geometry)
{
    if (geometry.kernel_h < 1 || geometry.kernel_w < 1 ||
            geometry.stride < 1 || geometry.padding < 0)
    {
        throw ShapeError("invalid convolution geometry");
    }
    const int span_h = input.height + 2 * geometry.padding - geometry.kernel_h;
    const int span_w = input.width + 2 * geometry.padding - geometry.kernel_w;
    if (span_h < 0 || span_w < 0)
    {
        throw ShapeError("convolution kernel larger than padded input " +
                input.str());
    }
    return {out_channels, span_h / geometry.stride + 1,
            span_w / geometry.stride + 1};
}

Shape3 pool_output_shape(const Shape3 &input, const PoolGeometry &window)
{
    if (window.window_h < 1 || window.window_w < 1)
    {
        throw ShapeError("invalid pooling window");
    }
    if (input.height % window.window_h != 0 ||
            input.width % window.window_w != 0)
    {
        throw ShapeError("input " + input.str() +
                " not divisible by pooling window " +
                std::to_string(window.window_h) + "x" +
                std::to_string(window.window_w));
    }
    return {input.channels, input.height / window.window_h,
            input.width / window.window_w};
}

std::size_t LayerSpec::expected_weight_count() const
{
    switch (kind)
    {
    case LayerKind::dense:
        return output_shape.size() * input_shape.size();
    case LayerKind::conv2d:
        return static_cast<std::size_t>(output_shape.channels) *
                input_shape.channels * conv.kernel_h * conv.kernel_w;
    case LayerKind::sumpool:
        return 0;
    }
    return 0;
}

void LayerSpec::validate() const
{
    const std::string where = "layer '" + name + "': ";
    if (!input_shape.valid() || !output_shape.valid())
    {
        throw ShapeError(where + "shapes must be positive");
    }
    switch (kind)
    {
    case LayerKind::dense:
        if (output_shape.height != 1 || output_shape.width != 1)
        {
            throw ShapeError(where + "dense output must be Nx1x1");
        }
        break;
    case LayerKind::conv2d:
        if (conv_output_shape(input_shape, output_shape.channels, conv) !=
                output_shape)
        {
            throw ShapeError(where + "output shape " + output_shape.str() +
                    " does not match convolution of " + input_shape.str());
        }
        break;
    case LayerKind::sumpool:
        if (pool_output_shape(input_shape, pool) != output_shape)
        {
            throw ShapeError(where + "output shape " + output_shape.str() +
                    " does not match pooling of " + input_shape.str());
        }
        if (!weights.empty() || params.has_value())
        {
            throw ConfigError(where +
                    "sum-pool layers carry no weights or neuron parameters");
        }
        return;
    }
    if (!params.has_value())
    {
        throw ConfigError(where + "missing neuron parameters");
    }
    params->validate();
    if (weights.size() != expected_weight_count())
    {
        throw ShapeError(where + "expected " +
                std::to_string(expected_weight_count()) + " weights, got " +
                std::to_string(weights.size()));
    }
    for (const double w : weights)
    {
        if (!std::isfinite(w))
        {
            throw NumericError(where + "non-finite weight");
        }
    }
    if (quant_range && !(quant_range->min < quant_range->max))
    {
        throw ConfigError(where + "quantizer range requires min < max");
    }
}

LayerSpec LayerSpec::dense(std::string name, Shape3 input, int outputs,
        NeuronParams params, std::vector<double> weights)
{
    LayerSpec layer;
    layer.name = std::move(name);
    layer.kind = LayerKind::dense;
    layer.input_shape = input;
    layer.output_shape = {outputs, 1, 1};
    layer.params = params;
    layer.weights = std::move(weights);
    if (layer.weights.empty())
    {
        layer.weights.assign(layer.expected_weight_count(), 0.0);
    }
    return layer;
}

LayerSpec LayerSpec::conv2d(std::string name, Shape3 input, int out_channels,
        ConvGeometry geometry, NeuronParams params, std::vector<double> weights)
{
    LayerSpec layer;
    layer.name = std::move(name);
    layer.kind = LayerKind::conv2d;
    layer.input_shape = input;
    layer.conv = geometry;
    layer.output_shape = conv_output_shape(input, out_channels, geometry);
    layer.params = params;
    layer.weights = std::move(weights);
    if (layer.weights.empty())
    {
        layer.weights.assign(layer.expected_weight_count(), 0.0);
    }
    return layer;
}

LayerSpec LayerSpec::sumpool(std::string name, Shape3 input,
        PoolGeometry window)
{
    LayerSpec layer;
    layer.name = std::move(name);
    layer.kind = LayerKind::sumpool;
    layer.input_shape = input;
    layer.pool = window;
    layer.output_shape = pool_output_shape(input, window);
    return layer;
}

const Shape3 &Network::input_shape() const
{
    if (layers.empty())
    {
        throw ConfigError("network has no layers");
    }
    return layers.front().input_shape;
}

std::optional<int> Network::find_layer(std::string_view name) const
{
    for (std::size_t i = 0; i < layers.size(); ++i)
    {
        if (layers[i].name == name)
        {
            return static_cast<int>(i);
        }
    }
    return std::nullopt;
}

void Network::validate() const
{
    clock.validate();
    if (layers.empty())
    {
        throw ConfigError("network has no layers");
    }
    std::set<std::string> names;
    for (std::size_t i = 0; i < layers.size(); ++i)
    {
        const LayerSpec &layer = layers[i];
        if (layer.name.empty())
        {
            throw ConfigError("layer " + std::to_string(i) + " has no name");
        }
        if (!names.insert(layer.name).second)
        {
            throw ConfigError("duplicate layer name '" + layer.name + "'");
        }
        layer.validate();
        if (i > 0 && layers[i - 1].output_shape.size() !=
                        layer.input_shape.size())
        {
            throw ShapeError("layer '" + layer.name + "' expects input " +
                    layer.input_shape.str() + " but layer '" +
                    layers[i - 1].name + "' produces " +
                    layers[i - 1].output_shape.str());
        }
        if (i > 0 && layer.kind != LayerKind::dense &&
                layers[i - 1].output_shape != layer.input_shape)
        {
            throw ShapeError("layer '" + layer.name + "' expects input " +
                    layer.input_shape.str() + " but layer '" +
                    layers[i - 1].name + "' produces " +
                    layers[i - 1].output_shape.str());
        }
    }
    const LayerSpec &last = layers.back();
    if (last.kind != LayerKind::dense)
    {
        throw ConfigError("final layer must be dense");
    }
    if (num_classes < 1 ||
            last.output_shape.size() != static_cast<std::size_t>(num_classes))
    {
        throw ConfigError("final layer size " +
                std::to_string(last.output_shape.size()) +
                " does not match num_classes " + std::to_string(num_classes));
    }
}

double SpikeRecord::total() const
{
    double sum = 0.0;
    for (const double v : data())
    {
        sum += v;
    }
    return sum;
}

double SpikeRecord::row_sum(std::size_t neuron) const
{
    double sum = 0.0;
    for (const double v : row(neuron))
    {
        sum += v;
    }
    return sum;
}

std::size_t SpikeRecord::count_nonzero() const
{
    std::size_t n = 0;
    for (const double v : data())
    {
        n += (v != 0.0);
    }
    return n;
}

} // namespace srmfi

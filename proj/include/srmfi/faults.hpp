#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"

#include "srmfi/network.hpp"
#include "srmfi/quantizer.hpp"

namespace srmfi {

enum class FaultTarget
{
    neuron_output,
    neuron_param,
    synapse_weight,
};

enum class NeuronParam
{
    tau_s,
    tau_ref,
    theta,
};

std::string_view to_string(NeuronParam param);
std::optional<NeuronParam> parse_neuron_param(std::string_view name);

// Built-in fault functions.
namespace fn {

struct DeadNeuron
{
};
struct SaturatedNeuron
{
};
struct StuckAt
{
    double x = 0.0;
};
struct ParamScale
{
    NeuronParam param = NeuronParam::theta;
    double rho = 1.0;
};
struct DeadSynapse
{
};
struct SaturatedSynapse
{
    double value = 10.0;
};
struct PerturbedSynapse
{
    double rho = 1.0;
};
struct BitflipSynapse
{
    std::vector<int> bits; // sorted, unique, 0 = LSB
    int width = 8;
};

// User-supplied output rewrite, called for every active timestamp (1-based).
struct CustomNeuronOutput
{
    std::function<double(double nominal, int step)> apply;
};

// User-supplied weight rewrite.
struct CustomSynapseWeight
{
    std::function<double(double w)> apply;
};

} // namespace fn

using FaultFunction = std::variant<fn::DeadNeuron, fn::SaturatedNeuron,
        fn::StuckAt, fn::ParamScale, fn::DeadSynapse, fn::SaturatedSynapse,
        fn::PerturbedSynapse, fn::BitflipSynapse, fn::CustomNeuronOutput,
        fn::CustomSynapseWeight>;

// A fault target paired with a fault function. The name and parameter object
// identify the model in files; they are what FaultModelRegistry consumes.
class FaultModel
{
public:
    FaultModel(std::string name, nlohmann::json params, FaultFunction function);

    static FaultModel dead_neuron();
    static FaultModel saturated_neuron();
    static FaultModel stuck_at(double x);
    static FaultModel param_scale(NeuronParam param, double rho);
    static FaultModel dead_synapse();
    static FaultModel saturated_synapse(double value = 10.0);
    static FaultModel perturbed_synapse(double rho);
    static FaultModel bitflip_synapse(std::vector<int> bits, int width = 8);

    const std::string &name() const { return name_; }
    const nlohmann::json &params() const { return params_; }
    const FaultFunction &function() const { return function_; }
    FaultTarget target() const;

    // Neuron output faults ("hard" neuron faults).
    bool is_hard_neuron() const
    {
        return target() == FaultTarget::neuron_output;
    }

    bool operator==(const FaultModel &other) const
    {
        return name_ == other.name_ && params_ == other.params_;
    }

private:
    std::string name_;
    nlohmann::json params_;
    FaultFunction function_;
};

// Builds fault models from (name, parameter object) pairs.
class FaultModelRegistry
{
public:
    using Factory = std::function<FaultModel(const nlohmann::json &params)>;

    // Registry holding the ten built-in models.
    static FaultModelRegistry with_builtins();

    void add(std::string name, Factory factory);
    bool contains(std::string_view name) const;
    std::vector<std::string> names() const;

    // Throws ConfigError for unknown names or invalid parameters.
    FaultModel make(std::string_view name, const nlohmann::json &params) const;

private:
    std::map<std::string, Factory, std::less<>> factories_;
};

struct NeuronSite
{
    int layer = 0;
    Coord pos;

    auto operator<=>(const NeuronSite &) const = default;
};

// Dense layers: `pre` addresses the input neuron and `post` the output
// neuron. Conv2d layers address one kernel weight: post.c is the output
// channel (post.y = post.x = 0) and pre is (input channel, ky, kx).
struct SynapseSite
{
    int layer = 0;
    Coord pre;
    Coord post;

    auto operator<=>(const SynapseSite &) const = default;
};

using FaultSite = std::variant<NeuronSite, SynapseSite>;

int site_layer(const FaultSite &site);
std::string to_string(const FaultSite &site);

// Request for sites drawn during campaign preparation. An empty `layer`
// samples across the whole network.
struct RandomSiteRequest
{
    std::optional<int> layer;
    int count = 1;
    std::optional<std::uint64_t> seed;

    bool operator==(const RandomSiteRequest &) const = default;
};

// Permanent, or active on the 1-based timestamp window [t1, t2].
struct FaultDuration
{
    bool transient = false;
    int t1 = 0;
    int t2 = 0;

    static FaultDuration permanent() { return {}; }
    static FaultDuration window(int t1, int t2) { return {true, t1, t2}; }

    bool operator==(const FaultDuration &) const = default;
};

bool is_active(const FaultDuration &duration, int step);

struct Fault
{
    FaultModel model;
    std::vector<FaultSite> sites;
    std::optional<RandomSiteRequest> random;
    FaultDuration duration;

    bool random_pending() const { return random.has_value(); }

    static Fault at(FaultModel model, FaultSite site,
            FaultDuration duration = FaultDuration::permanent());
    static Fault at(FaultModel model, std::vector<FaultSite> sites,
            FaultDuration duration = FaultDuration::permanent());
    static Fault random_sites(FaultModel model, std::optional<int> layer,
            int count = 1, std::optional<std::uint64_t> seed = std::nullopt,
            FaultDuration duration = FaultDuration::permanent());
};

// Plain-data form of a fault, as stored in configuration and results files.
struct FaultDescriptor
{
    std::string model;
    nlohmann::json params = nlohmann::json::object();
    std::vector<FaultSite> sites;
    std::optional<RandomSiteRequest> random;
    FaultDuration duration;

    bool operator==(const FaultDescriptor &) const = default;
};

FaultDescriptor describe(const Fault &fault);
Fault materialize(
        const FaultDescriptor &descriptor, const FaultModelRegistry &registry);
std::string to_string(const FaultDescriptor &descriptor);

// Neuron output faults. Active timestamps are overwritten; inactive ones keep
// their nominal value exactly.
std::vector<double> faulty_neuron_output(const FaultModel &model,
        std::span<const double> nominal, const FaultDuration &duration);
void apply_neuron_output_fault(const FaultModel &model, std::span<double> row,
        const FaultDuration &duration);

// Parametric neuron faults: scales the selected SRM parameter by rho.
NeuronParams faulty_params(const FaultModel &model, const NeuronParams &params);

// Synapse faults at timestamp `step` (1-based). Bit-flips require a
// quantizer; out-of-range weights are clamped before quantizing.
double faulty_weight(const FaultModel &model, double w,
        const Quantizer *quantizer, int step, const FaultDuration &duration);

// Quantizer for a layer's weights: the configured override, else the
// [min, max] of the trained weights (widened by 1 on each side when all
// weights are equal).
Quantizer layer_quantizer(const LayerSpec &layer, int width);

std::size_t weight_index(const LayerSpec &layer, const SynapseSite &site);

struct SiteCheck
{
    bool valid = true;
    std::string reason;

    explicit operator bool() const { return valid; }
};

// Invalid faults are dropped by campaign preparation; this reports why.
SiteCheck validate_site(const Network &net, const Fault &fault);

// Number of candidate sites for `target` in one layer or the whole network.
std::size_t count_sites(const Network &net, FaultTarget target,
        std::optional<int> layer = std::nullopt);

// The index-th candidate site in layer-major, flat-index order.
FaultSite site_at(const Network &net, FaultTarget target,
        std::optional<int> layer, std::size_t index);

// Uniform sampling of `count` distinct candidate sites. Deterministic in
// `seed`. Throws ConfigError if count exceeds the candidates.
std::vector<FaultSite> assign_random_sites(const Network &net,
        FaultTarget target, std::optional<int> layer, int count,
        std::uint64_t seed);

} // namespace srmfi

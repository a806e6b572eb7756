#include "srmfi/faults.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <sstream>

#include "srmfi/error.hpp"

namespace srmfi {

using nlohmann::json;

namespace {

template <class... Ts> struct overloaded : Ts...
{
    using Ts::operator()...;
};

void require_finite(double v, std::string_view what)
{
    if (!std::isfinite(v))
    {
        throw ConfigError(std::string(what) + " must be finite");
    }
}

void check_keys(const json &params, std::initializer_list<std::string_view> allowed,
        std::string_view model)
{
    if (params.is_null())
    {
        return;
    }
    if (!params.is_object())
    {
        throw ConfigError(
                "parameters of '" + std::string(model) + "' must be an object");
    }
    for (const auto &item : params.items())
    {
        if (std::find(allowed.begin(), allowed.end(), item.key()) ==
                allowed.end())
        {
            throw ConfigError("unknown parameter '" + item.key() +
                    "' for fault model '" + std::string(model) + "'");
        }
    }
}

double number_param(const json &params, std::string_view key,
        std::string_view model, std::optional<double> fallback = std::nullopt)
{
    if (params.is_object())
    {
        const auto it = params.find(key);
        if (it != params.end())
        {
            if (!it->is_number())
            {
                throw ConfigError("parameter '" + std::string(key) + "' of '" +
                        std::string(model) + "' must be a number");
            }
            return it->get<double>();
        }
    }
    if (fallback)
    {
        return *fallback;
    }
    throw ConfigError("fault model '" + std::string(model) +
            "' requires parameter '" + std::string(key) + "'");
}

std::size_t layer_index_checked(const Network &net, int layer)
{
    if (layer < 0 || static_cast<std::size_t>(layer) >= net.size())
    {
        throw ConfigError("no such layer " + std::to_string(layer));
    }
    return static_cast<std::size_t>(layer);
}

std::size_t layer_site_count(const LayerSpec &layer, FaultTarget target)
{
    // Every layer with neurons also has synapses; pooling layers have neither.
    if (!layer.has_neurons())
    {
        return 0;
    }
    return target == FaultTarget::synapse_weight ? layer.weights.size()
                                                 : layer.neuron_count();
}

FaultSite layer_site_at(
        const LayerSpec &layer, int layer_index, FaultTarget target,
        std::size_t index)
{
    if (target != FaultTarget::synapse_weight)
    {
        return NeuronSite{layer_index, unflatten(layer.output_shape, index)};
    }
    if (layer.kind == LayerKind::dense)
    {
        const std::size_t n_in = layer.input_shape.size();
        return SynapseSite{layer_index, unflatten(layer.input_shape, index % n_in),
                unflatten(layer.output_shape, index / n_in)};
    }
    const ConvGeometry &g = layer.conv;
    const std::size_t kx = index % g.kernel_w;
    std::size_t rest = index / g.kernel_w;
    const std::size_t ky = rest % g.kernel_h;
    rest /= g.kernel_h;
    const std::size_t ic = rest % layer.input_shape.channels;
    const std::size_t oc = rest / layer.input_shape.channels;
    return SynapseSite{layer_index,
            {static_cast<int>(ic), static_cast<int>(ky), static_cast<int>(kx)},
            {static_cast<int>(oc), 0, 0}};
}

} // namespace

std::string_view to_string(NeuronParam param)
{
    switch (param)
    {
    case NeuronParam::tau_s:
        return "tau_s";
    case NeuronParam::tau_ref:
        return "tau_ref";
    case NeuronParam::theta:
        return "theta";
    }
    return "unknown";
}

std::optional<NeuronParam> parse_neuron_param(std::string_view name)
{
    if (name == "tau_s")
    {
        return NeuronParam::tau_s;
    }
    if (name == "tau_ref")
    {
        return NeuronParam::tau_ref;
    }
    if (name == "theta")
    {
        return NeuronParam::theta;
    }
    return std::nullopt;
}

FaultModel::FaultModel(std::string name, json params, FaultFunction function)
    : name_(std::move(name)), params_(std::move(params)),
      function_(std::move(function))
{
    if (params_.is_null())
    {
        params_ = json::object();
    }
}

FaultModel FaultModel::dead_neuron()
{
    return {"dead_neuron", json::object(), fn::DeadNeuron{}};
}

FaultModel FaultModel::saturated_neuron()
{
    return {"saturated_neuron", json::object(), fn::SaturatedNeuron{}};
}

FaultModel FaultModel::stuck_at(double x)
{
    require_finite(x, "stuck-at value");
    return {"stuck_at", json{{"x", x}}, fn::StuckAt{x}};
}

FaultModel FaultModel::param_scale(NeuronParam param, double rho)
{
    require_finite(rho, "rho");
    if (rho <= 0.0)
    {
        throw ConfigError("parametric neuron fault requires rho > 0");
    }
    return {"param_scale",
            json{{"param", std::string(to_string(param))}, {"rho", rho}},
            fn::ParamScale{param, rho}};
}

FaultModel FaultModel::dead_synapse()
{
    return {"dead_synapse", json::object(), fn::DeadSynapse{}};
}

FaultModel FaultModel::saturated_synapse(double value)
{
    require_finite(value, "saturation value");
    return {"saturated_synapse", json{{"value", value}},
            fn::SaturatedSynapse{value}};
}

FaultModel FaultModel::perturbed_synapse(double rho)
{
    require_finite(rho, "rho");
    return {"perturbed_synapse", json{{"rho", rho}}, fn::PerturbedSynapse{rho}};
}

FaultModel FaultModel::bitflip_synapse(std::vector<int> bits, int width)
{
    if (width < 1 || width > 32)
    {
        throw ConfigError("bit-flip width must be in [1, 32]");
    }
    if (bits.empty())
    {
        throw ConfigError("bit-flip fault needs at least one bit position");
    }
    std::sort(bits.begin(), bits.end());
    bits.erase(std::unique(bits.begin(), bits.end()), bits.end());
    for (const int b : bits)
    {
        if (b < 0 || b >= width)
        {
            throw ConfigError("bit position " + std::to_string(b) +
                    " outside " + std::to_string(width) + "-bit word");
        }
    }
    return {"bitflip_synapse", json{{"bits", bits}, {"width", width}},
            fn::BitflipSynapse{bits, width}};
}

FaultTarget FaultModel::target() const
{
    return std::visit(
            overloaded{
                    [](const fn::DeadNeuron &) {
                        return FaultTarget::neuron_output;
                    },
                    [](const fn::SaturatedNeuron &) {
                        return FaultTarget::neuron_output;
                    },
                    [](const fn::StuckAt &) {
                        return FaultTarget::neuron_output;
                    },
                    [](const fn::CustomNeuronOutput &) {
                        return FaultTarget::neuron_output;
                    },
                    [](const fn::ParamScale &) {
                        return FaultTarget::neuron_param;
                    },
                    [](const auto &) { return FaultTarget::synapse_weight; },
            },
            function_);
}

FaultModelRegistry FaultModelRegistry::with_builtins()
{
    FaultModelRegistry registry;
    registry.add("dead_neuron", [](const json &p) {
        check_keys(p, {}, "dead_neuron");
        return FaultModel::dead_neuron();
    });
    registry.add("saturated_neuron", [](const json &p) {
        check_keys(p, {}, "saturated_neuron");
        return FaultModel::saturated_neuron();
    });
    registry.add("stuck_at", [](const json &p) {
        check_keys(p, {"x"}, "stuck_at");
        return FaultModel::stuck_at(number_param(p, "x", "stuck_at"));
    });
    registry.add("param_scale", [](const json &p) {
        check_keys(p, {"param", "rho"}, "param_scale");
        const auto it = p.is_object() ? p.find("param") : p.end();
        if (it == p.end() || !it->is_string())
        {
            throw ConfigError("fault model 'param_scale' requires a string "
                              "parameter 'param'");
        }
        const auto param = parse_neuron_param(it->get<std::string>());
        if (!param)
        {
            throw ConfigError("unknown neuron parameter '" +
                    it->get<std::string>() + "'");
        }
        return FaultModel::param_scale(
                *param, number_param(p, "rho", "param_scale"));
    });
    registry.add("dead_synapse", [](const json &p) {
        check_keys(p, {}, "dead_synapse");
        return FaultModel::dead_synapse();
    });
    registry.add("saturated_synapse", [](const json &p) {
        check_keys(p, {"value"}, "saturated_synapse");
        return FaultModel::saturated_synapse(
                number_param(p, "value", "saturated_synapse", 10.0));
    });
    registry.add("perturbed_synapse", [](const json &p) {
        check_keys(p, {"rho"}, "perturbed_synapse");
        return FaultModel::perturbed_synapse(
                number_param(p, "rho", "perturbed_synapse"));
    });
    registry.add("bitflip_synapse", [](const json &p) {
        check_keys(p, {"bits", "width"}, "bitflip_synapse");
        const double width_value =
                number_param(p, "width", "bitflip_synapse", 8.0);
        if (width_value != std::floor(width_value) || width_value < 1 ||
                width_value > 32)
        {
            throw ConfigError("bit-flip width must be an integer in [1, 32]");
        }
        std::vector<int> bits;
        const auto it = p.is_object() ? p.find("bits") : p.end();
        if (it == p.end())
        {
            throw ConfigError(
                    "fault model 'bitflip_synapse' requires parameter 'bits'");
        }
        auto to_bit = [](const json &v) {
            if (!v.is_number_integer())
            {
                throw ConfigError("bit positions must be integers");
            }
            const auto b = v.get<std::int64_t>();
            if (b < 0 || b > 63)
            {
                throw ConfigError("bit position out of range");
            }
            return static_cast<int>(b);
        };
        if (it->is_array())
        {
            for (const auto &v : *it)
            {
                bits.push_back(to_bit(v));
            }
        }
        else
        {
            bits.push_back(to_bit(*it));
        }
        return FaultModel::bitflip_synapse(
                std::move(bits), static_cast<int>(width_value));
    });
    return registry;
}

void FaultModelRegistry::add(std::string name, Factory factory)
{
    factories_[std::move(name)] = std::move(factory);
}

bool FaultModelRegistry::contains(std::string_view name) const
{
    return factories_.find(name) != factories_.end();
}

std::vector<std::string> FaultModelRegistry::names() const
{
    std::vector<std::string> out;
    for (const auto &[name, factory] : factories_)
    {
        out.push_back(name);
    }
    return out;
}

FaultModel FaultModelRegistry::make(
        std::string_view name, const json &params) const
{
    const auto it = factories_.find(name);
    if (it == factories_.end())
    {
        throw ConfigError("unknown fault model '" + std::string(name) + "'");
    }
    return it->second(params);
}

int site_layer(const FaultSite &site)
{
    return std::visit([](const auto &s) { return s.layer; }, site);
}

std::string to_string(const FaultSite &site)
{
    std::ostringstream os;
    std::visit(overloaded{
                       [&](const NeuronSite &s) {
                           os << "neuron(l=" << s.layer << ", c=" << s.pos.c
                              << ", y=" << s.pos.y << ", x=" << s.pos.x << ")";
                       },
                       [&](const SynapseSite &s) {
                           os << "synapse(l=" << s.layer << ", pre=" << s.pre.c
                              << "/" << s.pre.y << "/" << s.pre.x
                              << ", post=" << s.post.c << "/" << s.post.y
                              << "/" << s.post.x << ")";
                       },
               },
            site);
    return os.str();
}

bool is_active(const FaultDuration &duration, int step)
{
    return !duration.transient || (duration.t1 <= step && step <= duration.t2);
}

Fault Fault::at(FaultModel model, FaultSite site, FaultDuration duration)
{
    return Fault{std::move(model), {site}, std::nullopt, duration};
}

Fault Fault::at(
        FaultModel model, std::vector<FaultSite> sites, FaultDuration duration)
{
    return Fault{std::move(model), std::move(sites), std::nullopt, duration};
}

Fault Fault::random_sites(FaultModel model, std::optional<int> layer,
        int count, std::optional<std::uint64_t> seed, FaultDuration duration)
{
    return Fault{std::move(model), {}, RandomSiteRequest{layer, count, seed},
            duration};
}

FaultDescriptor describe(const Fault &fault)
{
    return FaultDescriptor{fault.model.name(), fault.model.params(),
            fault.sites, fault.random, fault.duration};
}

Fault materialize(
        const FaultDescriptor &descriptor, const FaultModelRegistry &registry)
{
    return Fault{registry.make(descriptor.model, descriptor.params),
            descriptor.sites, descriptor.random, descriptor.duration};
}

std::string to_string(const FaultDescriptor &descriptor)
{
    std::ostringstream os;
    os << descriptor.model;
    if (!descriptor.params.empty())
    {
        os << descriptor.params.dump();
    }
    os << " @";
    for (const auto &site : descriptor.sites)
    {
        os << " " << to_string(site);
    }
    if (descriptor.random)
    {
        os << " random(" << descriptor.random->count << " in ";
        if (descriptor.random->layer)
        {
            os << "layer " << *descriptor.random->layer;
        }
        else
        {
            os << "network";
        }
        os << ")";
    }
    if (descriptor.duration.transient)
    {
        os << " [" << descriptor.duration.t1 << ", " << descriptor.duration.t2
           << "]";
    }
    return os.str();
}

void apply_neuron_output_fault(const FaultModel &model, std::span<double> row,
        const FaultDuration &duration)
{
    if (model.target() != FaultTarget::neuron_output)
    {
        throw ConfigError("fault model '" + model.name() +
                "' does not target neuron outputs");
    }
    for (std::size_t j = 0; j < row.size(); ++j)
    {
        const int step = static_cast<int>(j) + 1;
        if (!is_active(duration, step))
        {
            continue;
        }
        std::visit(overloaded{
                           [&](const fn::DeadNeuron &) { row[j] = 0.0; },
                           [&](const fn::SaturatedNeuron &) { row[j] = 1.0; },
                           [&](const fn::StuckAt &f) { row[j] = f.x; },
                           [&](const fn::CustomNeuronOutput &f) {
                               row[j] = f.apply(row[j], step);
                           },
                           [](const auto &) {},
                   },
                model.function());
    }
}

std::vector<double> faulty_neuron_output(const FaultModel &model,
        std::span<const double> nominal, const FaultDuration &duration)
{
    std::vector<double> row(nominal.begin(), nominal.end());
    apply_neuron_output_fault(model, row, duration);
    return row;
}

NeuronParams faulty_params(const FaultModel &model, const NeuronParams &params)
{
    const auto *scale = std::get_if<fn::ParamScale>(&model.function());
    if (scale == nullptr)
    {
        throw ConfigError("fault model '" + model.name() +
                "' does not target neuron parameters");
    }
    if (!std::isfinite(scale->rho) || scale->rho <= 0.0)
    {
        throw ConfigError("parametric neuron fault requires rho > 0");
    }
    NeuronParams out = params;
    switch (scale->param)
    {
    case NeuronParam::tau_s:
        out.tau_s *= scale->rho;
        break;
    case NeuronParam::tau_ref:
        out.tau_ref *= scale->rho;
        break;
    case NeuronParam::theta:
        out.theta *= scale->rho;
        break;
    }
    out.validate();
    return out;
}

double faulty_weight(const FaultModel &model, double w,
        const Quantizer *quantizer, int step, const FaultDuration &duration)
{
    if (model.target() != FaultTarget::synapse_weight)
    {
        throw ConfigError("fault model '" + model.name() +
                "' does not target synapse weights");
    }
    if (!is_active(duration, step))
    {
        return w;
    }
    return std::visit(
            overloaded{
                    [](const fn::DeadSynapse &) { return 0.0; },
                    [](const fn::SaturatedSynapse &f) { return f.value; },
                    [&](const fn::PerturbedSynapse &f) { return f.rho * w; },
                    [&](const fn::BitflipSynapse &f) {
                        if (quantizer == nullptr)
                        {
                            throw ConfigError(
                                    "bit-flip fault requires a quantizer");
                        }
                        std::uint64_t mask = 0;
                        for (const int b : f.bits)
                        {
                            mask |= std::uint64_t{1} << b;
                        }
                        if (mask > quantizer->max_code())
                        {
                            throw ConfigError("bit-flip positions exceed the "
                                              "quantizer width");
                        }
                        return quantizer->dequantize(
                                quantizer->quantize(w) ^ mask);
                    },
                    [&](const fn::CustomSynapseWeight &f) {
                        return f.apply(w);
                    },
                    [&](const auto &) { return w; },
            },
            model.function());
}

Quantizer layer_quantizer(const LayerSpec &layer, int width)
{
    if (layer.quant_range)
    {
        return Quantizer(width, layer.quant_range->min, layer.quant_range->max);
    }
    if (layer.weights.empty())
    {
        throw ConfigError("layer '" + layer.name + "' has no weights");
    }
    const auto [lo, hi] =
            std::minmax_element(layer.weights.begin(), layer.weights.end());
    if (*lo == *hi)
    {
        return Quantizer(width, *lo - 1.0, *hi + 1.0);
    }
    return Quantizer(width, *lo, *hi);
}

std::size_t weight_index(const LayerSpec &layer, const SynapseSite &site)
{
    if (layer.kind == LayerKind::dense)
    {
        return flat_index(layer.output_shape, site.post) *
                layer.input_shape.size() +
                flat_index(layer.input_shape, site.pre);
    }
    if (layer.kind == LayerKind::conv2d)
    {
        return ((static_cast<std::size_t>(site.post.c) *
                                layer.input_shape.channels +
                        site.pre.c) *
                               layer.conv.kernel_h +
                       site.pre.y) *
                layer.conv.kernel_w +
                site.pre.x;
    }
    throw ConfigError("layer '" + layer.name + "' has no synapses");
}

SiteCheck validate_site(const Network &net, const Fault &fault)
{
    auto drop = [](std::string reason) { return SiteCheck{false, std::move(reason)}; };
    const FaultTarget target = fault.model.target();
    const int steps = net.clock.num_steps;

    if (fault.duration.transient &&
            !(1 <= fault.duration.t1 && fault.duration.t1 <= fault.duration.t2 &&
                    fault.duration.t2 <= steps))
    {
        return drop("transient window [" + std::to_string(fault.duration.t1) +
                ", " + std::to_string(fault.duration.t2) + "] outside [1, " +
                std::to_string(steps) + "]");
    }
    if (fault.sites.empty() && !fault.random)
    {
        return drop("fault has no sites");
    }

    auto check_layer = [&](int layer) -> std::optional<SiteCheck> {
        if (layer < 0 || static_cast<std::size_t>(layer) >= net.size())
        {
            return drop("no such layer");
        }
        if (!net.layers[layer].has_neurons())
        {
            return drop(target == FaultTarget::synapse_weight
                            ? "no synapses in pooling layer"
                            : "no neurons in pooling layer");
        }
        return std::nullopt;
    };

    for (const FaultSite &site : fault.sites)
    {
        if (auto bad = check_layer(site_layer(site)))
        {
            return *bad;
        }
        const LayerSpec &layer = net.layers[site_layer(site)];
        if (const auto *n = std::get_if<NeuronSite>(&site))
        {
            if (target == FaultTarget::synapse_weight)
            {
                return drop("synapse fault given a neuron site");
            }
            if (!contains(layer.output_shape, n->pos))
            {
                return drop("neuron coordinates outside layer '" + layer.name +
                        "' (" + layer.output_shape.str() + ")");
            }
            continue;
        }
        const auto &s = std::get<SynapseSite>(site);
        if (target != FaultTarget::synapse_weight)
        {
            return drop("neuron fault given a synapse site");
        }
        bool inside = false;
        if (layer.kind == LayerKind::dense)
        {
            inside = contains(layer.input_shape, s.pre) &&
                    contains(layer.output_shape, s.post);
        }
        else
        {
            inside = s.post.c >= 0 && s.post.c < layer.output_shape.channels &&
                    s.post.y == 0 && s.post.x == 0 &&
                    contains({layer.input_shape.channels, layer.conv.kernel_h,
                                     layer.conv.kernel_w},
                            s.pre);
        }
        if (!inside)
        {
            return drop("synapse coordinates outside layer '" + layer.name + "'");
        }
    }

    if (fault.random)
    {
        if (fault.random->layer)
        {
            if (auto bad = check_layer(*fault.random->layer))
            {
                return *bad;
            }
        }
        if (fault.random->count < 1)
        {
            return drop("random site count must be positive");
        }
        const std::size_t candidates =
                count_sites(net, target, fault.random->layer);
        if (static_cast<std::size_t>(fault.random->count) > candidates)
        {
            return drop("requested " + std::to_string(fault.random->count) +
                    " random sites but only " + std::to_string(candidates) +
                    " exist");
        }
    }
    return {};
}

std::size_t count_sites(
        const Network &net, FaultTarget target, std::optional<int> layer)
{
    if (layer)
    {
        return layer_site_count(net.layers[layer_index_checked(net, *layer)],
                target);
    }
    std::size_t total = 0;
    for (const LayerSpec &l : net.layers)
    {
        total += layer_site_count(l, target);
    }
    return total;
}

FaultSite site_at(const Network &net, FaultTarget target,
        std::optional<int> layer, std::size_t index)
{
    if (layer)
    {
        const std::size_t l = layer_index_checked(net, *layer);
        if (index >= layer_site_count(net.layers[l], target))
        {
            throw ConfigError("site index out of range");
        }
        return layer_site_at(net.layers[l], *layer, target, index);
    }
    for (std::size_t l = 0; l < net.size(); ++l)
    {
        const std::size_t n = layer_site_count(net.layers[l], target);
        if (index < n)
        {
            return layer_site_at(
                    net.layers[l], static_cast<int>(l), target, index);
        }
        index -= n;
    }
    throw ConfigError("site index out of range");
}

std::vector<FaultSite> assign_random_sites(const Network &net,
        FaultTarget target, std::optional<int> layer, int count,
        std::uint64_t seed)
{
    const std::size_t candidates = count_sites(net, target, layer);
    if (count < 0 || static_cast<std::size_t>(count) > candidates)
    {
        throw ConfigError("cannot draw " + std::to_string(count) +
                " distinct sites from " + std::to_string(candidates) +
                " candidates");
    }
    // Floyd's sampling without replacement.
    std::mt19937_64 rng(seed);
    std::set<std::size_t> chosen;
    std::vector<std::size_t> order;
    for (std::size_t j = candidates - count; j < candidates; ++j)
    {
        std::uniform_int_distribution<std::size_t> pick(0, j);
        std::size_t t = pick(rng);
        if (!chosen.insert(t).second)
        {
            t = j;
            chosen.insert(t);
        }
        order.push_back(t);
    }
    std::vector<FaultSite> sites;
    sites.reserve(order.size());
    for (const std::size_t index : order)
    {
        sites.push_back(site_at(net, target, layer, index));
    }
    return sites;
}

} // namespace srmfi

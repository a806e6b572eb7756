#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "srmfi/campaign.hpp"
#include "srmfi/faults.hpp"
#include "srmfi/network.hpp"

namespace fixtures {

using Rng = std::mt19937_64;

inline double uniform(Rng &rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline int uniform_int(Rng &rng, int lo, int hi)
{
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

inline srmfi::NeuronParams random_params(Rng &rng)
{
    return {uniform(rng, 1.5, 8.0), uniform(rng, 1.5, 8.0), uniform(rng, 0.5, 3.0),
            0.0};
}

inline srmfi::SpikeRecord random_spikes(
        Rng &rng, std::size_t rows, std::size_t steps, double rate)
{
    srmfi::SpikeRecord r(rows, steps);
    std::bernoulli_distribution fire(rate);
    for (double &v : r.data())
    {
        v = fire(rng) ? 1.0 : 0.0;
    }
    return r;
}

// Weights drawn on a float32-exact grid so that network files round-trip.
inline std::vector<double> random_weights(Rng &rng, std::size_t n, double lo, double hi)
{
    std::vector<double> w(n);
    for (double &v : w)
    {
        v = static_cast<float>(uniform(rng, lo, hi));
    }
    return w;
}

// Up to three dense or conv layers with at most 64 neurons each.
inline srmfi::Network random_small_net(Rng &rng, int steps)
{
    using namespace srmfi;
    Network net;
    net.clock = {uniform(rng, 0.5, 1.5), steps};
    const int layers = uniform_int(rng, 1, 3);
    Shape3 shape = {uniform_int(rng, 1, 2), uniform_int(rng, 3, 6), uniform_int(rng, 3, 6)};
    for (int l = 0; l < layers; ++l)
    {
        const bool last = l == layers - 1;
        const double fan_in = static_cast<double>(shape.size());
        if (!last && uniform_int(rng, 0, 1) == 1 && shape.height >= 3)
        {
            ConvGeometry g{uniform_int(rng, 1, 3), uniform_int(rng, 1, 3),
                    uniform_int(rng, 1, 2), uniform_int(rng, 0, 1)};
            const int oc = uniform_int(rng, 1, 3);
            Shape3 out = conv_output_shape(shape, oc, g);
            while (out.size() > 64)
            {
                g.stride += 1;
                out = conv_output_shape(shape, oc, g);
            }
            const double k = static_cast<double>(shape.channels * g.kernel_h * g.kernel_w);
            LayerSpec layer = LayerSpec::conv2d("conv" + std::to_string(l), shape, oc, g,
                    random_params(rng), {});
            layer.weights = random_weights(
                    rng, layer.expected_weight_count(), -0.5, 4.0 / std::sqrt(k));
            net.layers.push_back(std::move(layer));
            shape = out;
        }
        else
        {
            const int outputs = last ? uniform_int(rng, 2, 10) : uniform_int(rng, 4, 64);
            LayerSpec layer = LayerSpec::dense(
                    "fc" + std::to_string(l), shape, outputs, random_params(rng));
            layer.weights = random_weights(
                    rng, layer.expected_weight_count(), -0.5, 4.0 / std::sqrt(fan_in));
            net.layers.push_back(std::move(layer));
            shape = {outputs, 1, 1};
        }
    }
    net.num_classes = net.layers.back().output_shape.channels;
    net.validate();
    return net;
}

// conv -> sumpool -> conv -> dense -> dense, as in a small classifier.
inline srmfi::Network random_classifier(Rng &rng, int steps, int classes = 4)
{
    using namespace srmfi;
    Network net;
    net.clock = {1.0, steps};
    net.num_classes = classes;
    const Shape3 in{2, 8, 8};
    LayerSpec c1 = LayerSpec::conv2d("SC1", in, 3, {3, 3, 1, 1}, random_params(rng), {});
    c1.weights = random_weights(rng, c1.expected_weight_count(), -0.3, 1.2);
    LayerSpec p1 = LayerSpec::sumpool("SP1", c1.output_shape, {2, 2});
    LayerSpec c2 = LayerSpec::conv2d(
            "SC2", p1.output_shape, 4, {3, 3, 1, 0}, random_params(rng), {});
    c2.weights = random_weights(rng, c2.expected_weight_count(), -0.2, 0.6);
    LayerSpec f1 = LayerSpec::dense("SF1", c2.output_shape, 12, random_params(rng));
    f1.weights = random_weights(rng, f1.expected_weight_count(), -0.3, 1.0);
    LayerSpec f2 = LayerSpec::dense("SF2", f1.output_shape, classes, random_params(rng));
    f2.weights = random_weights(rng, f2.expected_weight_count(), -0.3, 1.2);
    net.layers = {c1, p1, c2, f1, f2};
    net.validate();
    return net;
}

inline std::vector<srmfi::Sample> random_samples(
        Rng &rng, const srmfi::Network &net, int count, double rate = 0.15)
{
    std::vector<srmfi::Sample> out;
    for (int i = 0; i < count; ++i)
    {
        out.push_back({random_spikes(rng, net.input_shape().size(),
                               static_cast<std::size_t>(net.clock.num_steps), rate),
                uniform_int(rng, 0, net.num_classes - 1)});
    }
    return out;
}

// Dense chain of `layers` layers (2 neurons wide at the output).
inline srmfi::Network dense_chain(int layers, int width, int steps)
{
    using namespace srmfi;
    Network net;
    net.clock = {1.0, steps};
    net.num_classes = 2;
    Shape3 shape{width, 1, 1};
    const NeuronParams params{4.0, 4.0, 1.0, 0.0};
    for (int l = 0; l < layers; ++l)
    {
        const int outputs = l == layers - 1 ? 2 : width;
        LayerSpec layer =
                LayerSpec::dense("L" + std::to_string(l + 1), shape, outputs, params);
        for (std::size_t i = 0; i < layer.weights.size(); ++i)
        {
            layer.weights[i] = 0.3 + 0.1 * static_cast<double>(i % 7);
        }
        net.layers.push_back(std::move(layer));
        shape = {outputs, 1, 1};
    }
    net.validate();
    return net;
}

// Ten-class task whose sample k drives input line k plus an always-on bias
// line. Every output fires on the bias alone, but output k fires most on
// sample k.
struct TenClassTask
{
    srmfi::Network net;
    std::vector<srmfi::Sample> samples;
};

inline TenClassTask ten_class_task(int per_class = 3, int steps = 60)
{
    using namespace srmfi;
    constexpr int kClasses = 10;
    TenClassTask task;
    task.net.clock = {1.0, steps};
    task.net.num_classes = kClasses;
    const Shape3 in{kClasses + 1, 1, 1};
    LayerSpec out = LayerSpec::dense("out", in, kClasses, {3.0, 3.0, 1.0, 0.0});
    for (int o = 0; o < kClasses; ++o)
    {
        for (int i = 0; i <= kClasses; ++i)
        {
            double w = 0.0;
            if (i == o)
            {
                w = 1.5;
            }
            else if (i == kClasses)
            {
                w = 0.5;
            }
            out.weights[static_cast<std::size_t>(o) * (kClasses + 1) + i] = w;
        }
    }
    task.net.layers = {out};
    task.net.validate();
    for (int k = 0; k < kClasses; ++k)
    {
        for (int s = 0; s < per_class; ++s)
        {
            SpikeRecord input(in.size(), static_cast<std::size_t>(steps));
            for (int j = s; j < steps; j += 2)
            {
                input.at(static_cast<std::size_t>(k), static_cast<std::size_t>(j)) = 1.0;
            }
            for (int j = 0; j < steps; j += 3)
            {
                input.at(kClasses, static_cast<std::size_t>(j)) = 1.0;
            }
            task.samples.push_back({std::move(input), k});
        }
    }
    return task;
}

// A random mix of built-in fault models, with explicit or random sites and
// occasional transient windows.
inline srmfi::Fault random_fault(Rng &rng, const srmfi::Network &net)
{
    using namespace srmfi;
    std::vector<int> neuron_layers;
    for (std::size_t l = 0; l < net.size(); ++l)
    {
        if (net.layers[l].has_neurons())
        {
            neuron_layers.push_back(static_cast<int>(l));
        }
    }
    const int layer = neuron_layers[static_cast<std::size_t>(
            uniform_int(rng, 0, static_cast<int>(neuron_layers.size()) - 1))];
    const NeuronParam params[] = {NeuronParam::tau_s, NeuronParam::tau_ref, NeuronParam::theta};
    FaultModel model = FaultModel::dead_neuron();
    switch (uniform_int(rng, 0, 7))
    {
    case 0: model = FaultModel::dead_neuron(); break;
    case 1: model = FaultModel::saturated_neuron(); break;
    case 2: model = FaultModel::stuck_at(uniform(rng, 0.0, 2.0)); break;
    case 3:
        model = FaultModel::param_scale(params[uniform_int(rng, 0, 2)], uniform(rng, 0.3, 2.0));
        break;
    case 4: model = FaultModel::dead_synapse(); break;
    case 5: model = FaultModel::saturated_synapse(uniform(rng, 1.0, 10.0)); break;
    case 6: model = FaultModel::perturbed_synapse(uniform(rng, 0.0, 3.0)); break;
    default: model = FaultModel::bitflip_synapse({uniform_int(rng, 0, 7)}); break;
    }
    FaultDuration duration = FaultDuration::permanent();
    if (uniform_int(rng, 0, 2) == 0)
    {
        const int t1 = uniform_int(rng, 1, net.clock.num_steps);
        duration = FaultDuration::window(t1, uniform_int(rng, t1, net.clock.num_steps));
    }
    const int count = uniform_int(rng, 1, 3);
    if (uniform_int(rng, 0, 1) == 0)
    {
        return Fault::random_sites(model, layer, count,
                static_cast<std::uint64_t>(rng()), duration);
    }
    std::vector<FaultSite> sites;
    const std::size_t candidates = count_sites(net, model.target(), layer);
    for (int i = 0; i < count; ++i)
    {
        sites.push_back(site_at(net, model.target(), layer,
                static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(candidates) - 1))));
    }
    return Fault::at(model, sites, duration);
}

inline std::filesystem::path scratch_dir(const std::string &name)
{
    auto dir = std::filesystem::temp_directory_path() / ("srmfi-test-" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace fixtures

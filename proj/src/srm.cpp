#include "srmfi/srm.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "srmfi/error.hpp"

namespace srmfi {

namespace {

double alpha_shape(double s, double tau)
{
    const double r = s / tau;
    return r * std::exp(1.0 - r);
}

} // namespace

double eval_kernel(KernelKind kind, double lag_ms, const NeuronParams &params)
{
    if (!std::isfinite(lag_ms))
    {
        throw NumericError("kernel lag must be finite");
    }
    if (lag_ms <= 0.0)
    {
        return 0.0;
    }
    switch (kind)
    {
    case KernelKind::synaptic:
        return alpha_shape(lag_ms, params.tau_s);
    case KernelKind::refractory:
        return -2.0 * params.theta * alpha_shape(lag_ms, params.tau_ref);
    }
    return 0.0;
}

std::vector<double> tabulate_kernel(KernelKind kind, const NeuronParams &params,
        const Clock &clock, double cutoff)
{
    params.validate();
    clock.validate();
    const auto steps = static_cast<std::size_t>(clock.num_steps);
    std::vector<double> values(steps, 0.0);
    double peak = 0.0;
    for (std::size_t k = 1; k < steps; ++k)
    {
        values[k] = eval_kernel(kind, static_cast<double>(k) * clock.period_ms,
                params);
        if (!std::isfinite(values[k]))
        {
            throw NumericError("kernel evaluation overflow");
        }
        peak = std::max(peak, std::abs(values[k]));
    }
    if (peak == 0.0)
    {
        values.resize(1);
        return values;
    }
    // The alpha shape rises until its peak and decays monotonically after it.
    std::size_t k = 1;
    while (k < steps && std::abs(values[k]) < peak)
    {
        ++k;
    }
    for (; k < steps; ++k)
    {
        if (std::abs(values[k]) < cutoff * peak)
        {
            values.resize(k);
            break;
        }
    }
    return values;
}

FilteredInput filter_spikes(
        const SpikeRecord &input, std::span<const double> synaptic_kernel)
{
    const std::size_t rows = input.neurons();
    const std::size_t steps = input.steps();
    FilteredInput out{TimeMatrix(rows, steps), std::vector<char>(rows, 0)};
    const std::size_t taps = synaptic_kernel.size();
    for (std::size_t i = 0; i < rows; ++i)
    {
        const auto in = input.row(i);
        auto response = out.response.row(i);
        for (std::size_t j = 0; j < steps; ++j)
        {
            const double v = in[j];
            if (v == 0.0)
            {
                continue;
            }
            const std::size_t last = std::min(taps, steps - j);
            for (std::size_t k = 1; k < last; ++k)
            {
                response[j + k] += v * synaptic_kernel[k];
            }
            out.active[i] = out.active[i] || last > 1;
        }
    }
    return out;
}

void accumulate_drive(const LayerSpec &layer, std::span<const double> weights,
        const FilteredInput &input, TimeMatrix &drive, std::size_t col_begin,
        std::size_t col_end)
{
    if (weights.size() != layer.expected_weight_count())
    {
        throw ShapeError("layer '" + layer.name + "': weight count mismatch");
    }
    if (drive.rows() != layer.neuron_count() ||
            input.response.rows() != layer.input_shape.size())
    {
        throw ShapeError("layer '" + layer.name + "': drive shape mismatch");
    }
    col_end = std::min(col_end, drive.steps());
    if (col_begin >= col_end)
    {
        return;
    }

    auto axpy = [&](double w, std::size_t in_row, std::size_t out_row) {
        if (w == 0.0 || !input.active[in_row])
        {
            return;
        }
        const auto src = input.response.row(in_row);
        auto dst = drive.row(out_row);
        for (std::size_t j = col_begin; j < col_end; ++j)
        {
            dst[j] += w * src[j];
        }
    };

    if (layer.kind == LayerKind::dense)
    {
        const std::size_t n_in = layer.input_shape.size();
        for (std::size_t o = 0; o < layer.neuron_count(); ++o)
        {
            for (std::size_t i = 0; i < n_in; ++i)
            {
                axpy(weights[o * n_in + i], i, o);
            }
        }
        return;
    }

    if (layer.kind != LayerKind::conv2d)
    {
        throw ConfigError("layer '" + layer.name + "' has no synapses");
    }
    const Shape3 &in = layer.input_shape;
    const Shape3 &out = layer.output_shape;
    const ConvGeometry &g = layer.conv;
    for (int oc = 0; oc < out.channels; ++oc)
    {
        for (int oy = 0; oy < out.height; ++oy)
        {
            for (int ox = 0; ox < out.width; ++ox)
            {
                const std::size_t out_row = flat_index(out, {oc, oy, ox});
                for (int ic = 0; ic < in.channels; ++ic)
                {
                    for (int ky = 0; ky < g.kernel_h; ++ky)
                    {
                        const int iy = oy * g.stride + ky - g.padding;
                        if (iy < 0 || iy >= in.height)
                        {
                            continue;
                        }
                        for (int kx = 0; kx < g.kernel_w; ++kx)
                        {
                            const int ix = ox * g.stride + kx - g.padding;
                            if (ix < 0 || ix >= in.width)
                            {
                                continue;
                            }
                            const std::size_t w_idx =
                                    ((static_cast<std::size_t>(oc) *
                                                     in.channels +
                                             ic) *
                                                    g.kernel_h +
                                            ky) *
                                            g.kernel_w +
                                    kx;
                            axpy(weights[w_idx], flat_index(in, {ic, iy, ix}),
                                    out_row);
                        }
                    }
                }
            }
        }
    }
}

void integrate_and_fire(std::span<const double> drive,
        const NeuronParams &params, std::span<const double> refractory_kernel,
        std::span<double> spikes, std::span<double> membrane)
{
    const std::size_t steps = drive.size();
    std::vector<double> refractory(steps, 0.0);
    const std::size_t taps = refractory_kernel.size();
    for (std::size_t j = 0; j < steps; ++j)
    {
        const double u = drive[j] + refractory[j] + params.u_rest;
        if (!std::isfinite(u))
        {
            throw NumericError("membrane potential overflow at step " +
                    std::to_string(j + 1));
        }
        if (!membrane.empty())
        {
            membrane[j] = u;
        }
        if (u >= params.theta)
        {
            spikes[j] = 1.0;
            const std::size_t last = std::min(taps, steps - j);
            for (std::size_t k = 1; k < last; ++k)
            {
                refractory[j + k] += refractory_kernel[k];
            }
        }
        else
        {
            spikes[j] = 0.0;
        }
    }
}

void check_layer_input(
        const LayerSpec &layer, const SpikeRecord &record, const Clock &clock)
{
    if (record.neurons() != layer.input_shape.size() ||
            record.steps() != static_cast<std::size_t>(clock.num_steps))
    {
        throw ShapeError("layer '" + layer.name + "' expects " +
                std::to_string(layer.input_shape.size()) + "x" +
                std::to_string(clock.num_steps) + " input, got " +
                std::to_string(record.neurons()) + "x" +
                std::to_string(record.steps()));
    }
}

LayerActivity simulate_layer_neurons(
        const LayerSpec &layer, const SpikeRecord &input, const Clock &clock)
{
    if (!layer.has_neurons() || !layer.params)
    {
        throw ConfigError("layer '" + layer.name + "' has no neurons");
    }
    check_layer_input(layer, input, clock);
    const NeuronParams &params = *layer.params;
    const auto steps = static_cast<std::size_t>(clock.num_steps);

    const auto epsilon = tabulate_kernel(KernelKind::synaptic, params, clock);
    const auto eta = tabulate_kernel(KernelKind::refractory, params, clock);
    const FilteredInput filtered = filter_spikes(input, epsilon);
    TimeMatrix drive(layer.neuron_count(), steps);
    accumulate_drive(layer, layer.weights, filtered, drive, 0, steps);

    LayerActivity out{SpikeRecord(layer.neuron_count(), steps),
            MembraneTrace(layer.neuron_count(), steps)};
    for (std::size_t n = 0; n < layer.neuron_count(); ++n)
    {
        integrate_and_fire(drive.row(n), params, eta, out.spikes.row(n),
                out.membrane.row(n));
    }
    return out;
}

SpikeRecord sumpool_forward(const LayerSpec &layer, const SpikeRecord &input)
{
    if (layer.kind != LayerKind::sumpool)
    {
        throw ConfigError("layer '" + layer.name + "' is not a sum-pool layer");
    }
    const Shape3 &in = layer.input_shape;
    const Shape3 out = pool_output_shape(in, layer.pool);
    if (input.neurons() != in.size())
    {
        throw ShapeError("layer '" + layer.name + "': input has " +
                std::to_string(input.neurons()) + " rows, expected " +
                std::to_string(in.size()));
    }
    const std::size_t steps = input.steps();
    SpikeRecord result(out.size(), steps);
    for (int c = 0; c < in.channels; ++c)
    {
        for (int y = 0; y < in.height; ++y)
        {
            for (int x = 0; x < in.width; ++x)
            {
                const auto src = input.row(flat_index(in, {c, y, x}));
                auto dst = result.row(flat_index(out,
                        {c, y / layer.pool.window_h, x / layer.pool.window_w}));
                for (std::size_t j = 0; j < steps; ++j)
                {
                    dst[j] += src[j];
                }
            }
        }
    }
    return result;
}

SpikeRecord forward_layer(
        const LayerSpec &layer, const SpikeRecord &input, const Clock &clock)
{
    if (layer.kind == LayerKind::sumpool)
    {
        check_layer_input(layer, input, clock);
        return sumpool_forward(layer, input);
    }
    return simulate_layer_neurons(layer, input, clock).spikes;
}

std::vector<SpikeRecord> network_forward(const Network &net,
        const SpikeRecord &input, int start_layer, const SpikeRecord *seed,
        std::optional<int> stop_layer)
{
    const int count = static_cast<int>(net.size());
    const int stop = stop_layer.value_or(count - 1);
    if (start_layer < 0 || start_layer >= count || stop < start_layer ||
            stop >= count)
    {
        throw ConfigError("invalid layer range [" +
                std::to_string(start_layer) + ", " + std::to_string(stop) +
                "]");
    }
    if (start_layer > 0 && seed == nullptr)
    {
        throw ConfigError("late start at layer " + std::to_string(start_layer) +
                " requires the output of layer " +
                std::to_string(start_layer - 1));
    }
    std::vector<SpikeRecord> records;
    records.reserve(static_cast<std::size_t>(stop - start_layer + 1));
    const SpikeRecord *current = start_layer > 0 ? seed : &input;
    for (int l = start_layer; l <= stop; ++l)
    {
        records.push_back(forward_layer(net.layers[l], *current, net.clock));
        current = &records.back();
    }
    return records;
}

} // namespace srmfi

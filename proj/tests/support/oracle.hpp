#pragma once

#include <cmath>
#include <vector>

#include "srmfi/network.hpp"
#include "srmfi/time_matrix.hpp"

// Brute-force SRM reference: every membrane value is a direct sum over all
// past input and output spikes, with untruncated kernels.
namespace oracle {

inline double epsilon(double s, double tau_s)
{
    return s > 0.0 ? s / tau_s * std::exp(1.0 - s / tau_s) : 0.0;
}

inline double eta(double s, double tau_ref, double theta)
{
    return s > 0.0 ? -2.0 * theta * s / tau_ref * std::exp(1.0 - s / tau_ref) : 0.0;
}

// Synaptic weight from input row `i` to output row `o`, zero when unconnected.
inline double connection(const srmfi::LayerSpec &layer, std::size_t i, std::size_t o)
{
    using namespace srmfi;
    if (layer.kind == LayerKind::dense)
    {
        return layer.weights[o * layer.input_shape.size() + i];
    }
    const Coord in = unflatten(layer.input_shape, i);
    const Coord out = unflatten(layer.output_shape, o);
    const ConvGeometry &g = layer.conv;
    const int ky = in.y + g.padding - out.y * g.stride;
    const int kx = in.x + g.padding - out.x * g.stride;
    if (ky < 0 || ky >= g.kernel_h || kx < 0 || kx >= g.kernel_w)
    {
        return 0.0;
    }
    const std::size_t idx =
            ((static_cast<std::size_t>(out.c) * layer.input_shape.channels + in.c) *
                            g.kernel_h + ky) * g.kernel_w + kx;
    return layer.weights[idx];
}

struct LayerTrace
{
    srmfi::SpikeRecord spikes;
    srmfi::MembraneTrace membrane;
    int ties = 0; // steps where |u - theta| was too small to decide
};

// `reference` supplies the decision at near-ties (|u - theta| < tie_band).
inline LayerTrace simulate(const srmfi::LayerSpec &layer, const srmfi::SpikeRecord &input,
        const srmfi::Clock &clock, const srmfi::SpikeRecord *reference,
        double tie_band = 1e-9)
{
    using namespace srmfi;
    const std::size_t d = static_cast<std::size_t>(clock.num_steps);
    const std::size_t n_in = input.rows();
    const std::size_t n_out = layer.output_shape.size();
    const NeuronParams &p = *layer.params;
    const double T = clock.period_ms;

    LayerTrace out{SpikeRecord(n_out, d), MembraneTrace(n_out, d), 0};
    for (std::size_t o = 0; o < n_out; ++o)
    {
        std::vector<double> w(n_in);
        for (std::size_t i = 0; i < n_in; ++i)
        {
            w[i] = connection(layer, i, o);
        }
        for (std::size_t j = 0; j < d; ++j)
        {
            const double tj = static_cast<double>(j + 1) * T;
            double u = p.u_rest;
            for (std::size_t i = 0; i < n_in; ++i)
            {
                if (w[i] == 0.0)
                {
                    continue;
                }
                for (std::size_t k = 0; k < j; ++k)
                {
                    const double v = input.at(i, k);
                    if (v != 0.0)
                    {
                        u += w[i] * v * epsilon(tj - static_cast<double>(k + 1) * T, p.tau_s);
                    }
                }
            }
            for (std::size_t k = 0; k < j; ++k)
            {
                if (out.spikes.at(o, k) != 0.0)
                {
                    u += eta(tj - static_cast<double>(k + 1) * T, p.tau_ref, p.theta);
                }
            }
            out.membrane.at(o, j) = u;
            bool fire = u >= p.theta;
            if (std::abs(u - p.theta) < tie_band)
            {
                ++out.ties;
                if (reference != nullptr)
                {
                    fire = reference->at(o, j) != 0.0;
                }
            }
            out.spikes.at(o, j) = fire ? 1.0 : 0.0;
        }
    }
    return out;
}

} // namespace oracle

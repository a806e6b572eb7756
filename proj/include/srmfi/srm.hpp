#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "srmfi/network.hpp"
#include "srmfi/time_matrix.hpp"

namespace srmfi {

// Relative magnitude below which a tabulated kernel tail is dropped.
inline constexpr double kKernelCutoff = 1e-16;

enum class KernelKind
{
    synaptic,   // epsilon(s) = (s / tau_s) e^(1 - s / tau_s) H(s)
    refractory, // eta(s) = -2 theta (s / tau_ref) e^(1 - s / tau_ref) H(s)
};

// Kernel value at `lag_ms`. Zero for lag <= 0. Throws NumericError on a
// non-finite lag.
double eval_kernel(KernelKind kind, double lag_ms, const NeuronParams &params);

// Kernel sampled at lags k * period for k = 0..K-1 (entry 0 is always zero),
// with K <= num_steps. The tail after the peak is cut at the first sample
// whose magnitude drops below `cutoff` times the peak magnitude.
std::vector<double> tabulate_kernel(KernelKind kind, const NeuronParams &params,
        const Clock &clock, double cutoff = kKernelCutoff);

// Synaptic responses (epsilon * S_i)(t_j) of every input row. A record value
// v counts as v coincident unit spikes. `active[i]` is false for rows whose
// response is identically zero.
struct FilteredInput
{
    TimeMatrix response;
    std::vector<char> active;
};

FilteredInput filter_spikes(
        const SpikeRecord &input, std::span<const double> synaptic_kernel);

// Adds sum_i w_i * response_i(t_j) for columns [col_begin, col_end) into
// `drive` (one row per output neuron of `layer`). `weights` follows the
// layer's weight layout and may differ from layer.weights (fault injection).
void accumulate_drive(const LayerSpec &layer, std::span<const double> weights,
        const FilteredInput &input, TimeMatrix &drive, std::size_t col_begin,
        std::size_t col_end);

// Steps one neuron through the grid: u(t_j) = drive(t_j) + (eta * S_o)(t_j)
// + u_rest, firing at most one spike per step whenever u(t_j) >= theta.
// `membrane` may be empty. Throws NumericError if u becomes non-finite.
void integrate_and_fire(std::span<const double> drive,
        const NeuronParams &params, std::span<const double> refractory_kernel,
        std::span<double> spikes, std::span<double> membrane);

struct LayerActivity
{
    SpikeRecord spikes;
    MembraneTrace membrane;
};

// Full SRM evaluation of a dense or conv2d layer.
LayerActivity simulate_layer_neurons(
        const LayerSpec &layer, const SpikeRecord &input, const Clock &clock);

// Windowed sums of the input, no thresholding.
SpikeRecord sumpool_forward(const LayerSpec &layer, const SpikeRecord &input);

// Output record of any layer kind.
SpikeRecord forward_layer(
        const LayerSpec &layer, const SpikeRecord &input, const Clock &clock);

// Throws ShapeError unless `record` matches `layer`'s input on `clock`.
void check_layer_input(
        const LayerSpec &layer, const SpikeRecord &record, const Clock &clock);

// Evaluates layers start_layer..stop_layer (inclusive, 0-based; defaults to
// the last layer). For start_layer > 0, `seed` must hold the output of layer
// start_layer - 1 and `input` is ignored. Returns one record per evaluated
// layer.
std::vector<SpikeRecord> network_forward(const Network &net,
        const SpikeRecord &input, int start_layer = 0,
        const SpikeRecord *seed = nullptr,
        std::optional<int> stop_layer = std::nullopt);

} // namespace srmfi

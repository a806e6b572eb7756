#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "srmfi/faults.hpp"
#include "srmfi/network.hpp"
#include "srmfi/time_matrix.hpp"

namespace srmfi {

struct CampaignOptions
{
    bool late_start = true;
    bool early_stop = true;
    // Early stop fires when ||A_golden - A_faulty||_1 <= tolerance at the
    // rightmost faulty layer. Values above zero can mask critical faults.
    double early_stop_tolerance = 0.0;
    int batch_size = 1;
    bool parallel = false;
    int threads = 0; // 0: hardware concurrency
    double misprediction_tolerance = 0.0;
    bool save_outputs = false;
    std::uint64_t rng_seed = 0;

    void validate() const;
    bool operator==(const CampaignOptions &) const = default;
};

struct Sample
{
    SpikeRecord input;
    int label = 0;
};

// Faults evaluated together in one inference, sorted by layer after
// preparation.
struct FaultRound
{
    std::vector<Fault> faults;
    int l_left = -1;
    int l_right = -1;
    bool hard_neuron_only_leftmost = false;
    int source_index = 0; // position in the campaign's round list
};

struct DroppedFault
{
    int round = 0;
    int fault = 0;
    FaultDescriptor descriptor;
    std::string reason;

    bool operator==(const DroppedFault &) const = default;
};

struct PreparedCampaign
{
    std::vector<FaultRound> rounds;
    std::vector<DroppedFault> dropped;
    std::vector<std::string> warnings;
};

// Fault-free outputs A^l of every layer, per sample of one batch.
struct GoldenCache
{
    std::vector<std::vector<SpikeRecord>> layers; // [sample][layer]
    std::vector<int> predictions;

    std::size_t samples() const { return layers.size(); }
};

enum class RoundLabel
{
    benign,
    critical,
};

struct RoundCounters
{
    std::int64_t layer_evaluations = 0;
    std::int64_t early_stops = 0;
    std::int64_t late_starts = 0;
    // Weights clamped into the quantizer range before a bit-flip.
    std::int64_t clamped_weights = 0;

    RoundCounters &operator+=(const RoundCounters &other);
    bool operator==(const RoundCounters &) const = default;
};

struct RoundResult
{
    int round = 0;
    std::vector<FaultDescriptor> faults;
    int l_left = -1;
    int l_right = -1;
    double accuracy = 0.0;
    RoundLabel label = RoundLabel::benign;
    std::vector<int> predictions;
    RoundCounters counters;
    std::vector<SpikeRecord> outputs; // A^L_f per sample when saved

    bool operator==(const RoundResult &) const = default;
};

struct CampaignResults
{
    CampaignOptions options;
    int num_layers = 0;
    int num_classes = 0;
    int num_steps = 0;
    std::vector<int> labels;
    double golden_accuracy = 0.0;
    std::vector<int> golden_predictions;
    std::int64_t golden_layer_evaluations = 0;
    std::vector<RoundResult> rounds;
    std::vector<DroppedFault> dropped;
    std::vector<std::string> warnings;
    double runtime_seconds = 0.0;

    std::size_t num_samples() const { return labels.size(); }
    bool operator==(const CampaignResults &) const = default;
};

// Per-layer fault application compiled from a prepared round.
struct LayerFaultPlan
{
    struct OutputFault
    {
        FaultModel model;
        std::size_t neuron = 0;
        FaultDuration duration;
    };

    // Neurons sharing the same perturbed parameters. Their rows are taken from
    // the duplicate evaluation at `active` timestamps.
    struct ParamGroup
    {
        NeuronParams params;
        std::vector<std::size_t> neurons;
        std::vector<char> active;
    };

    // Weights in force for columns [col_begin, col_end).
    struct WeightSegment
    {
        std::size_t col_begin = 0;
        std::size_t col_end = 0;
        std::vector<double> weights;
    };

    std::vector<OutputFault> outputs;
    std::vector<ParamGroup> params;
    std::vector<WeightSegment> weights;

    bool empty() const
    {
        return outputs.empty() && params.empty() && weights.empty();
    }
    bool hard_only() const { return params.empty() && weights.empty(); }
};

struct RoundPlan
{
    std::vector<LayerFaultPlan> layers;
    int l_left = -1;
    int l_right = -1;
    bool hard_neuron_only_leftmost = false;
    std::int64_t clamped_weights = 0;

    bool empty() const { return l_left < 0; }
};

RoundPlan compile_round(const Network &net, const FaultRound &round);

// Layer evaluation with the plan's interceptors applied: weights substituted
// before, duplicate-parameter rows spliced and neuron outputs rewritten after.
SpikeRecord evaluate_faulty_layer(const LayerSpec &layer,
        const LayerFaultPlan *plan, const SpikeRecord &input,
        const Clock &clock);

// Index of the output neuron with the most spikes; ties go to the lowest index.
int decode_rate(const SpikeRecord &output);

// True when ||golden - faulty||_1 <= tolerance.
bool early_stop_check(
        const SpikeRecord &golden, const SpikeRecord &faulty, double tolerance);

// Fault-free forward pass over `samples`, caching every layer's output.
GoldenCache golden_run(const Network &net, std::span<const Sample> samples,
        int threads = 1);

struct SampleOutcome
{
    int prediction = 0;
    SpikeRecord output;
    int layers_evaluated = 0;
    bool late_started = false;
    bool early_stopped = false;
};

// Faulty inference of one sample. `golden` holds the sample's cached A^l for
// every layer and is required when late start or early stop is enabled.
SampleOutcome run_round(const Network &net, const RoundPlan &plan,
        const SpikeRecord &input, std::span<const SpikeRecord> golden,
        const CampaignOptions &options);

CampaignResults run_campaign(const Network &net,
        const PreparedCampaign &prepared, std::span<const Sample> dataset,
        const CampaignOptions &options);

// Builder mirroring the inject / then_inject / inject_complete / eject API.
class Campaign
{
public:
    explicit Campaign(Network net, CampaignOptions options = {});

    // Adds faults to the current round, opening one if none exists.
    void inject(Fault fault);
    void inject(std::vector<Fault> faults);
    // Opens a new round holding `faults`.
    void then_inject(std::vector<Fault> faults);
    // One single-fault round per matching element of `layer`.
    void inject_complete(const FaultModel &model, int layer,
            FaultDuration duration = FaultDuration::permanent());
    // Removes every round.
    void eject();

    // Validation, random site assignment and per-round sorting.
    PreparedCampaign prepare() const;
    CampaignResults run(std::span<const Sample> dataset) const;

    const Network &network() const { return net_; }
    const CampaignOptions &options() const { return options_; }
    CampaignOptions &options() { return options_; }
    const std::vector<std::vector<Fault>> &rounds() const { return rounds_; }

private:
    Network net_;
    CampaignOptions options_;
    std::vector<std::vector<Fault>> rounds_;
    std::vector<std::string> notes_;
};

} // namespace srmfi

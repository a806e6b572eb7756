#include "srmfi/campaign.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <map>
#include <set>
#include <utility>

#include "parallel.hpp"
#include "srmfi/error.hpp"
#include "srmfi/srm.hpp"

namespace srmfi {

namespace {

std::uint64_t splitmix64(std::uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derived_seed(std::uint64_t base, int round, int fault)
{
    return splitmix64(base ^ splitmix64((static_cast<std::uint64_t>(round)
                                                << 32) |
                                     static_cast<std::uint32_t>(fault)));
}

int min_layer(const Fault &fault)
{
    int best = -1;
    for (const auto &site : fault.sites)
    {
        const int l = site_layer(site);
        best = best < 0 ? l : std::min(best, l);
    }
    return best;
}

int threads_for(const CampaignOptions &options)
{
    return options.parallel ? detail::resolve_threads(options.threads) : 1;
}

// Drive for every output neuron, honouring time-segmented weight faults.
TimeMatrix build_drive(const LayerSpec &layer, const LayerFaultPlan *plan,
        const FilteredInput &filtered, std::size_t steps)
{
    TimeMatrix drive(layer.neuron_count(), steps);
    if (plan == nullptr || plan->weights.empty())
    {
        accumulate_drive(layer, layer.weights, filtered, drive, 0, steps);
        return drive;
    }
    for (const auto &segment : plan->weights)
    {
        accumulate_drive(layer, segment.weights, filtered, drive,
                segment.col_begin, segment.col_end);
    }
    return drive;
}

} // namespace

void CampaignOptions::validate() const
{
    if (!std::isfinite(early_stop_tolerance) || early_stop_tolerance < 0.0)
    {
        throw ConfigError("early stop tolerance must be finite and >= 0");
    }
    if (batch_size < 1)
    {
        throw ConfigError("batch size must be at least 1");
    }
    if (threads < 0)
    {
        throw ConfigError("thread count must be >= 0");
    }
    if (!std::isfinite(misprediction_tolerance) || misprediction_tolerance < 0.0)
    {
        throw ConfigError("misprediction tolerance must be finite and >= 0");
    }
}

RoundCounters &RoundCounters::operator+=(const RoundCounters &other)
{
    layer_evaluations += other.layer_evaluations;
    early_stops += other.early_stops;
    late_starts += other.late_starts;
    clamped_weights += other.clamped_weights;
    return *this;
}

RoundPlan compile_round(const Network &net, const FaultRound &round)
{
    RoundPlan plan;
    plan.layers.resize(net.size());
    plan.l_left = round.l_left;
    plan.l_right = round.l_right;
    plan.hard_neuron_only_leftmost = round.hard_neuron_only_leftmost;
    const auto steps = static_cast<std::size_t>(net.clock.num_steps);

    struct WeightFault
    {
        const Fault *fault;
        std::size_t index;
    };
    std::map<int, std::vector<WeightFault>> weight_faults;
    // neuron -> faults (in declaration order) that rescale its parameters
    std::map<int, std::map<std::size_t, std::vector<const Fault *>>> param_faults;

    for (const Fault &fault : round.faults)
    {
        const FaultTarget target = fault.model.target();
        for (const FaultSite &site : fault.sites)
        {
            const int l = site_layer(site);
            if (l < 0 || static_cast<std::size_t>(l) >= net.size())
            {
                throw ConfigError("fault site " + to_string(site) +
                        " references a missing layer; prepare the campaign "
                        "first");
            }
            const LayerSpec &layer = net.layers[l];
            if (target == FaultTarget::synapse_weight)
            {
                weight_faults[l].push_back(
                        {&fault, weight_index(layer, std::get<SynapseSite>(site))});
                continue;
            }
            const std::size_t neuron = flat_index(
                    layer.output_shape, std::get<NeuronSite>(site).pos);
            if (target == FaultTarget::neuron_output)
            {
                plan.layers[l].outputs.push_back(
                        {fault.model, neuron, fault.duration});
            }
            else
            {
                param_faults[l][neuron].push_back(&fault);
            }
        }
    }

    for (const auto &[l, neurons] : param_faults)
    {
        const NeuronParams &nominal = *net.layers[l].params;
        // Group neurons hit by the same sequence of parametric faults.
        std::map<std::vector<const Fault *>, std::vector<std::size_t>> groups;
        for (const auto &[neuron, faults] : neurons)
        {
            groups[faults].push_back(neuron);
        }
        for (const auto &[faults, members] : groups)
        {
            LayerFaultPlan::ParamGroup group;
            group.params = nominal;
            group.active.assign(steps, 0);
            for (const Fault *fault : faults)
            {
                group.params = faulty_params(fault->model, group.params);
                for (std::size_t j = 0; j < steps; ++j)
                {
                    group.active[j] = group.active[j] ||
                            is_active(fault->duration, static_cast<int>(j) + 1);
                }
            }
            group.neurons = members;
            plan.layers[l].params.push_back(std::move(group));
        }
    }

    for (const auto &[l, faults] : weight_faults)
    {
        const LayerSpec &layer = net.layers[l];
        std::set<std::size_t> bounds{0, steps};
        for (const auto &wf : faults)
        {
            if (wf.fault->duration.transient)
            {
                bounds.insert(static_cast<std::size_t>(wf.fault->duration.t1 - 1));
                bounds.insert(static_cast<std::size_t>(wf.fault->duration.t2));
            }
        }
        std::map<int, Quantizer> quantizers;
        std::set<std::pair<const Fault *, std::size_t>> clamped;
        for (auto it = bounds.begin(); std::next(it) != bounds.end(); ++it)
        {
            LayerFaultPlan::WeightSegment segment;
            segment.col_begin = *it;
            segment.col_end = *std::next(it);
            segment.weights = layer.weights;
            const int step = static_cast<int>(segment.col_begin) + 1;
            for (const auto &wf : faults)
            {
                const Quantizer *quantizer = nullptr;
                if (const auto *flip = std::get_if<fn::BitflipSynapse>(
                            &wf.fault->model.function()))
                {
                    auto q = quantizers.find(flip->width);
                    if (q == quantizers.end())
                    {
                        q = quantizers
                                    .emplace(flip->width,
                                            layer_quantizer(layer, flip->width))
                                    .first;
                    }
                    quantizer = &q->second;
                    if (is_active(wf.fault->duration, step) &&
                            !quantizer->in_range(segment.weights[wf.index]))
                    {
                        clamped.insert({wf.fault, wf.index});
                    }
                }
                segment.weights[wf.index] =
                        faulty_weight(wf.fault->model, segment.weights[wf.index],
                                quantizer, step, wf.fault->duration);
            }
            plan.layers[l].weights.push_back(std::move(segment));
        }
        plan.clamped_weights += static_cast<std::int64_t>(clamped.size());
    }
    return plan;
}

SpikeRecord evaluate_faulty_layer(const LayerSpec &layer,
        const LayerFaultPlan *plan, const SpikeRecord &input,
        const Clock &clock)
{
    if (plan == nullptr || plan->empty())
    {
        return forward_layer(layer, input, clock);
    }
    if (!layer.has_neurons())
    {
        throw ConfigError("layer '" + layer.name + "' cannot hold faults");
    }
    check_layer_input(layer, input, clock);
    const auto steps = static_cast<std::size_t>(clock.num_steps);
    const NeuronParams &params = *layer.params;

    const auto epsilon = tabulate_kernel(KernelKind::synaptic, params, clock);
    const auto eta = tabulate_kernel(KernelKind::refractory, params, clock);
    const FilteredInput filtered = filter_spikes(input, epsilon);
    const TimeMatrix drive = build_drive(layer, plan, filtered, steps);

    SpikeRecord out(layer.neuron_count(), steps);
    for (std::size_t n = 0; n < layer.neuron_count(); ++n)
    {
        integrate_and_fire(drive.row(n), params, eta, out.row(n), {});
    }

    // Duplicate evaluation with perturbed parameters, spliced per neuron.
    std::vector<double> row(steps);
    for (const auto &group : plan->params)
    {
        std::optional<TimeMatrix> own_drive;
        if (group.params.tau_s != params.tau_s)
        {
            const auto eps = tabulate_kernel(KernelKind::synaptic, group.params, clock);
            own_drive = build_drive(layer, plan, filter_spikes(input, eps), steps);
        }
        const TimeMatrix &dummy_drive = own_drive ? *own_drive : drive;
        const auto dummy_eta =
                tabulate_kernel(KernelKind::refractory, group.params, clock);
        for (const std::size_t n : group.neurons)
        {
            integrate_and_fire(dummy_drive.row(n), group.params, dummy_eta, row, {});
            auto dst = out.row(n);
            for (std::size_t j = 0; j < steps; ++j)
            {
                if (group.active[j])
                {
                    dst[j] = row[j];
                }
            }
        }
    }

    for (const auto &fault : plan->outputs)
    {
        apply_neuron_output_fault(fault.model, out.row(fault.neuron), fault.duration);
    }
    return out;
}

int decode_rate(const SpikeRecord &output)
{
    int best = 0;
    double best_count = 0.0;
    for (std::size_t k = 0; k < output.neurons(); ++k)
    {
        const double count = output.row_sum(k);
        if (k == 0 || count > best_count)
        {
            best = static_cast<int>(k);
            best_count = count;
        }
    }
    return best;
}

bool early_stop_check(
        const SpikeRecord &golden, const SpikeRecord &faulty, double tolerance)
{
    if (!golden.same_shape(faulty))
    {
        throw ShapeError("early stop compares records of different shapes");
    }
    double norm = 0.0;
    const auto g = golden.data();
    const auto f = faulty.data();
    for (std::size_t i = 0; i < g.size(); ++i)
    {
        norm += std::abs(g[i] - f[i]);
    }
    return norm <= tolerance;
}

GoldenCache golden_run(
        const Network &net, std::span<const Sample> samples, int threads)
{
    GoldenCache cache;
    cache.layers.resize(samples.size());
    cache.predictions.resize(samples.size());
    detail::parallel_for(samples.size(), threads, [&](std::size_t i) {
        cache.layers[i] = network_forward(net, samples[i].input);
        cache.predictions[i] = decode_rate(cache.layers[i].back());
    });
    return cache;
}

SampleOutcome run_round(const Network &net, const RoundPlan &plan,
        const SpikeRecord &input, std::span<const SpikeRecord> golden,
        const CampaignOptions &options)
{
    const int count = static_cast<int>(net.size());
    const bool uses_golden = options.late_start || options.early_stop;
    if (uses_golden && golden.size() != net.size())
    {
        throw ConfigError("missing golden cache for late start / early stop");
    }
    if (plan.layers.size() != net.size())
    {
        throw ConfigError("round plan does not match the network");
    }

    SampleOutcome outcome;
    auto finish = [&](SpikeRecord output) {
        outcome.prediction = decode_rate(output);
        outcome.output = std::move(output);
        return outcome;
    };

    if (plan.empty() && uses_golden)
    {
        outcome.late_started = true;
        return finish(golden.back());
    }

    int first = 0;
    SpikeRecord current;
    const SpikeRecord *layer_input = &input;
    if (options.late_start && !plan.empty())
    {
        if (plan.hard_neuron_only_leftmost)
        {
            // Rewrite the cached output instead of recomputing the layer.
            current = golden[plan.l_left];
            for (const auto &fault : plan.layers[plan.l_left].outputs)
            {
                apply_neuron_output_fault(
                        fault.model, current.row(fault.neuron), fault.duration);
            }
            first = plan.l_left + 1;
            outcome.late_started = true;
            if (options.early_stop && plan.l_right == plan.l_left &&
                    early_stop_check(golden[plan.l_left], current,
                            options.early_stop_tolerance))
            {
                outcome.early_stopped = true;
                return finish(golden.back());
            }
            layer_input = &current;
        }
        else
        {
            first = plan.l_left;
            outcome.late_started = first > 0;
            if (first > 0)
            {
                layer_input = &golden[first - 1];
            }
        }
    }

    for (int l = first; l < count; ++l)
    {
        const LayerFaultPlan *layer_plan =
                plan.empty() ? nullptr : &plan.layers[l];
        SpikeRecord produced = evaluate_faulty_layer(
                net.layers[l], layer_plan, *layer_input, net.clock);
        ++outcome.layers_evaluated;
        if (options.early_stop && l == plan.l_right &&
                early_stop_check(golden[l], produced, options.early_stop_tolerance))
        {
            outcome.early_stopped = true;
            return finish(golden.back());
        }
        current = std::move(produced);
        layer_input = &current;
    }
    return finish(std::move(current));
}

CampaignResults run_campaign(const Network &net,
        const PreparedCampaign &prepared, std::span<const Sample> dataset,
        const CampaignOptions &options)
{
    const auto started = std::chrono::steady_clock::now();
    options.validate();
    net.validate();
    if (dataset.empty())
    {
        throw ConfigError("dataset is empty");
    }
    for (std::size_t i = 0; i < dataset.size(); ++i)
    {
        check_layer_input(net.layers.front(), dataset[i].input, net.clock);
        if (dataset[i].label < 0 || dataset[i].label >= net.num_classes)
        {
            throw ConfigError("sample " + std::to_string(i) + " has label " +
                    std::to_string(dataset[i].label) + " outside [0, " +
                    std::to_string(net.num_classes) + ")");
        }
    }

    const std::size_t n = dataset.size();
    const int threads = threads_for(options);

    CampaignResults results;
    results.options = options;
    results.num_layers = static_cast<int>(net.size());
    results.num_classes = net.num_classes;
    results.num_steps = net.clock.num_steps;
    results.dropped = prepared.dropped;
    results.warnings = prepared.warnings;
    results.golden_predictions.resize(n);
    for (const Sample &sample : dataset)
    {
        results.labels.push_back(sample.label);
    }

    std::vector<RoundPlan> plans;
    plans.reserve(prepared.rounds.size());
    for (const FaultRound &round : prepared.rounds)
    {
        plans.push_back(compile_round(net, round));
        RoundResult result;
        result.round = round.source_index;
        result.l_left = round.l_left;
        result.l_right = round.l_right;
        for (const Fault &fault : round.faults)
        {
            result.faults.push_back(describe(fault));
        }
        result.predictions.resize(n);
        if (options.save_outputs)
        {
            result.outputs.resize(n);
        }
        result.counters.clamped_weights = plans.back().clamped_weights;
        results.rounds.push_back(std::move(result));
    }

    std::vector<SampleOutcome> outcomes;
    for (std::size_t begin = 0; begin < n;
            begin += static_cast<std::size_t>(options.batch_size))
    {
        const std::size_t end =
                std::min(n, begin + static_cast<std::size_t>(options.batch_size));
        const auto batch = dataset.subspan(begin, end - begin);
        // Per-batch cache, released when the batch is done.
        const GoldenCache golden = golden_run(net, batch, threads);
        results.golden_layer_evaluations +=
                static_cast<std::int64_t>(batch.size() * net.size());
        std::copy(golden.predictions.begin(), golden.predictions.end(),
                results.golden_predictions.begin() + static_cast<std::ptrdiff_t>(begin));

        for (std::size_t r = 0; r < plans.size(); ++r)
        {
            outcomes.assign(batch.size(), SampleOutcome{});
            detail::parallel_for(batch.size(), threads, [&](std::size_t i) {
                outcomes[i] = run_round(net, plans[r], batch[i].input,
                        golden.layers[i], options);
            });
            RoundResult &result = results.rounds[r];
            for (std::size_t i = 0; i < batch.size(); ++i)
            {
                SampleOutcome &o = outcomes[i];
                result.predictions[begin + i] = o.prediction;
                result.counters.layer_evaluations += o.layers_evaluated;
                result.counters.early_stops += o.early_stopped;
                result.counters.late_starts += o.late_started;
                if (options.save_outputs)
                {
                    result.outputs[begin + i] = std::move(o.output);
                }
            }
        }
    }

    auto accuracy = [&](const std::vector<int> &predictions) {
        std::size_t correct = 0;
        for (std::size_t i = 0; i < n; ++i)
        {
            correct += predictions[i] == results.labels[i];
        }
        return static_cast<double>(correct) / static_cast<double>(n);
    };
    results.golden_accuracy = accuracy(results.golden_predictions);
    for (RoundResult &result : results.rounds)
    {
        result.accuracy = accuracy(result.predictions);
        result.label = results.golden_accuracy - result.accuracy >
                        options.misprediction_tolerance
                ? RoundLabel::critical
                : RoundLabel::benign;
    }
    results.runtime_seconds = std::chrono::duration<double>(
            std::chrono::steady_clock::now() - started)
                                      .count();
    return results;
}

Campaign::Campaign(Network net, CampaignOptions options)
    : net_(std::move(net)), options_(options)
{
    net_.validate();
    options_.validate();
}

void Campaign::inject(Fault fault)
{
    if (rounds_.empty())
    {
        rounds_.emplace_back();
    }
    rounds_.back().push_back(std::move(fault));
}

void Campaign::inject(std::vector<Fault> faults)
{
    for (Fault &fault : faults)
    {
        inject(std::move(fault));
    }
}

void Campaign::then_inject(std::vector<Fault> faults)
{
    rounds_.push_back(std::move(faults));
}

void Campaign::inject_complete(
        const FaultModel &model, int layer, FaultDuration duration)
{
    if (layer < 0 || static_cast<std::size_t>(layer) >= net_.size() ||
            !net_.layers[layer].has_neurons())
    {
        notes_.push_back("inject_complete: layer " + std::to_string(layer) +
                " has no elements for fault model '" + model.name() + "'");
        return;
    }
    const FaultTarget target = model.target();
    const std::size_t count = count_sites(net_, target, layer);
    for (std::size_t i = 0; i < count; ++i)
    {
        rounds_.push_back({Fault::at(model, site_at(net_, target, layer, i), duration)});
    }
}

void Campaign::eject()
{
    rounds_.clear();
    notes_.clear();
}

PreparedCampaign Campaign::prepare() const
{
    PreparedCampaign prepared;
    prepared.warnings = notes_;
    for (std::size_t r = 0; r < rounds_.size(); ++r)
    {
        FaultRound round;
        round.source_index = static_cast<int>(r);
        for (std::size_t f = 0; f < rounds_[r].size(); ++f)
        {
            Fault fault = rounds_[r][f];
            const SiteCheck check = validate_site(net_, fault);
            if (!check)
            {
                prepared.dropped.push_back({static_cast<int>(r),
                        static_cast<int>(f), describe(fault), check.reason});
                prepared.warnings.push_back("round " + std::to_string(r) +
                        ", fault " + std::to_string(f) + " dropped (" +
                        check.reason + "): " + to_string(describe(fault)));
                continue;
            }
            if (fault.random)
            {
                const std::uint64_t seed = fault.random->seed.value_or(
                        derived_seed(options_.rng_seed, static_cast<int>(r),
                                static_cast<int>(f)));
                auto sites = assign_random_sites(net_, fault.model.target(),
                        fault.random->layer, fault.random->count, seed);
                fault.sites.insert(fault.sites.end(), sites.begin(), sites.end());
                fault.random.reset();
            }
            round.faults.push_back(std::move(fault));
        }
        if (round.faults.empty())
        {
            prepared.warnings.push_back("round " + std::to_string(r) +
                    " has no valid faults and was skipped");
            continue;
        }
        std::stable_sort(round.faults.begin(), round.faults.end(),
                [](const Fault &a, const Fault &b) {
                    return min_layer(a) < min_layer(b);
                });
        round.l_left = min_layer(round.faults.front());
        round.l_right = round.l_left;
        for (const Fault &fault : round.faults)
        {
            for (const auto &site : fault.sites)
            {
                round.l_right = std::max(round.l_right, site_layer(site));
            }
        }
        round.hard_neuron_only_leftmost = std::all_of(round.faults.begin(),
                round.faults.end(), [&](const Fault &fault) {
                    const bool touches_left = std::any_of(fault.sites.begin(),
                            fault.sites.end(), [&](const FaultSite &site) {
                                return site_layer(site) == round.l_left;
                            });
                    return !touches_left || fault.model.is_hard_neuron();
                });
        prepared.rounds.push_back(std::move(round));
    }
    if (options_.early_stop && options_.early_stop_tolerance > 0.0)
    {
        prepared.warnings.push_back(
                "early stop tolerance > 0 may label critical fault rounds as "
                "benign");
    }
    return prepared;
}

CampaignResults Campaign::run(std::span<const Sample> dataset) const
{
    return run_campaign(net_, prepare(), dataset, options_);
}

} // namespace srmfi

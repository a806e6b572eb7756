// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>

#include "fixtures.hpp"
#include "oracle.hpp"
#include "srmfi/campaign.hpp"
#include "srmfi/campaign_file.hpp"
#include "srmfi/error.hpp"
#include "srmfi/events.hpp"
#include "srmfi/model_file.hpp"
#include "srmfi/quantizer.hpp"
#include "srmfi/results_file.hpp"
#include "srmfi/srm.hpp"

using namespace srmfi;
namespace fs = std::filesystem;

namespace {

struct Verdict
{
    bool pass = true;
    std::string detail;
};

using Clock = std::chrono::steady_clock;

int failures = 0;

void criterion(const std::string &name, double time_limit_s, const std::function<Verdict()> &body)
{
    const auto start = Clock::now();
    Verdict v;
    try
    {
        v = body();
    }
    catch (const std::exception &e)
    {
        v = {false, std::string("exception: ") + e.what()};
    }
    const double seconds = std::chrono::duration<double>(Clock::now() - start).count();
    std::ostringstream line;
    line.precision(2);
    line << std::fixed << seconds << " s";
    if (time_limit_s > 0 && seconds >= time_limit_s)
    {
        v.pass = false;
        line << " over the " << time_limit_s << " s limit";
    }
    failures += v.pass ? 0 : 1;
    std::printf("%s  %-32s %s [%s]\n", v.pass ? "PASS" : "FAIL", name.c_str(), v.detail.c_str(),
            line.str().c_str());
    std::fflush(stdout);
}

std::string label_name(RoundLabel label)
{
    return label == RoundLabel::critical ? "critical" : "benign";
}

std::string read_file(const fs::path &path)
{
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

std::string fmt(double v)
{
    std::ostringstream s;
    s.precision(3);
    s << v;
    return s.str();
}

Verdict oracle_equivalence()
{
    fixtures::Rng rng(20240501);
    double worst = 0.0;
    std::size_t layers = 0;
    int spike_mismatches = 0;
    int ties = 0;
    for (int trial = 0; trial < 50; ++trial)
    {
        const Network net = fixtures::random_small_net(rng, 200);
        SpikeRecord input = fixtures::random_spikes(
                rng, net.input_shape().size(), 200, fixtures::uniform(rng, 0.05, 0.3));
        for (const LayerSpec &layer : net.layers)
        {
            const LayerActivity act = simulate_layer_neurons(layer, input, net.clock);
            const oracle::LayerTrace ref = oracle::simulate(layer, input, net.clock, &act.spikes);
            for (std::size_t k = 0; k < act.membrane.data().size(); ++k)
            {
                worst = std::max(worst, std::abs(act.membrane.data()[k] - ref.membrane.data()[k]));
            }
            spike_mismatches += act.spikes == ref.spikes ? 0 : 1;
            ties += ref.ties;
            input = act.spikes;
            ++layers;
        }
    }
    return {worst <= 1e-9 && spike_mismatches == 0,
            "50 nets, " + std::to_string(layers) + " layers, max |du| = " + fmt(worst) +
                    ", spike mismatches " + std::to_string(spike_mismatches) + ", near-ties " +
                    std::to_string(ties)};
}

Verdict optimization_soundness()
{
    fixtures::Rng rng(77);
    int mismatches = 0;
    std::size_t rounds = 0;
    for (int c = 0; c < 20; ++c)
    {
        const Network net = fixtures::random_classifier(rng, 40);
        const auto samples = fixtures::random_samples(rng, net, 12);
        Campaign campaign(net);
        const int n = fixtures::uniform_int(rng, 10, 30);
        for (int r = 0; r < n; ++r)
        {
            std::vector<Fault> faults;
            for (int f = fixtures::uniform_int(rng, 1, 3); f > 0; --f)
            {
                faults.push_back(fixtures::random_fault(rng, net));
            }
            campaign.then_inject(std::move(faults));
        }
        const PreparedCampaign prepared = campaign.prepare();
        rounds += prepared.rounds.size();
        std::optional<CampaignResults> reference;
        for (int combo = 0; combo < 16; ++combo)
        {
            CampaignOptions o;
            o.early_stop_tolerance = 0.0;
            o.late_start = (combo & 1) != 0;
            o.early_stop = (combo & 2) != 0;
            o.batch_size = (combo & 4) != 0 ? 8 : 1;
            o.parallel = (combo & 8) != 0;
            o.threads = 4;
            const CampaignResults r = run_campaign(net, prepared, samples, o);
            if (!reference)
            {
                reference = r;
                continue;
            }
            for (std::size_t k = 0; k < r.rounds.size(); ++k)
            {
                if (r.rounds[k].predictions != reference->rounds[k].predictions ||
                        r.rounds[k].accuracy != reference->rounds[k].accuracy)
                {
                    ++mismatches;
                }
            }
        }
    }
    return {mismatches == 0, "20 campaigns, " + std::to_string(rounds) + " rounds x 16 option sets, " +
                    std::to_string(mismatches) + " mismatches"};
}

Verdict late_start_bound()
{
    const Network net = fixtures::dense_chain(5, 6, 40);
    fixtures::Rng rng(5);
    const auto samples = fixtures::random_samples(rng, net, 8, 0.3);
    const auto n = static_cast<std::int64_t>(samples.size());
    bool pass = true;
    std::string detail = "evaluations per sample for l=1..5:";
    for (int l = 1; l <= 5; ++l)
    {
        std::int64_t worst = 0;
        for (const bool early : {false, true})
        {
            CampaignOptions o;
            o.early_stop = early;
            Campaign campaign(net, o);
            campaign.inject(Fault::at(FaultModel::dead_neuron(), NeuronSite{l - 1, {0, 0, 0}}));
            const CampaignResults r = campaign.run(samples);
            worst = std::max(worst, r.rounds[0].counters.layer_evaluations);
        }
        const double per_sample = static_cast<double>(worst) / static_cast<double>(n);
        pass = pass && worst <= n * (5 - l);
        detail += " " + fmt(per_sample);
    }
    return {pass, detail};
}

Verdict saturated_and_dead_outputs()
{
    const fixtures::TenClassTask task = fixtures::ten_class_task();
    const GoldenCache golden = golden_run(task.net, task.samples);
    int correct = 0;
    for (std::size_t i = 0; i < task.samples.size(); ++i)
    {
        correct += golden.predictions[i] == task.samples[i].label;
    }
    const double golden_acc = static_cast<double>(correct) / static_cast<double>(task.samples.size());
    bool pass = golden_acc == 1.0;
    std::string bad;
    for (int k = 0; k < 10; ++k)
    {
        Campaign campaign(task.net);
        campaign.inject(Fault::at(FaultModel::saturated_neuron(), NeuronSite{0, {k, 0, 0}}));
        campaign.then_inject({Fault::at(FaultModel::dead_neuron(), NeuronSite{0, {k, 0, 0}})});
        const CampaignResults r = campaign.run(task.samples);
        const bool sat_ok = r.rounds[0].accuracy == 0.1 &&
                r.rounds[0].predictions == std::vector<int>(task.samples.size(), k);
        const bool dead_ok = r.rounds[1].accuracy == 0.9;
        if (!sat_ok || !dead_ok)
        {
            pass = false;
            bad += " k=" + std::to_string(k) + "(" + fmt(r.rounds[0].accuracy) + "/" +
                    fmt(r.rounds[1].accuracy) + ")";
        }
    }
    return {pass, "golden " + fmt(golden_acc) + ", saturated 0.1 and dead 0.9 for k=0..9" +
                    (bad.empty() ? "" : ", failing:" + bad)};
}

Verdict transient_equals_permanent()
{
    fixtures::Rng rng(31);
    int mismatches = 0;
    int tested = 0;
    while (tested < 100)
    {
        const Network net = fixtures::random_classifier(rng, 30);
        const auto samples = fixtures::random_samples(rng, net, 4);
        for (int f = 0; f < 10; ++f, ++tested)
        {
            Fault permanent = fixtures::random_fault(rng, net);
            permanent.duration = FaultDuration::permanent();
            Fault transient = permanent;
            transient.duration = FaultDuration::window(1, net.clock.num_steps);
            for (const bool optimized : {true, false})
            {
                CampaignOptions o;
                o.save_outputs = true;
                o.late_start = optimized;
                o.early_stop = optimized;
                Campaign campaign(net, o);
                campaign.inject(permanent);
                campaign.then_inject({transient});
                const CampaignResults r = campaign.run(samples);
                if (r.rounds[0].outputs != r.rounds[1].outputs ||
                        r.rounds[0].predictions != r.rounds[1].predictions)
                {
                    ++mismatches;
                }
            }
        }
    }
    return {mismatches == 0, std::to_string(tested) + " faults, " + std::to_string(mismatches) +
                    " output mismatches"};
}

Verdict bitflip_ordering()
{
    fixtures::Rng rng(8);
    const double w_min = -0.8;
    const double w_max = 1.3;
    const Quantizer q(8, w_min, w_max);
    const auto perm = FaultDuration::permanent();
    std::vector<double> mean(8, 0.0);
    int code_restored = 0;
    int value_restored = 0;
    int grid_restored = 0;
    constexpr int kWeights = 1000;
    for (int i = 0; i < kWeights; ++i)
    {
        const double w = fixtures::uniform(rng, w_min, w_max);
        const double grid = q.dequantize(static_cast<std::uint64_t>(fixtures::uniform_int(rng, 0, 255)));
        bool all_code = true;
        bool all_value = true;
        bool all_grid = true;
        for (int b = 0; b < 8; ++b)
        {
            const FaultModel flip = FaultModel::bitflip_synapse({b});
            const double once = faulty_weight(flip, w, &q, 1, perm);
            mean[static_cast<std::size_t>(b)] += std::abs(once - w) / kWeights;
            const double twice = faulty_weight(flip, once, &q, 1, perm);
            all_code = all_code && q.quantize(twice) == q.quantize(w);
            all_value = all_value && twice == q.dequantize(q.quantize(w));
            const double g = faulty_weight(flip, faulty_weight(flip, grid, &q, 1, perm), &q, 1, perm);
            all_grid = all_grid && g == grid;
        }
        code_restored += all_code;
        value_restored += all_value;
        grid_restored += all_grid;
    }
    bool increasing = true;
    std::string detail = "mean |dw| by bit:";
    for (int b = 0; b < 8; ++b)
    {
        detail += " " + fmt(mean[static_cast<std::size_t>(b)]);
        if (b > 0 && !(mean[static_cast<std::size_t>(b)] > mean[static_cast<std::size_t>(b - 1)]))
        {
            increasing = false;
        }
    }
    detail += "; double flip restores code " + std::to_string(code_restored) + "/1000, Q^-1(Q(w)) " +
            std::to_string(value_restored) + "/1000, grid weights " + std::to_string(grid_restored) +
            "/1000";
    return {increasing && code_restored == kWeights && value_restored == kWeights &&
                    grid_restored == kWeights,
            detail};
}

// Two mirrored relay paths feed two output neurons; one sample whose outputs tie,
// so the lower class wins. Dropping a single hidden spike on the class-0 path
// hands the decision to class 1.
Verdict early_stop_hazard()
{
    constexpr int kSteps = 80;
    Network net;
    net.clock = {1.0, kSteps};
    net.num_classes = 2;
    const NeuronParams params{4.0, 4.0, 1.0, 0.0};
    LayerSpec hidden = LayerSpec::dense("hidden", {2, 1, 1}, 2, params);
    hidden.weights = {1.5, 0.0, 0.0, 1.5};
    LayerSpec out = LayerSpec::dense("out", {2, 1, 1}, 2, params);
    out.weights = {1.5, 0.0, 0.0, 1.5};
    net.layers = {hidden, out};
    net.validate();

    SpikeRecord input(2, kSteps);
    for (const std::size_t j : {5u, 25u, 45u})
    {
        input.at(0, j) = 1.0;
        input.at(1, j) = 1.0;
    }
    const std::vector<Sample> samples{{input, 0}};
    const GoldenCache golden = golden_run(net, samples);
    const SpikeRecord &h = golden.layers[0][0];
    const SpikeRecord &o = golden.layers[0][1];
    int second = -1;
    int seen = 0;
    for (std::size_t j = 0; j < h.steps(); ++j)
    {
        if (h.at(0, j) != 0.0 && ++seen == 2)
        {
            second = static_cast<int>(j);
        }
    }
    if (second < 0 || o.row_sum(0) != o.row_sum(1) || golden.predictions[0] != 0)
    {
        return {false, "fixture does not have tied outputs"};
    }
    // Column j holds timestamp j + 1.
    const Fault drop = Fault::at(FaultModel::dead_neuron(), NeuronSite{0, {0, 0, 0}},
            FaultDuration::window(second + 1, second + 1));

    auto run = [&](double tol) {
        CampaignOptions opt;
        opt.early_stop_tolerance = tol;
        Campaign campaign(net, opt);
        campaign.inject(drop);
        return campaign.run(samples).rounds[0];
    };
    CampaignOptions full;
    full.early_stop = false;
    full.late_start = false;
    full.save_outputs = true;
    Campaign reference(net, full);
    reference.inject(drop);
    const RoundResult truth = reference.run(samples).rounds[0];
    const RoundResult strict = run(0.0);
    const RoundResult loose = run(1.0);
    const bool pass = truth.predictions[0] == 1 && strict.label == RoundLabel::critical &&
            strict.predictions[0] == 1 && loose.label == RoundLabel::benign &&
            loose.predictions[0] == 0 && loose.counters.early_stops == 1;
    return {pass, std::string("1-spike hidden difference flips 0 -> ") +
                    std::to_string(truth.predictions[0]) + "; tol=0 " +
                    label_name(strict.label) + ", tol=1 " +
                    label_name(loose.label)};
}

Verdict complete_cardinality()
{
    fixtures::Rng rng(3);
    const Network net = fixtures::random_classifier(rng, 20, 10);
    const FaultModel neuron_models[] = {FaultModel::dead_neuron(), FaultModel::saturated_neuron(),
            FaultModel::stuck_at(0.5), FaultModel::param_scale(NeuronParam::theta, 0.5)};
    const FaultModel synapse_models[] = {FaultModel::dead_synapse(), FaultModel::saturated_synapse(2.0),
            FaultModel::perturbed_synapse(1.2), FaultModel::bitflip_synapse({7})};
    int checks = 0;
    int wrong = 0;
    for (int l = 0; l < static_cast<int>(net.size()); ++l)
    {
        const LayerSpec &layer = net.layers[static_cast<std::size_t>(l)];
        if (!layer.has_neurons())
        {
            continue;
        }
        auto check = [&](const FaultModel &model, std::size_t expected) {
            Campaign campaign(net);
            campaign.inject_complete(model, l);
            const PreparedCampaign prepared = campaign.prepare();
            ++checks;
            wrong += campaign.rounds().size() == expected && prepared.rounds.size() == expected &&
                            prepared.dropped.empty()
                    ? 0
                    : 1;
        };
        for (const FaultModel &m : neuron_models)
        {
            check(m, layer.output_shape.size());
        }
        for (const FaultModel &m : synapse_models)
        {
            check(m, layer.weights.size());
        }
    }
    return {wrong == 0, std::to_string(checks) + " layer/model pairs, " + std::to_string(wrong) +
                    " with the wrong round count"};
}

template <class Parse>
void fuzz(fixtures::Rng &rng, const std::string &seed_text, int iterations, int &structured,
        int &unexpected, Parse parse)
{
    const std::string alphabet = "{}[]\":,0123456789-.eE truefalsn\n#abc";
    for (int i = 0; i < iterations; ++i)
    {
        std::string s = seed_text;
        if (i % 5 == 0)
        {
            s.assign(static_cast<std::size_t>(fixtures::uniform_int(rng, 0, 80)), '\0');
            for (char &c : s)
            {
                c = static_cast<char>(fixtures::uniform_int(rng, 0, 255));
            }
        }
        else
        {
            for (int k = fixtures::uniform_int(rng, 1, 6); k > 0 && !s.empty(); --k)
            {
                const auto pos = static_cast<std::size_t>(
                        fixtures::uniform_int(rng, 0, static_cast<int>(s.size()) - 1));
                switch (fixtures::uniform_int(rng, 0, 3))
                {
                case 0: s.erase(pos, static_cast<std::size_t>(fixtures::uniform_int(rng, 1, 8))); break;
                case 1:
                    s[pos] = alphabet[static_cast<std::size_t>(
                            fixtures::uniform_int(rng, 0, static_cast<int>(alphabet.size()) - 1))];
                    break;
                case 2: s.insert(pos, s.substr(pos / 2, 12)); break;
                default: s.resize(pos); break;
                }
            }
        }
        try
        {
            parse(s);
        }
        catch (const Error &)
        {
            ++structured;
        }
        catch (...)
        {
            ++unexpected;
        }
    }
}

Verdict file_round_trips()
{
    const fs::path dir = fixtures::scratch_dir("acceptance-files");
    fixtures::Rng rng(99);
    int net_ok = 0;
    int config_ok = 0;
    int results_ok = 0;
    constexpr int kTrials = 10;
    for (int t = 0; t < kTrials; ++t)
    {
        Network net = t % 2 == 0 ? fixtures::random_classifier(rng, 25)
                                 : fixtures::random_small_net(rng, 25);
        net.layers[0].quant_range = WeightRange{-1.0 / 3.0, 2.0 / 7.0};
        save_network(net, dir / "net.json");
        const Network back = load_network(dir / "net.json");
        bool same = back.size() == net.size() && back.clock.period_ms == net.clock.period_ms &&
                back.clock.num_steps == net.clock.num_steps && back.num_classes == net.num_classes;
        for (std::size_t l = 0; same && l < net.size(); ++l)
        {
            const LayerSpec &a = net.layers[l];
            const LayerSpec &b = back.layers[l];
            same = a.name == b.name && a.kind == b.kind && a.weights == b.weights &&
                    a.input_shape.str() == b.input_shape.str() &&
                    a.output_shape.str() == b.output_shape.str() &&
                    a.params.has_value() == b.params.has_value() &&
                    (!a.params || (a.params->tau_s == b.params->tau_s &&
                                          a.params->tau_ref == b.params->tau_ref &&
                                          a.params->theta == b.params->theta &&
                                          a.params->u_rest == b.params->u_rest)) &&
                    a.quant_range.has_value() == b.quant_range.has_value() &&
                    (!a.quant_range || (a.quant_range->min == b.quant_range->min &&
                                               a.quant_range->max == b.quant_range->max));
        }
        net_ok += same;

        CampaignSpec spec;
        spec.model = "net.json";
        spec.dataset = "set.txt";
        spec.options.early_stop_tolerance = 0.1 + 0.2;
        spec.options.rng_seed = rng();
        spec.options.misprediction_tolerance = 1.0 / 3.0;
        for (int r = 0; r < 6; ++r)
        {
            spec.rounds.push_back({describe(fixtures::random_fault(rng, net)),
                    describe(fixtures::random_fault(rng, net))});
        }
        spec.complete.push_back({"perturbed_synapse", {{"rho", 1.0 / 7.0}}, 0, FaultDuration::window(2, 9)});
        save_campaign_spec(spec, dir / "config.json");
        config_ok += parse_campaign_spec(read_file(dir / "config.json"), net) == spec;

        const auto samples = fixtures::random_samples(rng, net, 3);
        CampaignOptions o;
        o.save_outputs = true;
        Campaign campaign(net, o);
        for (const auto &round : spec.rounds)
        {
            std::vector<Fault> faults;
            for (const FaultDescriptor &d : round)
            {
                faults.push_back(materialize(d, FaultModelRegistry::with_builtins()));
            }
            campaign.then_inject(std::move(faults));
        }
        CampaignResults results = campaign.run(samples);
        results.runtime_seconds = 1.0 / 3.0;
        export_results(results, dir / "results.json");
        results_ok += import_results(dir / "results.json") == results;
    }

    int structured = 0;
    int unexpected = 0;
    fixtures::Rng frng(7);
    const Network net = fixtures::random_classifier(frng, 12);
    const EncodedNetwork enc = encode_network(net, "w.bin");
    fuzz(frng, enc.header, 4000, structured, unexpected,
            [&](const std::string &s) { decode_network(s, enc.blob); });
    fuzz(frng, std::string(enc.blob.begin(), enc.blob.end()), 1000, structured, unexpected,
            [&](const std::string &s) {
                decode_network(enc.header, {reinterpret_cast<const std::uint8_t *>(s.data()), s.size()});
            });
    fuzz(frng, read_file(dir / "config.json"), 4000, structured, unexpected,
            [&](const std::string &s) { parse_campaign_spec(s, net); });
    fuzz(frng, read_file(dir / "results.json"), 4000, structured, unexpected,
            [&](const std::string &s) { parse_results(s); });
    fuzz(frng, "10 1 2 0\n20 3 4 1\n# c\n30 7 7 1\n", 3000, structured, unexpected,
            [&](const std::string &s) { encode_events(parse_text_events(s), {1.0, 10}, {2, 8, 8}); });
    fuzz(frng, "0 a.txt\n1 b.bin\n", 2000, structured, unexpected,
            [&](const std::string &s) { parse_manifest(s, "."); });
    fuzz(frng, std::string(15, '\x11'), 2000, structured, unexpected, [&](const std::string &s) {
        parse_binary_events({reinterpret_cast<const std::uint8_t *>(s.data()), s.size()});
    });

    const bool pass = net_ok == kTrials && config_ok == kTrials && results_ok == kTrials &&
            unexpected == 0;
    return {pass, "exact round trips: network " + std::to_string(net_ok) + "/10, config " +
                    std::to_string(config_ok) + "/10, results " + std::to_string(results_ok) +
                    "/10; fuzz: 20000 inputs, " + std::to_string(structured) + " rejected, " +
                    std::to_string(unexpected) + " unexpected exceptions"};
}

} // namespace

int main()
{
    criterion("srm-oracle-equivalence", 60.0, oracle_equivalence);
    criterion("optimization-soundness", 300.0, optimization_soundness);
    criterion("late-start-work-bound", 0, late_start_bound);
    criterion("saturated-dead-output", 0, saturated_and_dead_outputs);
    criterion("transient-equals-permanent", 0, transient_equals_permanent);
    criterion("bitflip-severity-ordering", 0, bitflip_ordering);
    criterion("early-stop-tolerance-hazard", 0, early_stop_hazard);
    criterion("complete-cardinality", 0, complete_cardinality);
    criterion("file-round-trips", 0, file_round_trips);
    std::printf("%d criteria failed\n", failures);
    return failures == 0 ? 0 : 1;
}

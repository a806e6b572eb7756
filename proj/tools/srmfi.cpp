#include <chrono>
#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "srmfi/campaign.hpp"
#include "srmfi/campaign_file.hpp"
#include "srmfi/error.hpp"
#include "srmfi/events.hpp"
#include "srmfi/model_file.hpp"
#include "srmfi/results_file.hpp"

using namespace srmfi;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitDropped = 2;

struct OptionFlags
{
    std::optional<bool> late_start;
    std::optional<bool> early_stop;
    std::optional<double> tol;
    std::optional<int> batch_size;
    std::optional<bool> parallel;
    std::optional<int> threads;
    std::optional<double> misprediction_tolerance;
    std::optional<bool> save_outputs;
    std::optional<std::uint64_t> seed;

    void add_to(CLI::App &app)
    {
        app.add_flag("--late-start,!--no-late-start", late_start,
                "Reuse golden outputs before the leftmost faulty layer");
        app.add_flag("--early-stop,!--no-early-stop", early_stop,
                "Stop a round when the rightmost faulty layer matches golden");
        app.add_option("--tol", tol, "Early stop tolerance on ||B||_1")
                ->check(CLI::NonNegativeNumber);
        app.add_option("--batch-size", batch_size)->check(CLI::PositiveNumber);
        app.add_flag("--parallel,!--no-parallel", parallel,
                "Evaluate samples of a batch concurrently");
        app.add_option("--threads", threads, "Worker threads (0: all cores)")
                ->check(CLI::NonNegativeNumber);
        app.add_option("--misprediction-tolerance", misprediction_tolerance)
                ->check(CLI::NonNegativeNumber);
        app.add_flag("--save-outputs,!--no-save-outputs", save_outputs,
                "Store each round's output spike matrices");
        app.add_option("--seed", seed, "Seed for random fault sites");
    }

    void apply(CampaignOptions &o) const
    {
        if (late_start) o.late_start = *late_start;
        if (early_stop) o.early_stop = *early_stop;
        if (tol) o.early_stop_tolerance = *tol;
        if (batch_size) o.batch_size = *batch_size;
        if (parallel) o.parallel = *parallel;
        if (threads) o.threads = *threads;
        if (misprediction_tolerance) o.misprediction_tolerance = *misprediction_tolerance;
        if (save_outputs) o.save_outputs = *save_outputs;
        if (seed) o.rng_seed = *seed;
    }
};

bool is_drop_warning(const std::string &w)
{
    return w.rfind("early stop tolerance", 0) != 0;
}

int report_preparation(const PreparedCampaign &prepared)
{
    bool dropped = !prepared.dropped.empty();
    for (const std::string &w : prepared.warnings)
    {
        std::cerr << "warning: " << w << '\n';
        dropped = dropped || is_drop_warning(w);
    }
    return dropped ? kExitDropped : kExitOk;
}

std::vector<Sample> load_samples(const std::filesystem::path &manifest, const Network &net)
{
    if (manifest.empty())
    {
        throw ConfigError("no dataset given");
    }
    return load_dataset(manifest, net.clock, net.input_shape());
}

std::string percent(double accuracy)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f%%", accuracy * 100.0);
    return buf;
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Fault injection campaigns for spiking neural networks"};
    app.require_subcommand(1);

    std::string config_path;
    std::string model_path;
    std::string dataset_path;
    std::string out_path;
    OptionFlags flags;

    auto *golden = app.add_subcommand("golden", "Fault-free accuracy of a model");
    golden->add_option("--model", model_path, "Network header file")->required();
    golden->add_option("--dataset", dataset_path, "Dataset manifest")->required();
    golden->add_option("--threads", flags.threads)->check(CLI::NonNegativeNumber);

    auto *run = app.add_subcommand("run", "Run a campaign and export its results");
    run->add_option("config", config_path, "Campaign config file")->required();
    run->add_option("-o,--out", out_path, "Results file")->required();
    run->add_option("--dataset", dataset_path, "Override the config's dataset");
    flags.add_to(*run);

    std::string layer_ref;
    std::string fault_model;
    std::string params_text = "{}";
    std::optional<int> t1;
    std::optional<int> t2;
    auto *complete = app.add_subcommand(
            "complete", "Write a config with one round per element of a layer");
    complete->add_option("--model", model_path, "Network header file")->required();
    complete->add_option("--dataset", dataset_path, "Dataset manifest to record");
    complete->add_option("--layer", layer_ref, "Layer name or index")->required();
    complete->add_option("--fault", fault_model, "Fault model name")->required();
    complete->add_option("--params", params_text, "Fault model parameters (JSON)");
    complete->add_option("--t1", t1, "First active timestamp of a transient fault");
    complete->add_option("--t2", t2, "Last active timestamp of a transient fault");
    complete->add_option("-o,--out", out_path, "Config file to write")->required();
    flags.add_to(*complete);

    auto *plots = app.add_subcommand("export-plots", "Flatten results into a CSV table");
    plots->add_option("results", config_path, "Results file")->required();
    plots->add_option("-o,--out", out_path, "CSV file")->required();

    auto *validate = app.add_subcommand(
            "validate", "Check a campaign config and show the prepared rounds");
    validate->add_option("config", config_path, "Campaign config file")->required();
    flags.add_to(*validate);

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::ParseError &e)
    {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitError;
    }

    try
    {
        if (golden->parsed())
        {
            const Network net = load_network(model_path);
            const auto samples = load_samples(dataset_path, net);
            if (samples.empty())
            {
                throw ConfigError("dataset is empty");
            }
            const GoldenCache cache = golden_run(net, samples, flags.threads.value_or(1));
            std::size_t correct = 0;
            for (std::size_t i = 0; i < samples.size(); ++i)
            {
                correct += cache.predictions[i] == samples[i].label;
            }
            std::cout << "golden accuracy " << percent(static_cast<double>(correct) /
                                                            samples.size())
                      << " (" << correct << "/" << samples.size() << ")\n";
            return kExitOk;
        }
        if (run->parsed() || validate->parsed())
        {
            LoadedCampaign loaded = parse_campaign(config_path);
            flags.apply(loaded.campaign.options());
            loaded.campaign.options().validate();
            const PreparedCampaign prepared = loaded.campaign.prepare();
            const int status = report_preparation(prepared);
            if (validate->parsed())
            {
                std::cout << prepared.rounds.size() << " rounds, "
                          << prepared.dropped.size() << " dropped faults\n";
                for (const FaultRound &round : prepared.rounds)
                {
                    std::cout << "round " << round.source_index << ": "
                              << round.faults.size() << " faults, layers "
                              << round.l_left << ".." << round.l_right << '\n';
                }
                return status;
            }
            const std::filesystem::path dataset =
                    dataset_path.empty() ? loaded.dataset : std::filesystem::path(dataset_path);
            const auto samples = load_samples(dataset, loaded.network);
            const CampaignResults results = run_campaign(
                    loaded.network, prepared, samples, loaded.campaign.options());
            export_results(results, out_path);
            std::size_t critical = 0;
            for (const RoundResult &r : results.rounds)
            {
                critical += r.label == RoundLabel::critical;
            }
            std::cout << "golden accuracy " << percent(results.golden_accuracy) << ", "
                      << results.rounds.size() << " rounds, " << critical
                      << " critical\n";
            return status;
        }
        if (complete->parsed())
        {
            const Network net = load_network(model_path);
            CampaignSpec spec;
            spec.model = std::filesystem::path(model_path).filename().string();
            if (!dataset_path.empty())
            {
                spec.dataset = dataset_path;
            }
            flags.apply(spec.options);
            spec.options.validate();
            CompleteRequest req;
            req.model = fault_model;
            try
            {
                req.params = nlohmann::json::parse(params_text);
            }
            catch (const nlohmann::json::exception &)
            {
                throw ConfigError("--params is not valid JSON");
            }
            (void)FaultModelRegistry::with_builtins().make(req.model, req.params);
            if (const auto index = net.find_layer(layer_ref))
            {
                req.layer = *index;
            }
            else
            {
                try
                {
                    std::size_t used = 0;
                    req.layer = std::stoi(layer_ref, &used);
                    if (used != layer_ref.size())
                    {
                        throw std::invalid_argument("layer");
                    }
                }
                catch (const std::logic_error &)
                {
                    throw ConfigError("no layer named '" + layer_ref + "'");
                }
            }
            if (t1 || t2)
            {
                if (!t1 || !t2)
                {
                    throw ConfigError("--t1 and --t2 go together");
                }
                req.duration = FaultDuration::window(*t1, *t2);
            }
            spec.complete.push_back(req);
            const Campaign campaign = build_campaign(spec, net);
            save_campaign_spec(spec, out_path);
            std::cout << campaign.rounds().size() << " rounds written to " << out_path
                      << '\n';
            return campaign.rounds().empty() ? kExitDropped : kExitOk;
        }
        if (plots->parsed())
        {
            write_plot_table(import_results(config_path), out_path);
            return kExitOk;
        }
    }
    catch (const std::exception &e)
    {
        std::cerr << "error: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}

#include "srmfi/campaign_file.hpp"

#include "file_util.hpp"
#include "serialize.hpp"
#include "srmfi/error.hpp"
#include "srmfi/model_file.hpp"

namespace srmfi {

using namespace detail;

namespace {

constexpr std::string_view kFormat = "srmfi-campaign";

LayerResolver name_resolver(const Network &net)
{
    return [&net](const json &ref, const std::string &path) -> int {
        if (ref.is_string())
        {
            const auto index = net.find_layer(ref.get<std::string>());
            return index ? static_cast<int>(*index) : -1;
        }
        return as_int32(ref, path);
    };
}

void check_model(const FaultModelRegistry &registry, const std::string &name,
        const json &params, const std::string &path)
{
    try
    {
        (void)registry.make(name, params);
    }
    catch (const ConfigError &e)
    {
        fail(path, e.what());
    }
}

} // namespace

CampaignSpec parse_campaign_spec(std::string_view text, const Network &net,
        const FaultModelRegistry &registry)
{
    const json doc = parse_json(text, "campaign config");
    check_header(doc, kFormat, kCampaignFormatVersion);
    check_keys(doc, "",
            {"format", "format_version", "model", "dataset", "options", "rounds",
                    "complete"});
    const LayerResolver layer = name_resolver(net);

    CampaignSpec spec;
    spec.model = as_string(member(doc, "model", ""), "/model");
    if (const json *d = find(doc, "dataset"))
    {
        spec.dataset = as_string(*d, "/dataset");
    }
    if (const json *o = find(doc, "options"))
    {
        spec.options = options_from_json(*o, "/options");
    }
    if (const json *rounds = find(doc, "rounds"))
    {
        expect_array(*rounds, "/rounds");
        for (std::size_t r = 0; r < rounds->size(); ++r)
        {
            const std::string rp = child("/rounds", r);
            const json &faults = expect_array((*rounds)[r], rp);
            std::vector<FaultDescriptor> round;
            for (std::size_t f = 0; f < faults.size(); ++f)
            {
                const std::string fp = child(rp, f);
                FaultDescriptor fault = fault_from_json(faults[f], fp, layer);
                check_model(registry, fault.model, fault.params, child(fp, "model"));
                round.push_back(std::move(fault));
            }
            spec.rounds.push_back(std::move(round));
        }
    }
    if (const json *complete = find(doc, "complete"))
    {
        expect_array(*complete, "/complete");
        for (std::size_t i = 0; i < complete->size(); ++i)
        {
            const std::string cp = child("/complete", i);
            const json &c = expect_object((*complete)[i], cp);
            check_keys(c, cp, {"model", "params", "layer", "duration"});
            CompleteRequest req;
            req.model = as_string(member(c, "model", cp), child(cp, "model"));
            if (const json *p = find(c, "params"))
            {
                req.params = expect_object(*p, child(cp, "params"));
            }
            req.layer = layer(member(c, "layer", cp), child(cp, "layer"));
            if (const json *d = find(c, "duration"))
            {
                req.duration = duration_from_json(*d, child(cp, "duration"));
            }
            check_model(registry, req.model, req.params, child(cp, "model"));
            spec.complete.push_back(std::move(req));
        }
    }
    return spec;
}

std::string format_campaign_spec(const CampaignSpec &spec)
{
    json doc;
    doc["format"] = kFormat;
    doc["format_version"] = kCampaignFormatVersion;
    doc["model"] = spec.model;
    doc["dataset"] = spec.dataset;
    doc["options"] = options_to_json(spec.options);
    json rounds = json::array();
    for (const auto &round : spec.rounds)
    {
        json faults = json::array();
        for (const FaultDescriptor &f : round)
        {
            faults.push_back(fault_to_json(f));
        }
        rounds.push_back(std::move(faults));
    }
    doc["rounds"] = std::move(rounds);
    json complete = json::array();
    for (const CompleteRequest &c : spec.complete)
    {
        complete.push_back({{"model", c.model}, {"params", c.params},
                {"layer", c.layer}, {"duration", duration_to_json(c.duration)}});
    }
    doc["complete"] = std::move(complete);
    return doc.dump(2) + "\n";
}

void save_campaign_spec(const CampaignSpec &spec, const std::filesystem::path &path)
{
    write_text(path, format_campaign_spec(spec));
}

Campaign build_campaign(const CampaignSpec &spec, Network net,
        const FaultModelRegistry &registry)
{
    Campaign campaign(std::move(net), spec.options);
    for (const auto &round : spec.rounds)
    {
        std::vector<Fault> faults;
        for (const FaultDescriptor &d : round)
        {
            faults.push_back(materialize(d, registry));
        }
        campaign.then_inject(std::move(faults));
    }
    for (const CompleteRequest &c : spec.complete)
    {
        campaign.inject_complete(registry.make(c.model, c.params), c.layer, c.duration);
    }
    return campaign;
}

LoadedCampaign parse_campaign(
        const std::filesystem::path &path, const FaultModelRegistry &registry)
{
    const std::string text = read_text(path);
    const auto base = path.parent_path();
    // The model path is needed to resolve layer names in the rest of the file.
    std::string model_path;
    {
        const json doc = parse_json(text, "campaign config");
        check_header(doc, kFormat, kCampaignFormatVersion);
        model_path = as_string(member(doc, "model", ""), "/model");
    }
    Network net = load_network(base / model_path);
    CampaignSpec spec = parse_campaign_spec(text, net, registry);
    Campaign campaign = build_campaign(spec, net, registry);
    std::filesystem::path dataset;
    if (!spec.dataset.empty())
    {
        dataset = base / spec.dataset;
    }
    return {std::move(spec), std::move(net), std::move(campaign), std::move(dataset)};
}

} // namespace srmfi

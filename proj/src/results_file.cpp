#include "srmfi/results_file.hpp"

#include <sstream>

#include "file_util.hpp"
#include "serialize.hpp"
#include "srmfi/error.hpp"

namespace srmfi {

using namespace detail;

namespace {

constexpr std::string_view kFormat = "srmfi-results";

json int_array(const std::vector<int> &values)
{
    return json(values);
}

std::vector<int> int_array_from(const json &v, const std::string &path)
{
    expect_array(v, path);
    std::vector<int> out;
    out.reserve(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
    {
        out.push_back(as_int32(v[i], child(path, i)));
    }
    return out;
}

std::vector<std::string> string_array_from(const json &v, const std::string &path)
{
    expect_array(v, path);
    std::vector<std::string> out;
    for (std::size_t i = 0; i < v.size(); ++i)
    {
        out.push_back(as_string(v[i], child(path, i)));
    }
    return out;
}

json matrix_to_json(const SpikeRecord &m)
{
    json runs = json::array();
    for (const auto &[value, run] : run_length_encode(m))
    {
        runs.push_back(json::array({value, run}));
    }
    return {{"rows", m.rows()}, {"steps", m.steps()}, {"rle", std::move(runs)}};
}

SpikeRecord matrix_from_json(const json &v, const std::string &path)
{
    expect_object(v, path);
    const std::uint64_t rows = as_uint64(member(v, "rows", path), child(path, "rows"));
    const std::uint64_t steps =
            as_uint64(member(v, "steps", path), child(path, "steps"));
    if (steps != 0 && rows > (std::uint64_t{1} << 32) / steps)
    {
        fail(path, "matrix too large");
    }
    const std::string rp = child(path, "rle");
    const json &rle = expect_array(member(v, "rle", path), rp);
    std::vector<std::pair<double, std::size_t>> runs;
    runs.reserve(rle.size());
    for (std::size_t i = 0; i < rle.size(); ++i)
    {
        const std::string ip = child(rp, i);
        const json &pair = expect_array(rle[i], ip);
        if (pair.size() != 2)
        {
            fail(ip, "expected [value, run]");
        }
        runs.emplace_back(as_number(pair[0], child(ip, 0)),
                static_cast<std::size_t>(as_uint64(pair[1], child(ip, 1))));
    }
    try
    {
        return run_length_decode(rows, steps, runs);
    }
    catch (const FormatError &e)
    {
        fail(path, e.what());
    }
}

json counters_to_json(const RoundCounters &c)
{
    return {{"layer_evaluations", c.layer_evaluations},
            {"early_stops", c.early_stops}, {"late_starts", c.late_starts},
            {"clamped_weights", c.clamped_weights}};
}

RoundCounters counters_from_json(const json &v, const std::string &path)
{
    expect_object(v, path);
    RoundCounters c;
    c.layer_evaluations = as_int(member(v, "layer_evaluations", path),
            child(path, "layer_evaluations"));
    c.early_stops = as_int(member(v, "early_stops", path), child(path, "early_stops"));
    c.late_starts = as_int(member(v, "late_starts", path), child(path, "late_starts"));
    c.clamped_weights = as_int(member(v, "clamped_weights", path),
            child(path, "clamped_weights"));
    return c;
}

std::string_view label_name(RoundLabel label)
{
    return label == RoundLabel::critical ? "critical" : "benign";
}

RoundLabel label_from_json(const json &v, const std::string &path)
{
    const std::string s = as_string(v, path);
    if (s == "critical")
    {
        return RoundLabel::critical;
    }
    if (s != "benign")
    {
        fail(path, "expected \"benign\" or \"critical\"");
    }
    return RoundLabel::benign;
}

std::string csv_quote(const std::string &s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
    {
        return s;
    }
    std::string out = "\"";
    for (const char ch : s)
    {
        out += ch;
        if (ch == '"')
        {
            out += '"';
        }
    }
    return out + "\"";
}

std::string number(double v)
{
    return json(v).dump();
}

} // namespace

std::vector<std::pair<double, std::size_t>> run_length_encode(const TimeMatrix &m)
{
    std::vector<std::pair<double, std::size_t>> runs;
    for (const double v : m.data())
    {
        if (!runs.empty() && runs.back().first == v)
        {
            ++runs.back().second;
        }
        else
        {
            runs.emplace_back(v, 1);
        }
    }
    return runs;
}

SpikeRecord run_length_decode(std::size_t rows, std::size_t steps,
        const std::vector<std::pair<double, std::size_t>> &runs)
{
    const std::size_t total = rows * steps;
    SpikeRecord out(rows, steps);
    std::size_t pos = 0;
    for (const auto &[value, run] : runs)
    {
        if (run == 0 || run > total - pos)
        {
            throw FormatError("run lengths do not match the matrix size");
        }
        std::fill_n(out.data().begin() + static_cast<std::ptrdiff_t>(pos), run, value);
        pos += run;
    }
    if (pos != total)
    {
        throw FormatError("run lengths do not match the matrix size");
    }
    return out;
}

std::string format_results(const CampaignResults &r)
{
    json doc;
    doc["format"] = kFormat;
    doc["format_version"] = kResultsFormatVersion;
    doc["options"] = options_to_json(r.options);
    doc["num_layers"] = r.num_layers;
    doc["num_classes"] = r.num_classes;
    doc["num_steps"] = r.num_steps;
    doc["labels"] = int_array(r.labels);
    doc["golden_accuracy"] = r.golden_accuracy;
    doc["golden_predictions"] = int_array(r.golden_predictions);
    doc["golden_layer_evaluations"] = r.golden_layer_evaluations;
    doc["runtime_seconds"] = r.runtime_seconds;
    doc["warnings"] = r.warnings;
    json dropped = json::array();
    for (const DroppedFault &d : r.dropped)
    {
        dropped.push_back({{"round", d.round}, {"fault", d.fault},
                {"descriptor", fault_to_json(d.descriptor)}, {"reason", d.reason}});
    }
    doc["dropped"] = std::move(dropped);
    json rounds = json::array();
    for (const RoundResult &round : r.rounds)
    {
        json faults = json::array();
        for (const FaultDescriptor &f : round.faults)
        {
            faults.push_back(fault_to_json(f));
        }
        json outputs = json::array();
        for (const SpikeRecord &o : round.outputs)
        {
            outputs.push_back(matrix_to_json(o));
        }
        rounds.push_back({{"round", round.round}, {"faults", std::move(faults)},
                {"l_left", round.l_left}, {"l_right", round.l_right},
                {"accuracy", round.accuracy}, {"label", label_name(round.label)},
                {"predictions", int_array(round.predictions)},
                {"counters", counters_to_json(round.counters)},
                {"outputs", std::move(outputs)}});
    }
    doc["rounds"] = std::move(rounds);
    return doc.dump(1) + "\n";
}

CampaignResults parse_results(std::string_view text)
{
    const json doc = parse_json(text, "results");
    check_header(doc, kFormat, kResultsFormatVersion);
    CampaignResults r;
    r.options = options_from_json(member(doc, "options", ""), "/options");
    r.num_layers = as_int32(member(doc, "num_layers", ""), "/num_layers");
    r.num_classes = as_int32(member(doc, "num_classes", ""), "/num_classes");
    r.num_steps = as_int32(member(doc, "num_steps", ""), "/num_steps");
    r.labels = int_array_from(member(doc, "labels", ""), "/labels");
    r.golden_accuracy = as_number(member(doc, "golden_accuracy", ""), "/golden_accuracy");
    r.golden_predictions =
            int_array_from(member(doc, "golden_predictions", ""), "/golden_predictions");
    r.golden_layer_evaluations = as_int(member(doc, "golden_layer_evaluations", ""),
            "/golden_layer_evaluations");
    r.runtime_seconds = as_number(member(doc, "runtime_seconds", ""), "/runtime_seconds");
    r.warnings = string_array_from(member(doc, "warnings", ""), "/warnings");

    const json &dropped = expect_array(member(doc, "dropped", ""), "/dropped");
    for (std::size_t i = 0; i < dropped.size(); ++i)
    {
        const std::string p = child("/dropped", i);
        const json &d = expect_object(dropped[i], p);
        r.dropped.push_back({as_int32(member(d, "round", p), child(p, "round")),
                as_int32(member(d, "fault", p), child(p, "fault")),
                fault_from_json(member(d, "descriptor", p), child(p, "descriptor"),
                        integer_layer),
                as_string(member(d, "reason", p), child(p, "reason"))});
    }

    const json &rounds = expect_array(member(doc, "rounds", ""), "/rounds");
    for (std::size_t i = 0; i < rounds.size(); ++i)
    {
        const std::string p = child("/rounds", i);
        const json &v = expect_object(rounds[i], p);
        RoundResult round;
        round.round = as_int32(member(v, "round", p), child(p, "round"));
        const std::string fp = child(p, "faults");
        const json &faults = expect_array(member(v, "faults", p), fp);
        for (std::size_t f = 0; f < faults.size(); ++f)
        {
            round.faults.push_back(
                    fault_from_json(faults[f], child(fp, f), integer_layer));
        }
        round.l_left = as_int32(member(v, "l_left", p), child(p, "l_left"));
        round.l_right = as_int32(member(v, "l_right", p), child(p, "l_right"));
        round.accuracy = as_number(member(v, "accuracy", p), child(p, "accuracy"));
        round.label = label_from_json(member(v, "label", p), child(p, "label"));
        round.predictions =
                int_array_from(member(v, "predictions", p), child(p, "predictions"));
        round.counters = counters_from_json(member(v, "counters", p), child(p, "counters"));
        const std::string op = child(p, "outputs");
        const json &outputs = expect_array(member(v, "outputs", p), op);
        for (std::size_t o = 0; o < outputs.size(); ++o)
        {
            round.outputs.push_back(matrix_from_json(outputs[o], child(op, o)));
        }
        r.rounds.push_back(std::move(round));
    }
    return r;
}

void export_results(const CampaignResults &results, const std::filesystem::path &path)
{
    write_text(path, format_results(results));
}

CampaignResults import_results(const std::filesystem::path &path)
{
    try
    {
        return parse_results(read_text(path));
    }
    catch (const FormatError &e)
    {
        throw FormatError(path.string() + ": " + e.what());
    }
}

std::string format_plot_table(const CampaignResults &r)
{
    std::ostringstream out;
    out << "round,accuracy,label,golden_accuracy,model,params,layer,site,"
           "c,y,x,pre_c,pre_y,pre_x,t1,t2\n";
    for (const RoundResult &round : r.rounds)
    {
        const std::string head = std::to_string(round.round) + "," +
                number(round.accuracy) + "," + std::string(label_name(round.label)) +
                "," + number(r.golden_accuracy) + ",";
        bool wrote = false;
        for (const FaultDescriptor &f : round.faults)
        {
            std::string tail = ",";
            if (f.duration.transient)
            {
                tail = std::to_string(f.duration.t1) + "," + std::to_string(f.duration.t2);
            }
            const std::string model = csv_quote(f.model) + "," +
                    csv_quote(f.params.dump()) + ",";
            for (const FaultSite &site : f.sites)
            {
                out << head << model;
                if (const auto *n = std::get_if<NeuronSite>(&site))
                {
                    out << n->layer << ",neuron," << n->pos.c << ',' << n->pos.y << ','
                        << n->pos.x << ",,,,";
                }
                else
                {
                    const auto &s = std::get<SynapseSite>(site);
                    out << s.layer << ",synapse," << s.post.c << ',' << s.post.y << ','
                        << s.post.x << ',' << s.pre.c << ',' << s.pre.y << ','
                        << s.pre.x << ',';
                }
                out << tail << '\n';
                wrote = true;
            }
        }
        if (!wrote)
        {
            out << head << ",,,,,,,,,,,\n";
        }
    }
    return out.str();
}

void write_plot_table(const CampaignResults &results, const std::filesystem::path &path)
{
    write_text(path, format_plot_table(results));
}

} // namespace srmfi

#include "serialize.hpp"

#include <algorithm>

namespace srmfi::detail {

namespace {

json coord_to_json(const Coord &c)
{
    return json::array({c.c, c.y, c.x});
}

Coord coord_from_json(const json &v, const std::string &path)
{
    expect_array(v, path);
    if (v.size() != 3)
    {
        fail(path, "expected [c, y, x]");
    }
    return {as_int32(v[0], child(path, 0)), as_int32(v[1], child(path, 1)),
            as_int32(v[2], child(path, 2))};
}

json site_to_json(const FaultSite &site)
{
    if (const auto *n = std::get_if<NeuronSite>(&site))
    {
        return {{"layer", n->layer}, {"neuron", coord_to_json(n->pos)}};
    }
    const auto &s = std::get<SynapseSite>(site);
    return {{"layer", s.layer}, {"pre", coord_to_json(s.pre)},
            {"post", coord_to_json(s.post)}};
}

FaultSite site_from_json(
        const json &v, const std::string &path, const LayerResolver &layer)
{
    expect_object(v, path);
    check_keys(v, path, {"layer", "neuron", "pre", "post"});
    const int l = layer(member(v, "layer", path), child(path, "layer"));
    if (const json *n = find(v, "neuron"))
    {
        if (find(v, "pre") || find(v, "post"))
        {
            fail(path, "a site has either 'neuron' or 'pre'/'post'");
        }
        return NeuronSite{l, coord_from_json(*n, child(path, "neuron"))};
    }
    return SynapseSite{l, coord_from_json(member(v, "pre", path), child(path, "pre")),
            coord_from_json(member(v, "post", path), child(path, "post"))};
}

} // namespace

void check_keys(const json &obj, const std::string &path,
        std::initializer_list<std::string_view> allowed)
{
    for (const auto &[key, value] : obj.items())
    {
        if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
        {
            fail(child(path, key), "unknown field");
        }
    }
}

int integer_layer(const json &ref, const std::string &path)
{
    return as_int32(ref, path);
}

json options_to_json(const CampaignOptions &o)
{
    return {{"late_start", o.late_start}, {"early_stop", o.early_stop},
            {"tol", o.early_stop_tolerance}, {"batch_size", o.batch_size},
            {"parallel", o.parallel}, {"threads", o.threads},
            {"misprediction_tolerance", o.misprediction_tolerance},
            {"save_outputs", o.save_outputs}, {"rng_seed", o.rng_seed}};
}

CampaignOptions options_from_json(const json &v, const std::string &path)
{
    expect_object(v, path);
    check_keys(v, path,
            {"late_start", "early_stop", "tol", "batch_size", "parallel",
                    "threads", "misprediction_tolerance", "save_outputs",
                    "rng_seed"});
    CampaignOptions o;
    if (const json *x = find(v, "late_start"))
        o.late_start = as_bool(*x, child(path, "late_start"));
    if (const json *x = find(v, "early_stop"))
        o.early_stop = as_bool(*x, child(path, "early_stop"));
    if (const json *x = find(v, "tol"))
        o.early_stop_tolerance = as_number(*x, child(path, "tol"));
    if (const json *x = find(v, "batch_size"))
        o.batch_size = as_int32(*x, child(path, "batch_size"));
    if (const json *x = find(v, "parallel"))
        o.parallel = as_bool(*x, child(path, "parallel"));
    if (const json *x = find(v, "threads"))
        o.threads = as_int32(*x, child(path, "threads"));
    if (const json *x = find(v, "misprediction_tolerance"))
        o.misprediction_tolerance =
                as_number(*x, child(path, "misprediction_tolerance"));
    if (const json *x = find(v, "save_outputs"))
        o.save_outputs = as_bool(*x, child(path, "save_outputs"));
    if (const json *x = find(v, "rng_seed"))
        o.rng_seed = as_uint64(*x, child(path, "rng_seed"));
    try
    {
        o.validate();
    }
    catch (const Error &e)
    {
        fail(path, e.what());
    }
    return o;
}

json duration_to_json(const FaultDuration &d)
{
    if (!d.transient)
    {
        return "permanent";
    }
    return {{"t1", d.t1}, {"t2", d.t2}};
}

FaultDuration duration_from_json(const json &v, const std::string &path)
{
    if (v.is_string())
    {
        if (v.get<std::string>() != "permanent")
        {
            fail(path, "expected \"permanent\" or {\"t1\", \"t2\"}");
        }
        return FaultDuration::permanent();
    }
    expect_object(v, path);
    check_keys(v, path, {"t1", "t2"});
    return FaultDuration::window(as_int32(member(v, "t1", path), child(path, "t1")),
            as_int32(member(v, "t2", path), child(path, "t2")));
}

json fault_to_json(const FaultDescriptor &f)
{
    json out = {{"model", f.model}, {"params", f.params}};
    json sites = json::array();
    for (const FaultSite &s : f.sites)
    {
        sites.push_back(site_to_json(s));
    }
    out["sites"] = std::move(sites);
    if (f.random)
    {
        json r = {{"count", f.random->count}};
        r["layer"] = f.random->layer ? json(*f.random->layer) : json(nullptr);
        if (f.random->seed)
        {
            r["seed"] = *f.random->seed;
        }
        out["random"] = std::move(r);
    }
    out["duration"] = duration_to_json(f.duration);
    return out;
}

FaultDescriptor fault_from_json(
        const json &v, const std::string &path, const LayerResolver &layer)
{
    expect_object(v, path);
    check_keys(v, path, {"model", "params", "sites", "random", "duration"});
    FaultDescriptor f;
    f.model = as_string(member(v, "model", path), child(path, "model"));
    if (const json *p = find(v, "params"))
    {
        expect_object(*p, child(path, "params"));
        f.params = *p;
    }
    if (const json *s = find(v, "sites"))
    {
        const std::string sp = child(path, "sites");
        expect_array(*s, sp);
        for (std::size_t i = 0; i < s->size(); ++i)
        {
            f.sites.push_back(site_from_json((*s)[i], child(sp, i), layer));
        }
    }
    if (const json *r = find(v, "random"))
    {
        const std::string rp = child(path, "random");
        expect_object(*r, rp);
        check_keys(*r, rp, {"layer", "count", "seed"});
        RandomSiteRequest req;
        if (const json *l = find(*r, "layer"); l && !l->is_null())
        {
            req.layer = layer(*l, child(rp, "layer"));
        }
        if (const json *c = find(*r, "count"))
        {
            req.count = as_int32(*c, child(rp, "count"));
        }
        if (const json *s = find(*r, "seed"); s && !s->is_null())
        {
            req.seed = as_uint64(*s, child(rp, "seed"));
        }
        f.random = req;
    }
    if (const json *d = find(v, "duration"))
    {
        f.duration = duration_from_json(*d, child(path, "duration"));
    }
    return f;
}

} // namespace srmfi::detail

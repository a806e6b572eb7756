#include "srmfi/model_file.hpp"

#include <bit>
#include <cstring>
#include <limits>

#include "file_util.hpp"
#include "json_util.hpp"
#include "srmfi/error.hpp"

namespace srmfi {

using detail::as_int32;
using detail::as_int;
using detail::as_number;
using detail::as_string;
using detail::child;
using detail::fail;
using detail::find;
using detail::json;
using detail::member;

namespace {

constexpr std::string_view kFormat = "srmfi-network";

json shape_json(const Shape3 &s)
{
    return json::array({s.channels, s.height, s.width});
}

Shape3 parse_shape(const json &v, const std::string &path)
{
    detail::expect_array(v, path);
    if (v.size() != 3)
    {
        fail(path, "expected [channels, height, width]");
    }
    Shape3 s{as_int32(v[0], child(path, 0)), as_int32(v[1], child(path, 1)),
            as_int32(v[2], child(path, 2))};
    if (!s.valid())
    {
        fail(path, "dimensions must be positive");
    }
    // Keeps neuron counts and weight totals well inside size_t.
    if (s.size() > (std::size_t{1} << 28))
    {
        fail(path, "shape too large");
    }
    return s;
}

void put_f32(std::vector<std::uint8_t> &out, float value)
{
    const auto bits = std::bit_cast<std::uint32_t>(value);
    for (int b = 0; b < 4; ++b)
    {
        out.push_back(static_cast<std::uint8_t>((bits >> (8 * b)) & 0xFF));
    }
}

float get_f32(std::span<const std::uint8_t> bytes, std::size_t offset)
{
    std::uint32_t bits = 0;
    for (int b = 0; b < 4; ++b)
    {
        bits |= static_cast<std::uint32_t>(bytes[offset + b]) << (8 * b);
    }
    return std::bit_cast<float>(bits);
}

} // namespace

EncodedNetwork encode_network(const Network &net, const std::string &weights_file)
{
    net.validate();
    EncodedNetwork out;
    json layers = json::array();
    for (const LayerSpec &layer : net.layers)
    {
        json l;
        l["name"] = layer.name;
        l["kind"] = std::string(to_string(layer.kind));
        l["input_shape"] = shape_json(layer.input_shape);
        l["output_shape"] = shape_json(layer.output_shape);
        if (layer.kind == LayerKind::conv2d)
        {
            l["kernel"] = {{"h", layer.conv.kernel_h}, {"w", layer.conv.kernel_w},
                    {"stride", layer.conv.stride}, {"padding", layer.conv.padding}};
        }
        if (layer.kind == LayerKind::sumpool)
        {
            l["window"] = json::array({layer.pool.window_h, layer.pool.window_w});
        }
        if (layer.params)
        {
            l["params"] = {{"tau_s", layer.params->tau_s},
                    {"tau_ref", layer.params->tau_ref},
                    {"theta", layer.params->theta},
                    {"u_rest", layer.params->u_rest}};
        }
        if (layer.has_neurons())
        {
            l["weights"] = {{"offset", out.blob.size()},
                    {"count", layer.weights.size()}};
            for (const double w : layer.weights)
            {
                put_f32(out.blob, static_cast<float>(w));
            }
        }
        if (layer.quant_range)
        {
            l["quantizer"] = {{"min", layer.quant_range->min},
                    {"max", layer.quant_range->max}};
        }
        layers.push_back(std::move(l));
    }
    json doc;
    doc["format"] = kFormat;
    doc["format_version"] = kNetworkFormatVersion;
    doc["clock"] = {{"period_ms", net.clock.period_ms},
            {"num_steps", net.clock.num_steps}};
    doc["num_classes"] = net.num_classes;
    doc["weights_file"] = weights_file;
    doc["weights_bytes"] = out.blob.size();
    doc["layers"] = std::move(layers);
    out.header = doc.dump(2) + "\n";
    return out;
}

std::string weights_file_of(std::string_view header)
{
    const json doc = detail::parse_json(header, "network header");
    detail::check_header(doc, kFormat, kNetworkFormatVersion);
    return as_string(member(doc, "weights_file", ""), "/weights_file");
}

Network decode_network(std::string_view header, std::span<const std::uint8_t> blob)
{
    const json doc = detail::parse_json(header, "network header");
    detail::check_header(doc, kFormat, kNetworkFormatVersion);

    Network net;
    const json &clock = member(doc, "clock", "");
    net.clock.period_ms = as_number(member(clock, "period_ms", "/clock"),
            "/clock/period_ms");
    net.clock.num_steps = as_int32(member(clock, "num_steps", "/clock"),
            "/clock/num_steps");
    if (net.clock.num_steps > (1 << 24))
    {
        fail("/clock/num_steps", "too many steps");
    }
    net.num_classes = as_int32(member(doc, "num_classes", ""), "/num_classes");

    struct BlobSlice
    {
        std::size_t layer;
        std::int64_t offset;
        std::int64_t count;
    };
    std::vector<BlobSlice> slices;

    const json &layers = detail::expect_array(member(doc, "layers", ""), "/layers");
    for (std::size_t i = 0; i < layers.size(); ++i)
    {
        const std::string path = child("/layers", i);
        const json &l = detail::expect_object(layers[i], path);
        LayerSpec layer;
        layer.name = as_string(member(l, "name", path), child(path, "name"));
        const std::string kind = as_string(member(l, "kind", path), child(path, "kind"));
        const auto parsed_kind = parse_layer_kind(kind);
        if (!parsed_kind)
        {
            fail(child(path, "kind"), "unknown layer kind '" + kind + "'");
        }
        layer.kind = *parsed_kind;
        layer.input_shape = parse_shape(member(l, "input_shape", path),
                child(path, "input_shape"));
        layer.output_shape = parse_shape(member(l, "output_shape", path),
                child(path, "output_shape"));
        if (layer.kind == LayerKind::conv2d)
        {
            const std::string kp = child(path, "kernel");
            const json &k = member(l, "kernel", path);
            layer.conv.kernel_h = as_int32(member(k, "h", kp), child(kp, "h"));
            layer.conv.kernel_w = as_int32(member(k, "w", kp), child(kp, "w"));
            if (const json *s = find(k, "stride"))
            {
                layer.conv.stride = as_int32(*s, child(kp, "stride"));
            }
            if (const json *p = find(k, "padding"))
            {
                layer.conv.padding = as_int32(*p, child(kp, "padding"));
            }
            if (layer.conv.kernel_h < 1 || layer.conv.kernel_w < 1 ||
                    layer.conv.kernel_h > 4096 || layer.conv.kernel_w > 4096 ||
                    layer.conv.stride < 1 || layer.conv.padding < 0 ||
                    layer.conv.padding > 4096)
            {
                fail(kp, "invalid convolution geometry");
            }
        }
        if (layer.kind == LayerKind::sumpool)
        {
            const std::string wp = child(path, "window");
            const json &w = detail::expect_array(member(l, "window", path), wp);
            if (w.size() != 2)
            {
                fail(wp, "expected [height, width]");
            }
            layer.pool.window_h = as_int32(w[0], child(wp, 0));
            layer.pool.window_w = as_int32(w[1], child(wp, 1));
        }
        if (const json *p = find(l, "params"))
        {
            const std::string pp = child(path, "params");
            NeuronParams params;
            params.tau_s = as_number(member(*p, "tau_s", pp), child(pp, "tau_s"));
            params.tau_ref = as_number(member(*p, "tau_ref", pp), child(pp, "tau_ref"));
            params.theta = as_number(member(*p, "theta", pp), child(pp, "theta"));
            if (const json *u = find(*p, "u_rest"))
            {
                params.u_rest = as_number(*u, child(pp, "u_rest"));
            }
            layer.params = params;
        }
        if (const json *q = find(l, "quantizer"))
        {
            const std::string qp = child(path, "quantizer");
            layer.quant_range = WeightRange{
                    as_number(member(*q, "min", qp), child(qp, "min")),
                    as_number(member(*q, "max", qp), child(qp, "max"))};
        }
        if (const json *w = find(l, "weights"))
        {
            const std::string wp = child(path, "weights");
            slices.push_back({i, as_int(member(*w, "offset", wp), child(wp, "offset")),
                    as_int(member(*w, "count", wp), child(wp, "count"))});
        }
        else if (layer.kind != LayerKind::sumpool)
        {
            fail(path, "missing field 'weights'");
        }
        net.layers.push_back(std::move(layer));
    }

    // Shape arithmetic is checked before any weight is read; weight counts are
    // checked against the declared slices instead of the (still empty) vectors.
    for (std::size_t i = 0; i < net.layers.size(); ++i)
    {
        LayerSpec &layer = net.layers[i];
        if (layer.kind != LayerKind::sumpool)
        {
            layer.weights.assign(layer.expected_weight_count(), 0.0);
        }
    }
    try
    {
        net.validate();
    }
    catch (const Error &e)
    {
        throw FormatError(std::string("network header: ") + e.what());
    }

    std::int64_t declared = 0;
    for (const BlobSlice &slice : slices)
    {
        LayerSpec &layer = net.layers[slice.layer];
        const std::string where = "layer '" + layer.name + "'";
        if (slice.count < 0 || static_cast<std::size_t>(slice.count) !=
                        layer.expected_weight_count())
        {
            throw FormatError(where + ": declares " + std::to_string(slice.count) +
                    " weights, shape requires " +
                    std::to_string(layer.expected_weight_count()));
        }
        if (slice.offset < 0 || slice.offset % 4 != 0)
        {
            throw FormatError(where + ": invalid weight offset");
        }
        const auto end = static_cast<std::uint64_t>(slice.offset) +
                static_cast<std::uint64_t>(slice.count) * 4;
        if (end > blob.size())
        {
            throw FormatError(where + ": weight blob truncated (needs " +
                    std::to_string(end) + " bytes, have " +
                    std::to_string(blob.size()) + ")");
        }
        for (std::int64_t k = 0; k < slice.count; ++k)
        {
            const float w = get_f32(blob, static_cast<std::size_t>(slice.offset + 4 * k));
            if (!std::isfinite(w))
            {
                throw FormatError(where + ": non-finite weight at index " +
                        std::to_string(k));
            }
            layer.weights[static_cast<std::size_t>(k)] = w;
        }
        declared += slice.count * 4;
    }
    if (static_cast<std::uint64_t>(declared) != blob.size())
    {
        throw FormatError("weight blob holds " + std::to_string(blob.size()) +
                " bytes but the header declares " + std::to_string(declared));
    }
    if (const json *total = find(doc, "weights_bytes"))
    {
        if (as_int(*total, "/weights_bytes") != declared)
        {
            fail("/weights_bytes", "does not match the per-layer weight counts");
        }
    }
    return net;
}

void save_network(const Network &net, const std::filesystem::path &path)
{
    const std::string blob_name = path.stem().string() + ".weights.bin";
    const EncodedNetwork encoded = encode_network(net, blob_name);
    detail::write_text(path, encoded.header);
    detail::write_bytes(path.parent_path() / blob_name, encoded.blob);
}

Network load_network(const std::filesystem::path &path)
{
    const std::string header = detail::read_text(path);
    const std::string blob_name = weights_file_of(header);
    const auto blob = detail::read_bytes(path.parent_path() / blob_name);
    return decode_network(header, blob);
}

} // namespace srmfi

#include "srmfi/events.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "file_util.hpp"
#include "srmfi/error.hpp"

namespace srmfi {

namespace {

std::string_view trim(std::string_view s)
{
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string_view::npos)
    {
        return {};
    }
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_fields(std::string_view line)
{
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < line.size())
    {
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t'))
        {
            ++i;
        }
        const std::size_t start = i;
        while (i < line.size() && line[i] != ' ' && line[i] != '\t')
        {
            ++i;
        }
        if (i > start)
        {
            out.push_back(line.substr(start, i - start));
        }
    }
    return out;
}

template <typename T>
bool parse_integer(std::string_view s, T &out)
{
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

// Calls body(line_number, content) for each non-blank, comment-stripped line.
template <typename Body>
void for_each_line(std::string_view text, Body body)
{
    int number = 0;
    std::size_t pos = 0;
    while (pos <= text.size())
    {
        const auto end = text.find('\n', pos);
        std::string_view line = text.substr(pos,
                end == std::string_view::npos ? std::string_view::npos : end - pos);
        ++number;
        if (const auto hash = line.find('#'); hash != std::string_view::npos)
        {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (!line.empty())
        {
            body(number, line);
        }
        if (end == std::string_view::npos)
        {
            break;
        }
        pos = end + 1;
    }
}

[[noreturn]] void line_error(int line, const std::string &msg)
{
    throw FormatError("line " + std::to_string(line) + ": " + msg);
}

} // namespace

std::vector<Event> parse_text_events(std::string_view text)
{
    std::vector<Event> events;
    for_each_line(text, [&](int number, std::string_view line) {
        const auto fields = split_fields(line);
        if (fields.size() != 4)
        {
            line_error(number, "expected 't_us x y p'");
        }
        Event e;
        if (!parse_integer(fields[0], e.t_us) || e.t_us < 0)
        {
            line_error(number, "invalid timestamp");
        }
        if (!parse_integer(fields[1], e.x) || !parse_integer(fields[2], e.y))
        {
            line_error(number, "invalid coordinates");
        }
        if (!parse_integer(fields[3], e.polarity) ||
                (e.polarity != 0 && e.polarity != 1))
        {
            line_error(number, "polarity must be 0 or 1");
        }
        if (!events.empty() && e.t_us < events.back().t_us)
        {
            line_error(number, "timestamps must be non-decreasing");
        }
        events.push_back(e);
    });
    return events;
}

std::string format_text_events(std::span<const Event> events)
{
    std::ostringstream out;
    for (const Event &e : events)
    {
        out << e.t_us << ' ' << e.x << ' ' << e.y << ' ' << e.polarity << '\n';
    }
    return out.str();
}

std::vector<Event> parse_binary_events(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() % 5 != 0)
    {
        throw FormatError("binary event stream length " +
                std::to_string(bytes.size()) + " is not a multiple of 5");
    }
    std::vector<Event> events;
    events.reserve(bytes.size() / 5);
    for (std::size_t i = 0; i < bytes.size(); i += 5)
    {
        Event e;
        e.x = bytes[i];
        e.y = bytes[i + 1];
        e.polarity = bytes[i + 2] >> 7;
        e.t_us = (static_cast<std::int64_t>(bytes[i + 2] & 0x7F) << 16) |
                (static_cast<std::int64_t>(bytes[i + 3]) << 8) | bytes[i + 4];
        if (!events.empty() && e.t_us < events.back().t_us)
        {
            throw FormatError("event " + std::to_string(i / 5) +
                    ": timestamps must be non-decreasing");
        }
        events.push_back(e);
    }
    return events;
}

std::vector<std::uint8_t> format_binary_events(std::span<const Event> events)
{
    std::vector<std::uint8_t> out;
    out.reserve(events.size() * 5);
    for (std::size_t i = 0; i < events.size(); ++i)
    {
        const Event &e = events[i];
        if (e.x < 0 || e.x > 255 || e.y < 0 || e.y > 255 || e.t_us < 0 ||
                e.t_us >= (std::int64_t{1} << 23) ||
                (e.polarity != 0 && e.polarity != 1))
        {
            throw FormatError("event " + std::to_string(i) +
                    " does not fit the 5-byte encoding");
        }
        out.push_back(static_cast<std::uint8_t>(e.x));
        out.push_back(static_cast<std::uint8_t>(e.y));
        out.push_back(static_cast<std::uint8_t>((e.polarity << 7) | (e.t_us >> 16)));
        out.push_back(static_cast<std::uint8_t>((e.t_us >> 8) & 0xFF));
        out.push_back(static_cast<std::uint8_t>(e.t_us & 0xFF));
    }
    return out;
}

std::vector<Event> load_events(const std::filesystem::path &path)
{
    try
    {
        if (path.extension() == ".bin")
        {
            return parse_binary_events(detail::read_bytes(path));
        }
        return parse_text_events(detail::read_text(path));
    }
    catch (const FormatError &e)
    {
        throw FormatError(path.string() + ": " + e.what());
    }
}

SpikeRecord encode_events(
        std::span<const Event> events, const Clock &clock, const Shape3 &sensor)
{
    clock.validate();
    if (!sensor.valid())
    {
        throw ShapeError("invalid sensor shape " + sensor.str());
    }
    SpikeRecord out(sensor.size(), static_cast<std::size_t>(clock.num_steps));
    for (std::size_t i = 0; i < events.size(); ++i)
    {
        const Event &e = events[i];
        if (i > 0 && e.t_us < events[i - 1].t_us)
        {
            throw FormatError("event " + std::to_string(i) + ": not sorted by time");
        }
        if (e.x < 0 || e.x >= sensor.width || e.y < 0 || e.y >= sensor.height ||
                e.polarity < 0 || e.polarity >= sensor.channels)
        {
            throw ShapeError("event " + std::to_string(i) + ": (x=" +
                    std::to_string(e.x) + ", y=" + std::to_string(e.y) +
                    ", p=" + std::to_string(e.polarity) + ") outside sensor " +
                    sensor.str());
        }
        const double t_ms = static_cast<double>(e.t_us) / 1000.0;
        double bin = std::ceil(t_ms / clock.period_ms);
        bin = std::clamp(bin, 1.0, static_cast<double>(clock.num_steps));
        const std::size_t row = flat_index(sensor, {e.polarity, e.y, e.x});
        out.at(row, static_cast<std::size_t>(bin) - 1) = 1.0;
    }
    return out;
}

std::vector<DatasetEntry> parse_manifest(
        std::string_view text, const std::filesystem::path &base)
{
    std::vector<DatasetEntry> entries;
    for_each_line(text, [&](int number, std::string_view line) {
        const auto space = line.find_first_of(" \t");
        if (space == std::string_view::npos)
        {
            line_error(number, "expected 'label path'");
        }
        DatasetEntry entry;
        if (!parse_integer(line.substr(0, space), entry.label) || entry.label < 0)
        {
            line_error(number, "invalid label");
        }
        const std::string_view rel = trim(line.substr(space + 1));
        if (rel.empty())
        {
            line_error(number, "missing event file path");
        }
        entry.events = base / std::filesystem::path(std::string(rel));
        entries.push_back(std::move(entry));
    });
    return entries;
}

std::vector<Sample> load_dataset(const std::filesystem::path &manifest,
        const Clock &clock, const Shape3 &sensor)
{
    std::vector<DatasetEntry> entries;
    try
    {
        entries = parse_manifest(detail::read_text(manifest), manifest.parent_path());
    }
    catch (const FormatError &e)
    {
        throw FormatError(manifest.string() + ": " + e.what());
    }
    std::vector<Sample> samples;
    samples.reserve(entries.size());
    for (const DatasetEntry &entry : entries)
    {
        const auto events = load_events(entry.events);
        try
        {
            samples.push_back({encode_events(events, clock, sensor), entry.label});
        }
        catch (const Error &e)
        {
            throw FormatError(entry.events.string() + ": " + e.what());
        }
    }
    return samples;
}

} // namespace srmfi

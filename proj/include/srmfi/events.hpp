#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "srmfi/campaign.hpp"
#include "srmfi/network.hpp"
#include "srmfi/time_matrix.hpp"

namespace srmfi {

struct Event
{
    std::int64_t t_us = 0;
    int x = 0;
    int y = 0;
    int polarity = 0; // 0 or 1

    bool operator==(const Event &) const = default;
};

// Text events: one "t_us x y p" per line, '#' starts a comment.
std::vector<Event> parse_text_events(std::string_view text);
std::string format_text_events(std::span<const Event> events);

// 5-byte big-endian records: x (8 bits), y (8 bits), then polarity in the top
// bit followed by a 23-bit microsecond timestamp.
std::vector<Event> parse_binary_events(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> format_binary_events(std::span<const Event> events);

// Picks the binary reader for ".bin" files and the text reader otherwise.
std::vector<Event> load_events(const std::filesystem::path &path);

// Bins events onto the clock grid: time t goes to step ceil(t / T) clamped to
// [1, d], the polarity selects the channel, and repeated events in one cell
// collapse to a single spike. Events must be sorted by time.
SpikeRecord encode_events(
        std::span<const Event> events, const Clock &clock, const Shape3 &sensor);

struct DatasetEntry
{
    int label = 0;
    std::filesystem::path events;
};

// Manifest lines "label relative/path", paths relative to the manifest.
std::vector<DatasetEntry> parse_manifest(
        std::string_view text, const std::filesystem::path &base);

std::vector<Sample> load_dataset(const std::filesystem::path &manifest,
        const Clock &clock, const Shape3 &sensor);

} // namespace srmfi

#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "srmfi/campaign.hpp"

namespace srmfi {

inline constexpr int kResultsFormatVersion = 1;

// Run-length encoding of a matrix in row-major order: (value, run) pairs.
std::vector<std::pair<double, std::size_t>> run_length_encode(const TimeMatrix &m);
SpikeRecord run_length_decode(std::size_t rows, std::size_t steps,
        const std::vector<std::pair<double, std::size_t>> &runs);

// JSON text; every numeric field survives a round trip exactly.
std::string format_results(const CampaignResults &results);
CampaignResults parse_results(std::string_view text);

void export_results(const CampaignResults &results, const std::filesystem::path &path);
CampaignResults import_results(const std::filesystem::path &path);

// Flat CSV for plotting: one line per fault site of every round, with the
// round's accuracy and label repeated. Rounds without sites get one line with
// empty site columns.
std::string format_plot_table(const CampaignResults &results);
void write_plot_table(const CampaignResults &results, const std::filesystem::path &path);

} // namespace srmfi

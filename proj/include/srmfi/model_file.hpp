#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "srmfi/network.hpp"

namespace srmfi {

inline constexpr int kNetworkFormatVersion = 1;

// A network is stored as a JSON header plus a sidecar blob of little-endian
// float32 weights, layer-major, with per-layer byte offsets in the header.
struct EncodedNetwork
{
    std::string header;
    std::vector<std::uint8_t> blob;
};

// `weights_file` is the blob's file name as recorded in the header.
EncodedNetwork encode_network(const Network &net, const std::string &weights_file);

// Validates the header (shape chain included) before touching the blob.
// Throws FormatError / ShapeError / ConfigError.
Network decode_network(std::string_view header, std::span<const std::uint8_t> blob);

// Writes `path` and a sibling "<stem>.weights.bin". Weights are narrowed to
// float32.
void save_network(const Network &net, const std::filesystem::path &path);
Network load_network(const std::filesystem::path &path);

// Name of the blob file recorded in a header.
std::string weights_file_of(std::string_view header);

} // namespace srmfi

#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "srmfi/error.hpp"

namespace srmfi::detail {

inline std::string read_text(const std::filesystem::path &path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
    {
        throw FormatError("cannot open " + path.string());
    }
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline std::vector<std::uint8_t> read_bytes(const std::filesystem::path &path)
{
    const std::string text = read_text(path);
    return {text.begin(), text.end()};
}

inline void write_text(const std::filesystem::path &path, std::string_view text)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
    {
        throw FormatError("cannot write " + path.string());
    }
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out)
    {
        throw FormatError("failed writing " + path.string());
    }
}

inline void write_bytes(
        const std::filesystem::path &path, std::span<const std::uint8_t> bytes)
{
    write_text(path, {reinterpret_cast<const char *>(bytes.data()), bytes.size()});
}

} // namespace srmfi::detail

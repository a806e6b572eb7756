#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "json.hpp"

#include "srmfi/error.hpp"

namespace srmfi::detail {

using nlohmann::json;

inline json parse_json(std::string_view text, std::string_view what)
{
    try
    {
        return json::parse(text.begin(), text.end());
    }
    catch (const json::parse_error &e)
    {
        throw FormatError(std::string(what) + ": byte " +
                std::to_string(e.byte) + ": malformed JSON");
    }
    catch (const json::exception &e)
    {
        throw FormatError(std::string(what) + ": " + e.what());
    }
}

inline std::string child(const std::string &path, std::string_view key)
{
    return path + "/" + std::string(key);
}

inline std::string child(const std::string &path, std::size_t index)
{
    return path + "/" + std::to_string(index);
}

[[noreturn]] inline void fail(const std::string &path, const std::string &msg)
{
    throw FormatError((path.empty() ? std::string("/") : path) + ": " + msg);
}

inline const json &expect_object(const json &v, const std::string &path)
{
    if (!v.is_object())
    {
        fail(path, "expected an object");
    }
    return v;
}

inline const json &expect_array(const json &v, const std::string &path)
{
    if (!v.is_array())
    {
        fail(path, "expected an array");
    }
    return v;
}

inline const json *find(const json &obj, std::string_view key)
{
    if (!obj.is_object())
    {
        return nullptr;
    }
    const auto it = obj.find(key);
    return it == obj.end() ? nullptr : &*it;
}

inline const json &member(
        const json &obj, std::string_view key, const std::string &path)
{
    expect_object(obj, path);
    const json *v = find(obj, key);
    if (v == nullptr)
    {
        fail(child(path, key), "missing field");
    }
    return *v;
}

inline double as_number(const json &v, const std::string &path)
{
    if (!v.is_number())
    {
        fail(path, "expected a number");
    }
    const double d = v.get<double>();
    if (!std::isfinite(d))
    {
        fail(path, "expected a finite number");
    }
    return d;
}

inline std::int64_t as_int(const json &v, const std::string &path)
{
    if (v.is_number_unsigned())
    {
        const auto u = v.get<std::uint64_t>();
        if (u > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()))
        {
            fail(path, "integer out of range");
        }
        return static_cast<std::int64_t>(u);
    }
    if (!v.is_number_integer())
    {
        fail(path, "expected an integer");
    }
    return v.get<std::int64_t>();
}

inline int as_int32(const json &v, const std::string &path)
{
    const std::int64_t i = as_int(v, path);
    if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max())
    {
        fail(path, "integer out of range");
    }
    return static_cast<int>(i);
}

inline std::uint64_t as_uint64(const json &v, const std::string &path)
{
    if (v.is_number_unsigned())
    {
        return v.get<std::uint64_t>();
    }
    const std::int64_t i = as_int(v, path);
    if (i < 0)
    {
        fail(path, "expected a non-negative integer");
    }
    return static_cast<std::uint64_t>(i);
}

inline bool as_bool(const json &v, const std::string &path)
{
    if (!v.is_boolean())
    {
        fail(path, "expected true or false");
    }
    return v.get<bool>();
}

inline std::string as_string(const json &v, const std::string &path)
{
    if (!v.is_string())
    {
        fail(path, "expected a string");
    }
    return v.get<std::string>();
}

inline void check_header(const json &doc, std::string_view format, int version)
{
    expect_object(doc, "");
    const std::string kind = as_string(member(doc, "format", ""), "/format");
    if (kind != format)
    {
        fail("/format", "expected '" + std::string(format) + "', got '" + kind + "'");
    }
    const auto v = as_int(member(doc, "format_version", ""), "/format_version");
    if (v != version)
    {
        fail("/format_version", "unsupported version " + std::to_string(v));
    }
}

} // namespace srmfi::detail

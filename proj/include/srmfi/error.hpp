#pragma once

#include <stdexcept>
#include <string>

namespace srmfi {

class Error : public std::runtime_error
{
public:
    using std::runtime_error::runtime_error;
};

// Tensor or record dimensions that do not line up.
class ShapeError : public Error
{
public:
    using Error::Error;
};

// Non-finite values produced or consumed by the simulator.
class NumericError : public Error
{
public:
    using Error::Error;
};

// Malformed on-disk data (model headers, weight blobs, events, results).
class FormatError : public Error
{
public:
    using Error::Error;
};

// Invalid campaign configuration or API usage.
class ConfigError : public Error
{
public:
    using Error::Error;
};

} // namespace srmfi

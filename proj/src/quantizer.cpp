#include "srmfi/quantizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "srmfi/error.hpp"

namespace srmfi {

Quantizer::Quantizer(int width, double w_min, double w_max)
    : width_(width), w_min_(w_min), w_max_(w_max)
{
    if (width < 1 || width > 32)
    {
        throw ConfigError("quantizer width must be in [1, 32], got " +
                std::to_string(width));
    }
    if (!std::isfinite(w_min) || !std::isfinite(w_max) || !(w_min < w_max))
    {
        throw ConfigError("quantizer range requires finite min < max");
    }
    max_code_ = (std::uint64_t{1} << width) - 1;
}

std::uint64_t Quantizer::quantize(double w) const
{
    if (std::isnan(w))
    {
        throw NumericError("cannot quantize NaN");
    }
    const double clamped = std::clamp(w, w_min_, w_max_);
    const double scaled = (clamped - w_min_) / (w_max_ - w_min_) *
            static_cast<double>(max_code_);
    // std::round rounds halfway cases away from zero.
    const double code = std::round(scaled);
    return std::min(static_cast<std::uint64_t>(std::max(code, 0.0)), max_code_);
}

double Quantizer::dequantize(std::uint64_t code) const
{
    if (code > max_code_)
    {
        throw ConfigError("code " + std::to_string(code) +
                " exceeds quantizer width " + std::to_string(width_));
    }
    return w_min_ + static_cast<double>(code) * (w_max_ - w_min_) /
            static_cast<double>(max_code_);
}

} // namespace srmfi

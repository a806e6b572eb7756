#pragma once

#include <cstdint>

namespace srmfi {

// Unsigned affine N-bit quantizer over [w_min, w_max]:
//   code = round((w - w_min) / (w_max - w_min) * (2^N - 1))
// with half-away-from-zero rounding. Inputs outside the range are clamped.
class Quantizer
{
public:
    Quantizer(int width, double w_min, double w_max);

    int width() const { return width_; }
    double min() const { return w_min_; }
    double max() const { return w_max_; }
    std::uint64_t max_code() const { return max_code_; }
    double step() const { return (w_max_ - w_min_) / static_cast<double>(max_code_); }

    bool in_range(double w) const { return w >= w_min_ && w <= w_max_; }

    std::uint64_t quantize(double w) const;
    double dequantize(std::uint64_t code) const;

private:
    int width_;
    double w_min_;
    double w_max_;
    std::uint64_t max_code_;
};

} // namespace srmfi

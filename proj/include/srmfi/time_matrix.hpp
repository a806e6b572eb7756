#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace srmfi {

// Row-major (rows x steps) matrix over the global clock grid. Column j holds
// the value at timestamp t_{j+1}.
class TimeMatrix
{
public:
    TimeMatrix() = default;
    TimeMatrix(std::size_t rows, std::size_t steps, double fill = 0.0)
        : rows_(rows), steps_(steps), values_(rows * steps, fill)
    {
    }

    std::size_t rows() const { return rows_; }
    std::size_t steps() const { return steps_; }
    bool empty() const { return values_.empty(); }

    double &at(std::size_t row, std::size_t step)
    {
        return values_[row * steps_ + step];
    }
    double at(std::size_t row, std::size_t step) const
    {
        return values_[row * steps_ + step];
    }

    std::span<double> row(std::size_t r)
    {
        return {values_.data() + r * steps_, steps_};
    }
    std::span<const double> row(std::size_t r) const
    {
        return {values_.data() + r * steps_, steps_};
    }

    std::span<double> data() { return values_; }
    std::span<const double> data() const { return values_; }

    bool same_shape(const TimeMatrix &other) const
    {
        return rows_ == other.rows_ && steps_ == other.steps_;
    }

    bool operator==(const TimeMatrix &) const = default;

private:
    std::size_t rows_ = 0;
    std::size_t steps_ = 0;
    std::vector<double> values_;
};

// Output spike trains A^l of one layer: one row per flattened neuron. Entries
// are 0/1 for spiking layers, counts after sum-pooling, and arbitrary reals
// only where a stuck-at fault rewrote a row.
class SpikeRecord : public TimeMatrix
{
public:
    using TimeMatrix::TimeMatrix;

    std::size_t neurons() const { return rows(); }

    double total() const;
    double row_sum(std::size_t neuron) const;
    std::size_t count_nonzero() const;

    bool operator==(const SpikeRecord &) const = default;
};

// Membrane potential u(t) of every neuron of a layer on the clock grid.
class MembraneTrace : public TimeMatrix
{
public:
    using TimeMatrix::TimeMatrix;

    bool operator==(const MembraneTrace &) const = default;
};

} // namespace srmfi

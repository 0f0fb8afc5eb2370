#pragma once

#include "tracemerge/error.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace tracemerge {

/// Dense pre-softmax scores over the vocabulary. Vectors coming from a
/// backend are finite; processed vectors may carry -inf as a mask sentinel.
struct LogitVector {
    std::vector<float> values;

    std::size_t size() const noexcept { return values.size(); }
    float operator[](std::size_t i) const { return values[i]; }

    friend bool operator==(const LogitVector &, const LogitVector &) = default;
};

/// Dense distribution over the vocabulary: non-negative, sums to 1 within 1e-6.
struct ProbVector {
    std::vector<double> values;

    std::size_t size() const noexcept { return values.size(); }
    double operator[](std::size_t i) const { return values[i]; }

    friend bool operator==(const ProbVector &, const ProbVector &) = default;
};

inline constexpr double kProbSumTolerance = 1e-6;

/// Throws InvariantError on NaN or +/-inf.
void require_finite(const LogitVector &v);

/// Throws InvariantError unless entries are >= 0 and sum to 1 within tolerance.
void require_distribution(const ProbVector &p);

/// Component-wise arithmetic mean. Accumulates in double in ascending list
/// order, divides once by K, then rounds to float. Bitwise reproducible.
LogitVector merge_logits(std::span<const LogitVector> vectors);

/// Mean of the per-vector softmax(z / temperature), same reduction order.
ProbVector merge_probs(std::span<const LogitVector> vectors, double temperature);

/// Max-subtracted softmax of logits / temperature. -inf entries get zero mass.
ProbVector softmax(const LogitVector &logits, double temperature);

/// Same as above over double-precision scores.
ProbVector softmax(std::span<const double> scores, double temperature);

namespace debug {

/// Fault injection for the selftest harness. When enabled, merge_logits uses
/// an order-dependent running average instead of the fixed reduction.
void set_corrupt_reduction_order(bool enabled) noexcept;
bool corrupt_reduction_order() noexcept;

} // namespace debug

} // namespace tracemerge

#include "tracemerge/logits.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <string>

namespace tracemerge {

namespace {

std::atomic<bool> g_corrupt_reduction{false};

void check_batch(std::span<const LogitVector> vectors) {
    if (vectors.empty()) throw InvariantError("merge of an empty list");
    const std::size_t n = vectors.front().size();
    if (n == 0) throw InvariantError("merge of zero-length vectors");
    for (std::size_t k = 0; k < vectors.size(); ++k) {
        if (vectors[k].size() != n) {
            throw InvariantError("logit vector " + std::to_string(k) + " has length " +
                                 std::to_string(vectors[k].size()) + ", expected " + std::to_string(n));
        }
        require_finite(vectors[k]);
    }
}

} // namespace

void require_finite(const LogitVector &v) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        if (!std::isfinite(v.values[i])) throw InvariantError("non-finite logit at index " + std::to_string(i));
    }
}

void require_distribution(const ProbVector &p) {
    double sum = 0.0;
    for (double x : p.values) {
        if (!(x >= 0.0)) throw InvariantError("negative or NaN probability");
        sum += x;
    }
    if (std::abs(sum - 1.0) > kProbSumTolerance) {
        throw InvariantError("probabilities sum to " + std::to_string(sum));
    }
}

LogitVector merge_logits(std::span<const LogitVector> vectors) {
    check_batch(vectors);
    const std::size_t n = vectors.front().size();
    const double count = static_cast<double>(vectors.size());
    std::vector<double> acc(n, 0.0);

    if (g_corrupt_reduction.load(std::memory_order_relaxed)) {
        acc.assign(vectors.front().values.begin(), vectors.front().values.end());
        for (std::size_t k = 1; k < vectors.size(); ++k) {
            for (std::size_t i = 0; i < n; ++i) acc[i] = 0.5 * (acc[i] + vectors[k].values[i]);
        }
        LogitVector out;
        out.values.assign(acc.begin(), acc.end());
        return out;
    }

    for (const auto &v : vectors) {
        for (std::size_t i = 0; i < n; ++i) acc[i] += static_cast<double>(v.values[i]);
    }
    LogitVector out;
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.values[i] = static_cast<float>(acc[i] / count);
    return out;
}

ProbVector merge_probs(std::span<const LogitVector> vectors, double temperature) {
    check_batch(vectors);
    const std::size_t n = vectors.front().size();
    std::vector<double> acc(n, 0.0);
    for (const auto &v : vectors) {
        const ProbVector p = softmax(v, temperature);
        for (std::size_t i = 0; i < n; ++i) acc[i] += p.values[i];
    }
    const double count = static_cast<double>(vectors.size());
    for (double &x : acc) x /= count;
    return ProbVector{std::move(acc)};
}

ProbVector softmax(std::span<const double> scores, double temperature) {
    if (!(temperature > 0.0) || !std::isfinite(temperature)) {
        throw InvariantError("softmax temperature must be positive");
    }
    if (scores.empty()) throw InvariantError("softmax of an empty vector");
    double peak = -std::numeric_limits<double>::infinity();
    for (double s : scores) {
        if (std::isnan(s) || s == std::numeric_limits<double>::infinity()) {
            throw InvariantError("softmax input contains NaN or +inf");
        }
        peak = std::max(peak, s);
    }
    if (peak == -std::numeric_limits<double>::infinity()) throw InvariantError("softmax over a fully masked vector");

    std::vector<double> out(scores.size());
    double total = 0.0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::exp((scores[i] - peak) / temperature);
        total += out[i];
    }
    for (double &x : out) x /= total;
    return ProbVector{std::move(out)};
}

ProbVector softmax(const LogitVector &logits, double temperature) {
    std::vector<double> scores(logits.values.begin(), logits.values.end());
    return softmax(scores, temperature);
}

namespace debug {

void set_corrupt_reduction_order(bool enabled) noexcept { g_corrupt_reduction.store(enabled); }
bool corrupt_reduction_order() noexcept { return g_corrupt_reduction.load(); }

} // namespace debug

} // namespace tracemerge

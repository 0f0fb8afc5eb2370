#include "oracles.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace oracle {

std::filesystem::path fixture(const std::string &relative) { return std::filesystem::path(TRACEMERGE_FIXTURE_DIR) / relative; }

std::string read_file(const std::filesystem::path &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

tracemerge::Json read_json(const std::filesystem::path &path) { return tracemerge::Json::parse(read_file(path)); }

std::vector<long double> softmax(const std::vector<long double> &scores, long double temperature) {
    long double peak = -INFINITY;
    for (auto s : scores) peak = s > peak ? s : peak;
    std::vector<long double> out(scores.size());
    long double total = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
        out[i] = std::isinf(scores[i]) ? 0.0L : std::exp((scores[i] - peak) / temperature);
        total += out[i];
    }
    for (auto &x : out) x /= total;
    return out;
}

std::size_t rank_of(const std::vector<long double> &scores, std::size_t i) {
    std::size_t rank = 0;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        if (scores[j] > scores[i] || (scores[j] == scores[i] && j < i)) ++rank;
    }
    return rank;
}

std::vector<bool> top_k_support(const std::vector<long double> &scores, std::size_t k) {
    std::vector<bool> keep(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) keep[i] = rank_of(scores, i) < k;
    return keep;
}

std::vector<std::vector<bool>> top_p_supports(const std::vector<long double> &probs, long double p, long double slack) {
    const std::size_t n = probs.size();
    std::vector<std::size_t> rank(n);
    for (std::size_t i = 0; i < n; ++i) rank[i] = rank_of(probs, i);
    auto support = [&](std::size_t r) {
        std::vector<bool> keep(n);
        for (std::size_t i = 0; i < n; ++i) keep[i] = rank[i] <= r;
        return keep;
    };
    auto mass = [&](std::size_t r) {
        long double m = 0;
        for (std::size_t i = 0; i < n; ++i) {
            if (rank[i] <= r) m += probs[i];
        }
        return m;
    };
    std::vector<std::vector<bool>> out;
    for (std::size_t r = 0; r < n; ++r) {
        const long double m = mass(r);
        if (m >= p + slack || r + 1 == n) {
            out.push_back(support(r));
            break;
        }
        if (m >= p - slack) out.push_back(support(r));
    }
    return out;
}

long double pass_at_k_enumerated(unsigned n, unsigned c, unsigned k) {
    unsigned long long hit = 0, total = 0;
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
        if (static_cast<unsigned>(__builtin_popcount(mask)) != k) continue;
        ++total;
        if (mask & ((1u << c) - 1u)) ++hit;
    }
    return static_cast<long double>(hit) / static_cast<long double>(total);
}

std::vector<std::pair<std::size_t, std::size_t>> suffix_repeats(const Tokens &body, std::size_t b_min, std::size_t b_max) {
    std::vector<std::pair<std::size_t, std::size_t>> out;
    const std::size_t n = body.size();
    for (std::size_t b = b_min; b <= b_max && b <= n; ++b) {
        std::size_t m = 1;
        while ((m + 1) * b <= n) {
            bool same = true;
            for (std::size_t i = 0; i < b; ++i) {
                if (body[n - (m + 1) * b + i] != body[n - b + i]) same = false;
            }
            if (!same) break;
            ++m;
        }
        if (m >= 2) out.emplace_back(b, m);
    }
    return out;
}

Tokens trim_scan(const Tokens &body, std::size_t b_min, std::size_t b_max) {
    std::size_t best_removed = 0, best_b = 0;
    for (auto [b, m] : suffix_repeats(body, b_min, b_max)) {
        const std::size_t removed = (m - 1) * b;
        if (removed > best_removed || (removed == best_removed && b > best_b)) {
            best_removed = removed;
            best_b = b;
        }
    }
    return Tokens(body.begin(), body.end() - static_cast<std::ptrdiff_t>(best_removed));
}

std::optional<std::size_t> find_delimiter(const Tokens &generated, const Tokens &delimiter) {
    for (std::size_t start = 0; start + delimiter.size() <= generated.size(); ++start) {
        bool match = true;
        for (std::size_t i = 0; i < delimiter.size(); ++i) {
            if (generated[start + i] != delimiter[i]) match = false;
        }
        if (match) return start + delimiter.size();
    }
    return std::nullopt;
}

tracemerge::RunConfig run_config(const tracemerge::Json &case_config) {
    tracemerge::Json j = case_config;
    j["prompts"] = "unused.jsonl";
    j["output"] = "unused.jsonl";
    return tracemerge::run_config_from_json(j, {});
}

} // namespace oracle

#include "selftest.hpp"

#include <tracemerge/eval.hpp>
#include <tracemerge/logits.hpp>
#include <tracemerge/pipeline.hpp>
#include <tracemerge/rng.hpp>
#include <tracemerge/sampling.hpp>
#include <tracemerge/scheduler.hpp>
#include <tracemerge/toy_backends.hpp>

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <functional>
#include <iomanip>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

namespace tracemerge::selftest {

namespace {

using Gen = std::mt19937_64;

// Thrown by a suite on its first failing case.
struct Failure {
    std::string detail;
};

template <typename... Args>
[[noreturn]] void fail(const Args &...args) {
    std::ostringstream os;
    os << std::setprecision(17);
    (os << ... << args);
    throw Failure{os.str()};
}

std::size_t scaled(std::size_t n, const Options &o) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(static_cast<double>(n) * o.scale)));
}

std::uint64_t pick(Gen &gen, std::uint64_t lo, std::uint64_t hi) {
    return std::uniform_int_distribution<std::uint64_t>(lo, hi)(gen);
}

LogitVector random_logits(Gen &gen, std::size_t n, float spread) {
    std::uniform_real_distribution<float> d(-spread, spread);
    LogitVector v;
    v.values.resize(n);
    for (auto &x : v.values) x = d(gen);
    return v;
}

std::vector<long double> naive_softmax(const std::vector<long double> &z) {
    const long double top = *std::max_element(z.begin(), z.end());
    std::vector<long double> p(z.size());
    long double sum = 0;
    for (std::size_t i = 0; i < z.size(); ++i) sum += p[i] = std::exp(z[i] - top);
    for (auto &x : p) x /= sum;
    return p;
}

std::string join(const Tokens &t) {
    std::string s;
    for (std::size_t i = 0; i < t.size(); ++i) s += (i ? "," : "") + std::to_string(t[i]);
    return "[" + s + "]";
}

// A random toy-hash engine: vocab in [8, max_vocab], eos 1, pad 0, a one- or
// two-token delimiter and a force rule so traces close in reasonable time.
struct ToyCase {
    EngineConfig engine;
    ToyHashParams params;
    Tokens prompt;

    ToyHashBackend backend() const { return ToyHashBackend(params, engine.vocab.eos_id(), engine.vocab.pad_id()); }
};

ToyCase random_toy(Gen &gen, std::uint32_t max_vocab, StrategyKind kind, std::uint32_t K, std::uint32_t N) {
    const auto V = static_cast<std::uint32_t>(pick(gen, 8, max_vocab));
    Tokens delim{static_cast<TokenId>(pick(gen, 2, V - 1))};
    if (pick(gen, 0, 1)) delim.push_back(static_cast<TokenId>(pick(gen, 2, V - 1)));
    ToyCase c{EngineConfig{.vocab = Vocabulary(V, 1, 0, delim)}, {}, {}};
    c.params = ToyHashParams{gen(), V, static_cast<std::uint32_t>(pick(gen, 1, 4)),
                             static_cast<std::uint32_t>(pick(gen, 0, 1) ? pick(gen, 3, 14) : 0), delim.front()};
    c.engine.strategy = StrategyConfig{kind, false, K, N, static_cast<std::uint32_t>(pick(gen, 4, 24)),
                                       static_cast<std::uint32_t>(pick(gen, 1, 10))};
    auto &p = c.engine.policy;
    p.seed = gen();
    p.temp_think = 0.3 + 1.2 * std::uniform_real_distribution<double>()(gen);
    p.temp_answer = 0.3 + 1.2 * std::uniform_real_distribution<double>()(gen);
    if (pick(gen, 0, 1)) p.top_k = static_cast<std::uint32_t>(pick(gen, 1, V));
    if (pick(gen, 0, 1)) p.top_p = 0.5 + 0.5 * std::uniform_real_distribution<double>()(gen);
    if (pick(gen, 0, 1)) p.repetition_penalty = 1.0 + std::uniform_real_distribution<double>()(gen);
    p.greedy = pick(gen, 0, 5) == 0;
    c.engine.merge_mode = pick(gen, 0, 3) == 0 ? MergeMode::Probs : MergeMode::Logits;
    for (std::size_t i = 0, n = pick(gen, 1, 6); i < n; ++i) c.prompt.push_back(static_cast<TokenId>(pick(gen, 2, V - 1)));
    return c;
}

StrategyKind random_kind(Gen &gen) {
    return static_cast<StrategyKind>(pick(gen, 0, 2));
}

// --- merge -----------------------------------------------------------------

std::size_t suite_merge(Gen &gen, const Options &o) {
    const std::size_t sets = scaled(kMergeSets, o);
    for (std::size_t s = 0; s < sets; ++s) {
        const std::size_t K = pick(gen, 1, 8), V = pick(gen, 1, 16);
        std::vector<LogitVector> vs;
        for (std::size_t k = 0; k < K; ++k) vs.push_back(random_logits(gen, V, 20.0f));
        const LogitVector merged = merge_logits(vs);

        auto perm = vs;
        std::shuffle(perm.begin(), perm.end(), gen);
        const LogitVector permuted = merge_logits(perm);
        for (std::size_t i = 0; i < V; ++i) {
            if (std::abs(permuted[i] - merged[i]) > 1e-6) {
                fail("set ", s, ": permutation moved entry ", i, " from ", merged[i], " to ", permuted[i]);
            }
            long double mean = 0;
            for (const auto &v : vs) mean += v[i];
            mean /= static_cast<long double>(K);
            if (std::abs(static_cast<long double>(merged[i]) - mean) > 1e-5L) {
                fail("set ", s, ": entry ", i, " is ", merged[i], ", mean is ", static_cast<double>(mean));
            }
        }

        // Per-vector shifts c_k move the merged vector by mean(c): softmax unchanged.
        auto shifted = vs;
        std::uniform_real_distribution<float> shift(-10.0f, 10.0f);
        for (auto &v : shifted) {
            const float c = shift(gen);
            for (auto &x : v.values) x += c;
        }
        const ProbVector a = softmax(merged, 1.0), b = softmax(merge_logits(shifted), 1.0);
        for (std::size_t i = 0; i < V; ++i) {
            if (std::abs(a[i] - b[i]) > 1e-6) fail("set ", s, ": shift changed p[", i, "] from ", a[i], " to ", b[i]);
        }
    }
    return sets;
}

// --- divergence ------------------------------------------------------------

std::size_t suite_divergence(Gen &, const Options &) {
    const std::vector<LogitVector> witness{LogitVector{{20, 0}}, LogitVector{{0, 6}}, LogitVector{{0, 6}}};
    const LogitVector ml = merge_logits(witness);
    const ProbVector mp = merge_probs(witness, 1.0);
    const auto logit_arg = std::max_element(ml.values.begin(), ml.values.end()) - ml.values.begin();
    const auto prob_arg = std::max_element(mp.values.begin(), mp.values.end()) - mp.values.begin();

    std::vector<long double> naive_mean(2, 0);
    std::vector<long double> naive_probs(2, 0);
    for (const auto &v : witness) {
        const auto p = naive_softmax({v[0], v[1]});
        for (int i = 0; i < 2; ++i) {
            naive_mean[i] += v[i] / 3.0L;
            naive_probs[i] += p[i] / 3.0L;
        }
    }
    const int ref_logit = naive_mean[1] > naive_mean[0] ? 1 : 0;
    const int ref_prob = naive_probs[1] > naive_probs[0] ? 1 : 0;
    if (logit_arg != 0 || ref_logit != 0) fail("logit merge argmax ", logit_arg, ", reference ", ref_logit);
    if (prob_arg != 1 || ref_prob != 1) fail("prob merge argmax ", prob_arg, ", reference ", ref_prob);
    for (int i = 0; i < 2; ++i) {
        if (std::abs(mp[i] - static_cast<double>(naive_probs[i])) > 1e-9) fail("prob merge entry ", i, " off");
    }
    return 1;
}

// --- sampler ---------------------------------------------------------------

std::size_t suite_sampler(Gen &gen, const Options &o) {
    const std::size_t cases = scaled(kSamplerCases, o);
    for (std::size_t c = 0; c < cases; ++c) {
        const std::size_t V = pick(gen, 1, 16);
        LogitVector z = random_logits(gen, V, 8.0f);
        // Coarse values so ties actually occur.
        if (pick(gen, 0, 2) == 0) {
            for (auto &x : z.values) x = static_cast<float>(std::round(x / 2));
        }
        const auto k = static_cast<std::uint32_t>(pick(gen, 1, V));
        const LogitVector kept = apply_top_k(z, k);
        for (std::size_t i = 0; i < V; ++i) {
            std::size_t above = 0;
            for (std::size_t j = 0; j < V; ++j) above += z[j] > z[i] || (z[j] == z[i] && j < i);
            const bool in = above < k;
            if (in ? kept[i] != z[i] : kept[i] != -INFINITY) fail("case ", c, ": top-", k, " wrong at id ", i);
        }

        const double temp = 0.25 + 2.0 * std::uniform_real_distribution<double>()(gen);
        const ProbVector probs = softmax(z, temp);
        const double p = pick(gen, 0, 9) == 0 ? 1.0 : 0.05 + 0.9 * std::uniform_real_distribution<double>()(gen);
        const ProbVector nucleus = apply_top_p(probs, p);
        // Rank by counting, then find the shortest prefix reaching p.
        std::vector<std::size_t> order(V);
        for (std::size_t i = 0; i < V; ++i) {
            std::size_t r = 0;
            for (std::size_t j = 0; j < V; ++j) r += probs[j] > probs[i] || (probs[j] == probs[i] && j < i);
            order[r] = i;
        }
        long double mass = 0;
        std::size_t keep = V;
        for (std::size_t r = 0; r < V; ++r) {
            mass += probs[order[r]];
            if (p < 1.0 && mass >= p - 1e-12L) {
                keep = r + 1;
                break;
            }
        }
        std::size_t got = 0;
        for (double x : nucleus.values) got += x > 0;
        std::size_t positive = 0;
        for (std::size_t r = 0; r < keep; ++r) positive += probs[order[r]] > 0;
        if (got != positive && got != positive + 1) fail("case ", c, ": top-p ", p, " kept ", got, ", expected ", positive);
        long double kept_mass = 0;
        for (std::size_t r = 0; r < got; ++r) kept_mass += probs[order[r]];
        for (std::size_t r = 0; r < V; ++r) {
            const long double want = r < got ? probs[order[r]] / kept_mass : 0.0L;
            if (std::abs(nucleus[order[r]] - static_cast<double>(want)) > 1e-6) {
                fail("case ", c, ": top-p mass at id ", order[r], " is ", nucleus[order[r]]);
            }
        }

        // Inverse-CDF selection reads exactly one uniform.
        SamplingPolicy policy;
        const std::uint64_t seed = gen();
        Rng rng(seed), twin(seed);
        const TokenId t = select_token(nucleus, policy, rng);
        const long double u = twin.uniform();
        long double total = 0, cdf = 0;
        for (double x : nucleus.values) total += x;
        TokenId want = 0;
        for (TokenId i = 0; i < V; ++i) {
            if (nucleus[i] == 0) continue;
            want = i;
            cdf += nucleus[i];
            if (u * total < cdf) break;
        }
        if (t != want) fail("case ", c, ": drew ", t, ", inverse CDF gives ", want);
        if (!(rng == twin)) fail("case ", c, ": selection consumed more than one draw");
    }
    return cases;
}

// --- estimator -------------------------------------------------------------

std::size_t suite_estimator(Gen &, const Options &) {
    std::size_t cases = 0;
    for (unsigned n = 1; n <= kEstimatorMaxN; ++n) {
        for (unsigned c = 0; c <= n; ++c) {
            for (unsigned k = 1; k <= n; ++k) {
                // Samples 0..c-1 are correct; count k-subsets containing one.
                std::uint64_t hit = 0, all = 0;
                for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
                    if (static_cast<unsigned>(std::popcount(mask)) != k) continue;
                    ++all;
                    hit += (mask & ((1u << c) - 1)) != 0;
                }
                const long double want = static_cast<long double>(hit) / static_cast<long double>(all);
                const double got = pass_at_k(n, c, k);
                if (std::abs(static_cast<long double>(got) - want) > 1e-12L) {
                    fail("pass@", k, " with n=", n, " c=", c, ": ", got, " vs ", static_cast<double>(want));
                }
                ++cases;
            }
        }
    }
    return cases;
}

// --- trimming --------------------------------------------------------------

// Whether `s` ends with two copies of some block of length >= b_min.
bool has_trailing_square(const Tokens &s, std::size_t b_min) {
    for (std::size_t b = b_min; 2 * b <= s.size(); ++b) {
        if (std::equal(s.end() - static_cast<std::ptrdiff_t>(b), s.end(), s.end() - static_cast<std::ptrdiff_t>(2 * b))) {
            return true;
        }
    }
    return false;
}

bool is_primitive(const Tokens &block) {
    const std::size_t b = block.size();
    for (std::size_t d = 1; d < b; ++d) {
        if (b % d != 0) continue;
        bool periodic = true;
        for (std::size_t i = d; i < b && periodic; ++i) periodic = block[i] == block[i - d];
        if (periodic) return false;
    }
    return true;
}

std::size_t suite_trimming(Gen &gen, const Options &o) {
    const std::size_t n = scaled(kTrimSequences, o);
    const std::size_t b_min = kDefaultTrimMinBlock, b_max = 16;
    for (std::size_t c = 0; c < n; ++c) {
        // Prefix and block use disjoint alphabets, so the only trailing
        // repetition is the planted one.
        Tokens prefix;
        for (std::size_t i = 0, len = pick(gen, 0, 12); i < len; ++i) prefix.push_back(static_cast<TokenId>(pick(gen, 100, 110)));
        Tokens block;
        do {
            block.clear();
            for (std::size_t i = 0, b = pick(gen, b_min, 8); i < b; ++i) block.push_back(static_cast<TokenId>(pick(gen, 0, 4)));
        } while (!is_primitive(block) || has_trailing_square(block, 1));
        const std::size_t m = pick(gen, 2, 6);
        Tokens seq = prefix;
        for (std::size_t i = 0; i < m; ++i) seq.insert(seq.end(), block.begin(), block.end());
        Tokens want = prefix;
        want.insert(want.end(), block.begin(), block.end());

        const Tokens once = trim_repeated_suffix(seq, b_min, b_max);
        if (once != want) fail("planted ", m, "x", join(block), " after ", join(prefix), ": got ", join(once));
        if (trim_repeated_suffix(once, b_min, b_max) != once) fail("not idempotent on ", join(seq));

        Tokens plain;
        do {
            plain.clear();
            for (std::size_t i = 0, len = pick(gen, 0, 20); i < len; ++i) plain.push_back(static_cast<TokenId>(pick(gen, 0, 3)));
        } while (has_trailing_square(plain, b_min));
        if (trim_repeated_suffix(plain, b_min, b_max) != plain) fail("changed unrepeated ", join(plain));
    }
    return n;
}

// --- strategy --------------------------------------------------------------

std::size_t suite_strategy(Gen &gen, const Options &o) {
    const std::size_t pools = scaled(kStrategyPools, o);
    const Vocabulary vocab(16, 1, 0, {9});
    for (std::size_t c = 0; c < pools; ++c) {
        const auto N = static_cast<std::uint32_t>(pick(gen, 1, 8));
        const auto K = static_cast<std::uint32_t>(pick(gen, 1, N));
        std::vector<std::size_t> lengths(N);
        for (auto &l : lengths) l = pick(gen, 1, 10);
        std::vector<Trace> thinking;
        for (std::size_t i = 0; i < N; ++i) thinking.emplace_back(Tokens{2}, Tokens{});
        TracePool pool(thinking);
        std::vector<std::size_t> by_step(N);
        std::iota(by_step.begin(), by_step.end(), 0);
        std::stable_sort(by_step.begin(), by_step.end(), [&](auto a, auto b) { return lengths[a] < lengths[b]; });
        for (std::size_t i : by_step) {
            Tokens gen_tokens(lengths[i] - 1, 3);
            gen_tokens.push_back(9);
            pool.complete(i, Trace({2}, gen_tokens, TracePhase::Finished, lengths[i], vocab.delimiter()), lengths[i]);
        }

        const StrategyConfig shortest{StrategyKind::ShortestK, false, K, N, 64, 8};
        const auto chosen = select_traces(pool, shortest);
        std::vector<std::size_t> want(N);
        std::iota(want.begin(), want.end(), 0);
        std::sort(want.begin(), want.end(), [&](auto a, auto b) { return std::pair{lengths[a], a} < std::pair{lengths[b], b}; });
        want.resize(K);
        std::sort(want.begin(), want.end());
        if (!chosen || *chosen != want) fail("pool ", c, ": ShortestK picked the wrong traces");

        const StrategyConfig all_shortest{StrategyKind::ShortestK, false, N, N, 64, 8};
        const StrategyConfig direct{StrategyKind::DirectMerge, false, N, N, 64, 8};
        if (select_traces(pool, all_shortest) != select_traces(pool, direct)) fail("pool ", c, ": ShortestK(K=N) differs");

        const StrategyConfig early{StrategyKind::EarlyReady, false, K, N, 64, 8};
        const auto e = merge_start_step(pool.completions(), N, early);
        const auto d = merge_start_step(pool.completions(), N, direct);
        if (!e || !d || *e > *d) fail("pool ", c, ": EarlyReady starts after DirectMerge");
    }

    // ShortestK with K = N decodes exactly like DirectMerge.
    const std::size_t decodes = scaled(40, o);
    for (std::size_t c = 0; c < decodes; ++c) {
        const auto K = static_cast<std::uint32_t>(pick(gen, 1, 4));
        ToyCase t = random_toy(gen, 48, StrategyKind::DirectMerge, K, K);
        auto backend = t.backend();
        const DecodeRecord a = run_pipeline(t.prompt, t.engine, backend);
        t.engine.strategy.kind = StrategyKind::ShortestK;
        const DecodeRecord b = run_pipeline(t.prompt, t.engine, backend);
        if (a.answer != b.answer) fail("decode ", c, ": ShortestK(K=N) answer ", join(b.answer), " vs ", join(a.answer));
    }
    return pools + decodes;
}

// --- pipeline --------------------------------------------------------------

std::size_t suite_pipeline(Gen &gen, const Options &o) {
    const std::size_t n = scaled(kPipelineCases, o);
    for (std::size_t c = 0; c < n; ++c) {
        const auto K = static_cast<std::uint32_t>(pick(gen, 1, 4));
        ToyCase t = random_toy(gen, 64, StrategyKind::DirectMerge, K, K);
        auto backend = t.backend();
        const DecodeRecord two = run_two_stage(t.prompt, t.engine, backend);
        t.engine.pipeline = PipelineShape::OneStep;
        const DecodeRecord one = run_one_step(t.prompt, t.engine, backend);
        if (!two.valid || !one.valid) fail("case ", c, ": invalid record");
        if (two.answer != one.answer) fail("case ", c, ": two_stage ", join(two.answer), " vs one_step ", join(one.answer));
    }
    return n;
}

// --- mask ------------------------------------------------------------------

std::size_t suite_mask(Gen &gen, const Options &o) {
    const std::size_t n = scaled(kMaskPools, o);
    for (std::size_t c = 0; c < n; ++c) {
        const auto V = static_cast<std::uint32_t>(pick(gen, 4, 32));
        const TokenId pad = 0;
        const ToyHashParams params{gen(), V, static_cast<std::uint32_t>(pick(gen, 1, 5)),
                                   static_cast<std::uint32_t>(pick(gen, 0, 8)), static_cast<TokenId>(pick(gen, 2, V - 1))};
        ToyHashBackend hash(params, 1, pad);

        Json rows = Json::array();
        for (std::size_t r = 0, count = pick(gen, 0, 6); r < count; ++r) {
            Json suffix = Json::array();
            for (std::size_t i = 0, len = pick(gen, 1, 3); i < len; ++i) suffix.push_back(pick(gen, 1, V - 1));
            Json logits = Json::array();
            for (std::uint32_t v = 0; v < V; ++v) logits.push_back(static_cast<double>(pick(gen, 0, 20)) - 10.0);
            rows.push_back(Json{{"suffix", suffix}, {"logits", logits}});
        }
        Json fallback = Json::array();
        for (std::uint32_t v = 0; v < V; ++v) fallback.push_back(0.5 * static_cast<double>(v));
        // Duplicate suffixes are rejected by the script loader; keep the first.
        Json unique = Json::array();
        for (const auto &r : rows) {
            if (std::none_of(unique.begin(), unique.end(), [&](const Json &u) { return u["suffix"] == r["suffix"]; })) {
                unique.push_back(r);
            }
        }
        ToyScriptedBackend scripted(LogitScript::from_json(
            Json{{"vocab_size", V}, {"eos_id", 1}, {"pad_id", pad}, {"default", fallback}, {"rows", unique}}));

        // Left pads plus interior pads, as the one-step pipeline produces.
        const std::size_t batch = pick(gen, 1, 5), width = pick(gen, 1, 12);
        std::vector<Tokens> ids(batch, Tokens(width, pad));
        std::vector<std::vector<bool>> mask(batch, std::vector<bool>(width, false));
        for (std::size_t r = 0; r < batch; ++r) {
            const std::size_t lead = pick(gen, 0, width - 1);
            for (std::size_t i = lead; i < width; ++i) {
                if (i == lead || pick(gen, 0, 4) != 0) {
                    mask[r][i] = true;
                    ids[r][i] = static_cast<TokenId>(pick(gen, 1, V - 1));
                }
            }
        }
        const PaddedBatch padded(ids, mask, pad);
        for (Backend *b : {static_cast<Backend *>(&hash), static_cast<Backend *>(&scripted)}) {
            const auto masked = b->next_logits_masked(padded);
            const auto plain = b->next_logits(padded.logical_contexts());
            for (std::size_t r = 0; r < batch; ++r) {
                if (masked[r] != plain[r]) fail("pool ", c, " row ", r, ": masked logits differ on ", b->descriptor().model);
            }
        }
    }
    return n;
}

// --- K = 1 -----------------------------------------------------------------

std::size_t suite_k1(Gen &gen, const Options &o) {
    const std::size_t n = scaled(kK1Configs, o);
    for (std::size_t c = 0; c < n; ++c) {
        const StrategyKind kind = random_kind(gen);
        const auto N = static_cast<std::uint32_t>(kind == StrategyKind::DirectMerge ? 1 : pick(gen, 1, 4));
        ToyCase t = random_toy(gen, 64, kind, 1, N);
        // Plain decoding is the logit path; the prob-merge ablation applies
        // the penalty to log-probabilities instead.
        t.engine.merge_mode = MergeMode::Logits;
        auto backend = t.backend();
        const DecodeRecord rec = run_pipeline(t.prompt, t.engine, backend);
        if (!rec.valid || rec.selected.size() != 1) fail("config ", c, ": no single selected trace");
        const std::size_t k = rec.selected.front();
        const PlainResult plain = decode_plain(t.prompt, k, t.engine, backend);
        if (rec.answer != plain.answer) {
            fail("config ", c, " (", to_string(kind), "): ensemble ", join(rec.answer), " vs plain ", join(plain.answer));
        }
        if (rec.traces[k].generated != plain.trace.generated()) fail("config ", c, ": thinking differs");
    }
    return n;
}

// --- collapse --------------------------------------------------------------

std::size_t suite_collapse(Gen &gen, const Options &o) {
    const std::size_t n = scaled(kCollapseCases, o);
    for (std::size_t c = 0; c < n; ++c) {
        ToyCase t = random_toy(gen, 64, StrategyKind::DirectMerge, 1, 1);
        auto backend = t.backend();
        const ThinkingResult thought = generate_thinking(t.prompt, t.engine, backend);
        const Trace trace = thought.pool.traces().front();
        const AnswerResult single = decode_answer({trace}, t.engine, backend, false);
        for (std::uint32_t K : {2u, 4u, 8u}) {
            EngineConfig e = t.engine;
            e.strategy.K = e.strategy.N = K;
            const std::vector<Trace> copies(K, trace);
            for (bool use_mask : {false, true}) {
                const AnswerResult many = decode_answer(copies, e, backend, use_mask);
                if (many.answer != single.answer) {
                    fail("case ", c, ": ", K, " copies give ", join(many.answer), " vs ", join(single.answer));
                }
            }
        }
    }
    return n;
}

using SuiteFn = std::function<std::size_t(Gen &, const Options &)>;

const std::vector<std::pair<std::string, SuiteFn>> &registry() {
    static const std::vector<std::pair<std::string, SuiteFn>> suites{
        {"merge", suite_merge},         {"divergence", suite_divergence}, {"sampler", suite_sampler},
        {"estimator", suite_estimator}, {"trimming", suite_trimming},     {"strategy", suite_strategy},
        {"pipeline", suite_pipeline},   {"mask", suite_mask},             {"k1", suite_k1},
        {"collapse", suite_collapse}};
    return suites;
}

} // namespace

const std::vector<std::string> &suite_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> out;
        for (const auto &[name, _] : registry()) out.push_back(name);
        return out;
    }();
    return names;
}

SuiteResult run_suite(std::string_view name, const Options &options) {
    const auto &suites = registry();
    const auto it = std::find_if(suites.begin(), suites.end(), [&](const auto &s) { return s.first == name; });
    if (it == suites.end()) throw std::invalid_argument("unknown suite '" + std::string(name) + "'");
    Gen gen(options.seed ^ std::hash<std::string_view>{}(name));
    SuiteResult result{it->first};
    const auto start = std::chrono::steady_clock::now();
    try {
        result.cases = it->second(gen, options);
    } catch (const Failure &f) {
        result.passed = false;
        result.detail = f.detail;
    } catch (const std::exception &e) {
        result.passed = false;
        result.detail = std::string("exception: ") + e.what();
    }
    result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return result;
}

bool run_all(std::ostream &out, const std::optional<std::string> &only, const Options &options) {
    bool ok = true;
    for (const auto &name : suite_names()) {
        if (only && *only != name) continue;
        const SuiteResult r = run_suite(name, options);
        ok = ok && r.passed;
        out << (r.passed ? "PASS " : "FAIL ") << std::left << std::setw(11) << r.name << std::right << std::setw(6)
            << r.cases << " cases " << std::fixed << std::setprecision(2) << r.seconds << "s";
        if (!r.passed) out << "  " << r.detail;
        out << '\n';
    }
    return ok;
}

} // namespace tracemerge::selftest

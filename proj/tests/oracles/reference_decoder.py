#!/usr/bin/env python3
"""Independent reference for the toy backends, the generator and the decode loop.

Written from the documented rules only (README "Pinned algorithms"), sharing no
code with the C++ engine. Run once to regenerate the frozen fixtures:

    python3 tests/oracles/reference_decoder.py tests/fixtures/reference
    python3 tests/oracles/reference_decoder.py --golden tests/fixtures/golden

Outputs:
    regression.json         single values (toy-hash vector, seed-42 draw)
    cases.json              end-to-end decode cases with expected transcripts
    reference_answers.json  per-prompt answers for the golden run config
"""

import json
import math
import random
import struct
import sys
from pathlib import Path

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x):
    z = (x + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def unit(x):
    return (x >> 11) * 2.0**-53


def rotl(x, k):
    return ((x << k) | (x >> (64 - k))) & MASK64


class Rng:
    def __init__(self, seed):
        self.s = [splitmix64((seed + i * GOLDEN) & MASK64) for i in range(4)]

    def next_u64(self):
        s = self.s
        result = (rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = rotl(s[3], 45)
        return result

    def uniform(self):
        return unit(self.next_u64())


def f32(x):
    return struct.unpack("<f", struct.pack("<f", x))[0]


def fnv1a64(ids):
    h = 0xCBF29CE484222325
    for t in ids:
        for byte in struct.pack("<I", t):
            h ^= byte
            h = (h * 0x100000001B3) & MASK64
    return h


def toy_hash(context, seed, vocab, m, force_after, delim_first):
    window = context[-m:] if len(context) > m else context
    key = fnv1a64(window) ^ seed
    force = force_after > 0 and len(context) >= force_after and delim_first not in context
    out = []
    for v in range(vocab):
        z = 10.0 * unit(splitmix64(key ^ v)) - 5.0
        if force and v == delim_first:
            z += 20.0
        out.append(f32(z))
    return out


# Processor stack ------------------------------------------------------------

NEG_INF = float("-inf")


def penalize(scores, history, penalty):
    scores = list(scores)
    for t in set(history):
        scores[t] = scores[t] / penalty if scores[t] > 0 else scores[t] * penalty
    return scores


def top_k_mask(scores, k):
    if k >= len(scores):
        return list(scores)
    keep = sorted(range(len(scores)), key=lambda i: (-scores[i], i))[:k]
    return [scores[i] if i in keep else NEG_INF for i in range(len(scores))]


def softmax(scores, temperature):
    peak = max(scores)
    ex = [math.exp((s - peak) / temperature) for s in scores]
    total = 0.0
    for e in ex:
        total += e
    return [e / total for e in ex]


def top_p(probs, p):
    if p == 1.0:
        return list(probs)
    order = sorted(range(len(probs)), key=lambda i: (-probs[i], i))
    mass = 0.0
    keep = []
    for i in order:
        mass += probs[i]
        keep.append(i)
        if mass >= p:
            break
    return [probs[i] / mass if i in keep else 0.0 for i in range(len(probs))]


def choose(scores, history, temperature, policy, rng):
    s = penalize(scores, history, policy["repetition_penalty"])
    if policy["top_k"] is not None:
        s = top_k_mask(s, policy["top_k"])
    probs = softmax(s, temperature)
    if policy["top_p"] is not None:
        probs = top_p(probs, policy["top_p"])
    if policy["greedy"]:
        best = 0
        for i in range(1, len(s)):
            if s[i] > s[best]:
                best = i
        return best
    total = 0.0
    for x in probs:
        total += x
    target = rng.uniform() * total
    cdf = 0.0
    last = 0
    for i, x in enumerate(probs):
        if x == 0.0:
            continue
        last = i
        cdf += x
        if target < cdf:
            return i
    return last


def merge_logits(rows):
    n = len(rows[0])
    acc = [0.0] * n
    for r in rows:
        for i in range(n):
            acc[i] += r[i]
    return [f32(a / len(rows)) for a in acc]


def merge_probs(rows, temperature):
    n = len(rows[0])
    acc = [0.0] * n
    for r in rows:
        p = softmax(r, temperature)
        for i in range(n):
            acc[i] += p[i]
    return [a / len(rows) for a in acc]


# Scheduling ------------------------------------------------------------------


def ends_with(seq, suffix):
    return len(seq) >= len(suffix) and seq[len(seq) - len(suffix):] == suffix


def trim_suffix(body, b_min, b_max):
    """Brute force over every (b, m): remove the most tokens, ties to larger b."""
    best = None
    for b in range(b_min, b_max + 1):
        m = 1
        while (m + 1) * b <= len(body) and body[len(body) - (m + 1) * b: len(body) - m * b] == body[len(body) - b:]:
            m += 1
        if m >= 2:
            cand = ((m - 1) * b, b)
            if best is None or cand > best:
                best = cand
    if best is None:
        return list(body)
    return list(body[: len(body) - best[0]])


def think(prompt, cfg, model):
    vocab = cfg["vocabulary"]
    delim = vocab["delimiter"]
    strat = cfg["strategy"]
    pol = cfg["sampling"]
    n, k = strat["N"], strat["K"]
    force_from = strat["max_think_tokens"] - len(delim)
    rngs = [Rng(pol["seed"] ^ splitmix64(i)) for i in range(n)]
    gen = [[] for _ in range(n)]
    done = [False] * n
    forced = [False] * n
    completions = []
    step = 0

    def finished():
        ready = sum(done)
        return ready >= k if strat["kind"] == "EarlyReady" else ready == n

    while not finished():
        step += 1
        for i in range(n):
            if done[i]:
                continue
            if len(gen[i]) < force_from:
                z = model(prompt + gen[i])
                tok = choose(z, gen[i], pol["temp_think"], pol, rngs[i])
            else:
                tok = delim[len(gen[i]) - force_from]
                forced[i] = True
            gen[i].append(tok)
            if ends_with(gen[i], delim):
                done[i] = True
                completions.append((step, i))
    return gen, done, forced, completions, step


def select(gen, done, completions, strat):
    n, k = strat["N"], strat["K"]
    if strat["kind"] == "DirectMerge":
        return list(range(n))
    if strat["kind"] == "EarlyReady":
        return sorted(i for _, i in sorted(completions)[:k])
    return sorted(sorted(range(n), key=lambda i: (len(gen[i]), i))[:k])


def answer_loop(contexts, cfg, model, seed, merge):
    vocab = cfg["vocabulary"]
    pol = cfg["sampling"]
    rng = Rng(seed)
    answer = []
    while True:
        if answer and answer[-1] == vocab["eos_id"]:
            break
        if len(answer) >= cfg["strategy"]["max_answer_tokens"]:
            break
        rows = [model(c + answer) for c in contexts]
        if merge == "logits":
            scores = [float(x) for x in merge_logits(rows)]
            tok = choose(scores, answer, pol["temp_answer"], pol, rng)
        else:
            p = merge_probs(rows, pol["temp_answer"])
            scores = [math.log(x) if x > 0 else NEG_INF for x in p]
            tok = choose(scores, answer, 1.0, pol, rng)
        answer.append(tok)
    return answer


def render(tokens, eos):
    if tokens and tokens[-1] == eos:
        tokens = tokens[:-1]
    return " ".join(str(t) for t in tokens)


def decode(prompt, cfg):
    be = cfg["backend"]
    vocab = cfg["vocabulary"]
    delim = vocab["delimiter"]
    strat = cfg["strategy"]

    def model(ctx):
        return toy_hash(ctx, be["seed"], vocab["size"], be["m"], be["force_after"], delim[0])

    gen, done, forced, completions, steps = think(prompt, cfg, model)
    selected = select(gen, done, completions, strat)
    contexts = []
    for i in selected:
        reasoning = gen[i]
        if strat["trim_suffix"]:
            body = trim_suffix(reasoning[: len(reasoning) - len(delim)], cfg["trim"]["min_block"], cfg["trim"]["max_block"])
            reasoning = body + delim
        contexts.append(prompt + reasoning)
    answer = answer_loop(contexts, cfg, model, cfg["sampling"]["seed"], cfg["merge_mode"])
    votes = []
    if cfg["vote"]:
        for ctx, i in zip(contexts, selected):
            seed = splitmix64(cfg["sampling"]["seed"] ^ splitmix64(i))
            votes.append(render(answer_loop([ctx], cfg, model, seed, "logits"), vocab["eos_id"]))
    return {
        "thinking": gen,
        "ready": done,
        "forced": forced,
        "thinking_steps": steps,
        "selected": selected,
        "answer": answer,
        "trace_answers": votes,
    }


# Case generation -------------------------------------------------------------


def random_case(r):
    size = r.choice([8, 12, 16, 24, 32, 64])
    ids = r.sample(range(size), 3)
    eos, pad, d0 = ids
    delim = [d0] if r.random() < 0.6 else [d0, r.choice([t for t in range(size) if t != pad])]
    kind = r.choice(["DirectMerge", "EarlyReady", "ShortestK"])
    k = r.randint(1, 4)
    n = k if kind == "DirectMerge" else r.randint(k, k + 3)
    greedy = r.random() < 0.2
    cfg = {
        "vocabulary": {"size": size, "eos_id": eos, "pad_id": pad, "delimiter": delim},
        "backend": {"type": "toy-hash", "seed": r.randrange(1 << 32), "m": r.randint(1, 5),
                    "force_after": r.choice([0, r.randint(4, 20)])},
        "strategy": {"kind": kind, "K": k, "N": n, "trim_suffix": r.random() < 0.3,
                     "max_think_tokens": r.randint(len(delim) + 1, 24), "max_answer_tokens": r.randint(1, 10)},
        "sampling": {"temp_think": r.choice([0.3, 0.6, 1.0, 1.5]), "temp_answer": r.choice([0.3, 0.6, 1.0]),
                     "top_k": r.choice([None, 1, 3, 8]), "top_p": r.choice([None, 0.5, 0.9, 1.0]),
                     "repetition_penalty": r.choice([1.0, 1.1, 1.5]), "seed": r.randrange(1 << 63), "greedy": greedy},
        "merge_mode": r.choice(["logits", "probs"]),
        "pipeline": "two_stage",
        "vote": r.random() < 0.3,
        "trim": {"min_block": 1, "max_block": r.choice([4, 64])},
    }
    prompt = [r.randrange(size) for _ in range(r.randint(1, 6))]
    return cfg, prompt


def trimming_case(r):
    # Low-entropy thinking so repeated suffixes actually occur.
    cfg, prompt = random_case(r)
    cfg["vocabulary"]["size"] = 8
    voc = cfg["vocabulary"]
    voc["eos_id"], voc["pad_id"], d0 = r.sample(range(8), 3)
    voc["delimiter"] = [d0]
    cfg["backend"]["m"] = 1
    cfg["backend"]["force_after"] = 0
    cfg["sampling"]["greedy"] = True
    cfg["sampling"]["repetition_penalty"] = 1.0
    cfg["strategy"]["trim_suffix"] = True
    cfg["strategy"]["max_think_tokens"] = 20
    prompt = [t % 8 for t in prompt]
    return cfg, prompt


def golden(directory):
    cfg = json.loads((directory / "config.json").read_text())
    cfg.setdefault("trim", {"min_block": 2, "max_block": 64})
    cfg["backend"].setdefault("m", 4)
    cfg["backend"].setdefault("force_after", 0)
    answers = {}
    for line in (directory / cfg["prompts"]).read_text().splitlines():
        if not line.strip():
            continue
        p = json.loads(line)
        d = decode(p["tokens"], cfg)
        answers[p["id"]] = {"selected": d["selected"], "answer": d["answer"], "trace_answers": d["trace_answers"]}
    (directory / "reference_answers.json").write_text(json.dumps(answers, indent=1) + "\n")
    print(f"wrote {len(answers)} reference answers to {directory}")


def main():
    if len(sys.argv) > 2 and sys.argv[1] == "--golden":
        golden(Path(sys.argv[2]))
        return
    out = Path(sys.argv[1] if len(sys.argv) > 1 else ".")
    out.mkdir(parents=True, exist_ok=True)

    regression = {
        "toy_hash_context": [1, 2],
        "toy_hash_seed": 7,
        "toy_hash_vocab": 8,
        "toy_hash_m": 4,
        "toy_hash_logits": [f32(x) for x in toy_hash([1, 2], 7, 8, 4, 0, 0)],
        "toy_hash_logits_bits": [struct.unpack("<I", struct.pack("<f", x))[0] for x in toy_hash([1, 2], 7, 8, 4, 0, 0)],
        "rng42_first_u64": Rng(42).next_u64(),
        "rng42_uniform_select_4": int(Rng(42).uniform() * 4.0),
        "splitmix64_0": splitmix64(0),
        "fnv1a64_1_2": fnv1a64([1, 2]),
    }
    (out / "regression.json").write_text(json.dumps(regression, indent=2) + "\n")

    r = random.Random(20261019)
    cases = []
    for i in range(120):
        cfg, prompt = trimming_case(r) if i % 6 == 5 else random_case(r)
        cases.append({"config": cfg, "prompt": prompt, "expected": decode(prompt, cfg)})
    (out / "cases.json").write_text(json.dumps(cases) + "\n")
    trimmed = sum(
        1 for c in cases if c["config"]["strategy"]["trim_suffix"]
        and any(trim_suffix(g[:-len(c["config"]["vocabulary"]["delimiter"])], 1, c["config"]["trim"]["max_block"]) != g[:-len(c["config"]["vocabulary"]["delimiter"])]
                for g, d in zip(c["expected"]["thinking"], c["expected"]["ready"]) if d)
    )
    print(f"wrote {len(cases)} cases ({trimmed} with an effective trim) to {out}")


if __name__ == "__main__":
    main()

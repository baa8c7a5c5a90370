"""Toy transformer vs an independent pure-Python re-implementation.

The oracle below re-derives the weight generator (sequential state walk,
64-bit masked arithmetic on plain ints) and the full forward pass (nested
loops, no numpy linear algebra) so agreement is meaningful: any indexing,
ordering, or scaling mistake in the vectorized implementation would show.
"""

import math

import numpy as np
import pytest

from reba import (
    ToyModelSpec,
    ValidationError,
    forward,
    forward_arrays,
    generate_bundle,
    init_model,
    validate_bundle,
)

MASK = (1 << 64) - 1


def oracle_prng(seed, count):
    """Sequential SplitMix64-style stream on Python ints."""
    state = seed
    out = []
    for _ in range(count):
        state = (state + 0x9E3779B97F4A7C15) & MASK
        z = state
        z ^= z >> 30
        z = (z * 0xBF58476D1CE4E5B9) & MASK
        z ^= z >> 27
        z = (z * 0x94D049BB133111EB) & MASK
        z ^= z >> 31
        out.append((z / 2**64) * 0.2 - 0.1)
    return out


def oracle_weights(spec):
    """Fill order: token embedding, then per layer q, k, v, o, mlp1, mlp2."""
    d = spec.dim
    sizes = [("emb", spec.vocab, d)]
    for li in range(spec.layers):
        sizes += [(f"q{li}", d, d), (f"k{li}", d, d), (f"v{li}", d, d),
                  (f"o{li}", d, d), (f"m1{li}", d, 4 * d), (f"m2{li}", 4 * d, d)]
    total = sum(r * c for _, r, c in sizes)
    stream = oracle_prng(spec.seed, total)
    out = {}
    pos = 0
    for name, r, c in sizes:
        out[name] = [[stream[pos + i * c + j] for j in range(c)] for i in range(r)]
        pos += r * c
    return out


def oracle_positions(max_pos, d):
    table = [[0.0] * d for _ in range(max_pos)]
    for t in range(max_pos):
        for j in range(d):
            c2 = j - (j % 2)
            angle = t / (10000.0 ** (c2 / d))
            table[t][j] = math.sin(angle) if j % 2 == 0 else math.cos(angle)
    return table


def oracle_forward(spec, token_ids):
    """Loop-only forward pass; returns (attentions, states) as nested lists."""
    w = oracle_weights(spec)
    pos = oracle_positions(spec.max_pos, spec.dim)
    d, h, m = spec.dim, spec.heads, len(token_ids)
    dh = d // h

    def matmul(a, b):
        rows, inner, cols = len(a), len(b), len(b[0])
        out = [[0.0] * cols for _ in range(rows)]
        for i in range(rows):
            for kk in range(inner):
                aik = a[i][kk]
                for j in range(cols):
                    out[i][j] += aik * b[kk][j]
        return out

    x = [[w["emb"][t][c] + pos[i][c] for c in range(d)] for i, t in enumerate(token_ids)]
    attentions = []
    for li in range(spec.layers):
        q = matmul(x, w[f"q{li}"])
        k = matmul(x, w[f"k{li}"])
        v = matmul(x, w[f"v{li}"])
        context = [[0.0] * d for _ in range(m)]
        layer_attn = []
        for head in range(h):
            lo = head * dh
            probs = [[0.0] * m for _ in range(m)]
            for i in range(m):
                scores = []
                for j in range(i + 1):
                    s = sum(q[i][lo + c] * k[j][lo + c] for c in range(dh))
                    scores.append(s / math.sqrt(dh))
                top = max(scores)
                exps = [math.exp(s - top) for s in scores]
                denom = 0.0
                for e in exps:  # ascending j
                    denom += e
                for j in range(i + 1):
                    probs[i][j] = exps[j] / denom
                for j in range(i + 1):
                    for c in range(dh):
                        context[i][lo + c] += probs[i][j] * v[j][lo + c]
            layer_attn.append(probs)
        attentions.append(layer_attn)
        proj = matmul(context, w[f"o{li}"])
        x = [[x[i][c] + proj[i][c] for c in range(d)] for i in range(m)]
        hidden_in = x
        act = [[math.tanh(s) for s in row] for row in matmul(hidden_in, w[f"m1{li}"])]
        mlp = matmul(act, w[f"m2{li}"])
        x = [[x[i][c] + mlp[i][c] for c in range(d)] for i in range(m)]
    return attentions, x


class TestGenerator:
    def test_first_draws_match_oracle_exactly(self):
        for seed in (0, 1, 42, 2**63, 2**64 - 1):
            weights = init_model(ToyModelSpec(vocab=8, dim=4, heads=2, layers=1, seed=seed))
            got = weights.token_emb.ravel()[:16]
            expect = oracle_prng(seed, 16)
            np.testing.assert_array_equal(got, expect)

    def test_first_weight_small_spec(self):
        spec = ToyModelSpec(vocab=8, dim=4, heads=2, layers=1, seed=42)
        weights = init_model(spec)
        assert float(weights.token_emb[0, 0]) == oracle_prng(42, 1)[0]

    def test_full_weight_fill_matches_oracle(self):
        spec = ToyModelSpec(vocab=5, dim=4, heads=2, layers=2, max_pos=8, seed=7)
        weights = init_model(spec)
        expect = oracle_weights(spec)
        np.testing.assert_array_equal(weights.token_emb, expect["emb"])
        for li, layer in enumerate(weights.layers):
            np.testing.assert_array_equal(layer.w_q, expect[f"q{li}"])
            np.testing.assert_array_equal(layer.w_k, expect[f"k{li}"])
            np.testing.assert_array_equal(layer.w_v, expect[f"v{li}"])
            np.testing.assert_array_equal(layer.w_o, expect[f"o{li}"])
            np.testing.assert_array_equal(layer.w_1, expect[f"m1{li}"])
            np.testing.assert_array_equal(layer.w_2, expect[f"m2{li}"])

    def test_deterministic_bitwise(self):
        a = init_model(ToyModelSpec())
        b = init_model(ToyModelSpec())
        assert np.array_equal(a.token_emb, b.token_emb)
        for la, lb in zip(a.layers, b.layers):
            assert np.array_equal(la.w_2, lb.w_2)

    def test_seed_sensitivity(self):
        a = init_model(ToyModelSpec(seed=0))
        b = init_model(ToyModelSpec(seed=1))
        assert not np.array_equal(a.token_emb, b.token_emb)

    def test_positional_table_matches_oracle(self):
        spec = ToyModelSpec(dim=6, heads=3, max_pos=10)
        weights = init_model(spec)
        expect = oracle_positions(10, 6)
        np.testing.assert_allclose(weights.positions, expect, rtol=0, atol=0)

    def test_spec_validation(self):
        with pytest.raises(ValidationError):
            ToyModelSpec(vocab=1)
        with pytest.raises(ValidationError):
            ToyModelSpec(dim=10, heads=4)
        with pytest.raises(ValidationError):
            ToyModelSpec(layers=0)
        with pytest.raises(ValidationError):
            ToyModelSpec(seed=-1)
        with pytest.raises(ValidationError):
            ToyModelSpec(seed=2**64)


class TestForward:
    def test_matches_loop_oracle(self):
        spec = ToyModelSpec(vocab=8, dim=4, heads=2, layers=2, max_pos=8, seed=11)
        tokens = [3, 1, 4, 1, 5]
        attn, states = forward_arrays(init_model(spec), tokens)
        oracle_attn, oracle_states = oracle_forward(spec, tokens)
        np.testing.assert_allclose(states, oracle_states, rtol=0, atol=1e-12)
        for li in range(spec.layers):
            for head in range(spec.heads):
                np.testing.assert_allclose(
                    attn[li, head], oracle_attn[li][head], rtol=0, atol=1e-12
                )

    def test_single_token_attention_is_exactly_one(self, toy_spec):
        bundle = forward(init_model(toy_spec), [5])
        assert np.array_equal(bundle.attentions, np.ones((2, 2, 1, 1), dtype=np.float32))

    def test_rows_sum_to_one_and_causal(self, toy_spec):
        bundle = forward(init_model(toy_spec), [3, 1, 4, 1, 5, 9, 2, 6])
        sums = bundle.attentions.sum(axis=-1)
        np.testing.assert_allclose(sums, 1.0, atol=1e-6)
        assert np.all(np.triu(bundle.attentions, k=1) == 0.0)

    def test_prefix_property(self, toy_spec):
        weights = init_model(toy_spec)
        rng = np.random.default_rng(0)
        tokens = [int(t) for t in rng.integers(0, toy_spec.vocab, size=12)]
        _, full = forward_arrays(weights, tokens)
        for t in range(1, len(tokens) + 1):
            _, prefix = forward_arrays(weights, tokens[:t])
            np.testing.assert_allclose(prefix, full[:t], rtol=0, atol=1e-10)

    def test_changing_last_token_preserves_earlier_rows(self, toy_spec):
        weights = init_model(toy_spec)
        tokens = [3, 1, 4, 1, 5, 9]
        attn_a, _ = forward_arrays(weights, tokens)
        attn_b, _ = forward_arrays(weights, tokens[:-1] + [2])
        np.testing.assert_allclose(attn_a[:, :, :5, :5], attn_b[:, :, :5, :5],
                                   rtol=0, atol=1e-10)

    def test_rejects_out_of_vocab(self, toy_spec):
        with pytest.raises(ValidationError):
            forward_arrays(init_model(toy_spec), [0, toy_spec.vocab])

    def test_rejects_too_long(self):
        spec = ToyModelSpec(max_pos=4)
        with pytest.raises(ValidationError):
            forward_arrays(init_model(spec), [0] * 5)

    def test_rejects_empty(self, toy_spec):
        with pytest.raises(ValidationError):
            forward_arrays(init_model(toy_spec), [])


class TestGenerateBundle:
    def test_k1_header(self, toy_spec):
        bundle = generate_bundle(toy_spec, [3, 1, 4], k=1)
        assert bundle.header.seq_len == bundle.header.base_len == 3
        assert bundle.header.repetitions == 1

    def test_k2_alignment(self, toy_spec):
        bundle = generate_bundle(toy_spec, [3, 1, 4], k=2)
        assert bundle.header.seq_len == 6
        assert bundle.header.token_ids[3:] == bundle.header.token_ids[:3]

    def test_output_validates_clean(self, toy_spec):
        for k in (1, 2, 3):
            bundle = generate_bundle(toy_spec, [7, 2, 9, 4], k=k)
            assert validate_bundle(bundle) == []

    def test_determinism_bitwise(self, toy_spec):
        a = generate_bundle(toy_spec, [1, 2, 3], k=2)
        b = generate_bundle(toy_spec, [1, 2, 3], k=2)
        assert np.array_equal(a.attentions, b.attentions)
        assert np.array_equal(a.hidden_states, b.hidden_states)
        assert a.header == b.header

    def test_rejects_overlong_repeat(self):
        spec = ToyModelSpec(max_pos=8)
        with pytest.raises(ValidationError):
            generate_bundle(spec, [1, 2, 3], k=3)

    def test_model_tag_describes_generator(self, toy_spec):
        bundle = generate_bundle(toy_spec, [1], k=1)
        assert "seed=42" in bundle.header.model_tag

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spinsc.errors import DomainError, ShapeError
from spinsc.network import Layer, NetworkModel
from spinsc.polar import (ChannelOutput, PolarCodeSpec, bpsk_awgn,
                          construct_frozen_set, encode, neural_sc_decode,
                          ber_experiment, polar_transform, sc_decode)
from spinsc.rngtools import derive_rng


def dense_generator(n):
    """Oracle: explicit F^(x)n matrix over GF(2) by repeated Kronecker product."""
    F = np.array([[1, 0], [1, 1]], dtype=np.uint8)
    G = np.array([[1]], dtype=np.uint8)
    for _ in range(n):
        G = np.kron(G, F)
    return G


def oracle_transform(u):
    G = dense_generator(int(math.log2(len(u))))
    return (np.asarray(u, dtype=np.uint8) @ G) % 2


def logsumexp(vals):
    m = max(vals)
    return m + math.log(sum(math.exp(v - m) for v in vals))


def oracle_sc_decode(llrs, frozen):
    """Exhaustive-completion posterior per bit, conditioned on the previous
    hard decisions; future bits (frozen included) marginalized uniformly,
    matching the SC recursion's assumption."""
    N = len(llrs)
    u = np.zeros(N, dtype=np.uint8)
    for i in range(N):
        if frozen[i]:
            continue
        scores = {}
        rem = N - 1 - i
        for ui in (0, 1):
            logs = []
            for comp in range(2 ** rem):
                full = u.copy()
                full[i] = ui
                for j in range(rem):
                    full[i + 1 + j] = (comp >> j) & 1
                x = oracle_transform(full)
                logs.append(0.5 * float(np.sum(llrs * (1.0 - 2.0 * x))))
            scores[ui] = logsumexp(logs)
        u[i] = 0 if scores[0] >= scores[1] else 1
    return u


class TestConstruction:
    def test_n2_freezes_first_index(self):
        spec = construct_frozen_set(2, 1)
        assert spec.frozen.tolist() == [True, False]

    def test_rate_one_nothing_frozen(self):
        spec = construct_frozen_set(8, 8)
        assert not spec.frozen.any()

    def test_rate_zero_all_frozen(self):
        spec = construct_frozen_set(8, 0)
        assert spec.frozen.all()

    def test_k_greater_than_n_rejected(self):
        with pytest.raises(DomainError):
            construct_frozen_set(4, 5)

    def test_non_power_of_two_rejected(self):
        with pytest.raises(DomainError):
            PolarCodeSpec(N=6, K=3, frozen=np.zeros(6, bool))

    def test_spec_json_round_trip(self, tmp_path):
        spec = construct_frozen_set(16, 8, design_snr_db=1.5)
        path = tmp_path / "spec.json"
        spec.to_json(path)
        back = PolarCodeSpec.from_json(path)
        assert back.N == spec.N and back.K == spec.K
        assert np.array_equal(back.frozen, spec.frozen)


class TestEncode:
    def test_all_zero_message(self):
        spec = construct_frozen_set(16, 8)
        assert not encode(np.zeros(8, np.uint8), spec).any()

    def test_n2_kernel_by_hand(self):
        assert polar_transform([1, 0]).tolist() == [1, 0]
        assert polar_transform([1, 1]).tolist() == [0, 1]

    def test_matches_dense_oracle_all_256(self):
        for u in itertools.product([0, 1], repeat=8):
            u = np.array(u, dtype=np.uint8)
            assert np.array_equal(polar_transform(u), oracle_transform(u))

    @given(st.integers(0, 2 ** 31))
    @settings(max_examples=30, deadline=None)
    def test_transform_is_involution(self, seed):
        u = derive_rng(seed, "inv").integers(0, 2, 64).astype(np.uint8)
        assert np.array_equal(polar_transform(polar_transform(u)), u)

    def test_wrong_message_length(self):
        spec = construct_frozen_set(8, 4)
        with pytest.raises(ShapeError):
            encode(np.zeros(5, np.uint8), spec)


class TestChannel:
    def test_noiseless_limit_preserves_signs(self):
        cw = derive_rng(0, "cw").integers(0, 2, 64).astype(np.uint8)
        out = bpsk_awgn(cw, 100.0, 1, rate=0.5)
        bits = (out.llrs < 0).astype(np.uint8)
        assert np.array_equal(bits, cw)
        assert np.all(np.abs(out.llrs) > 1e9)

    def test_llr_moments_match_closed_form(self):
        n = 100_000
        snr_db, rate = 2.0, 0.5
        sigma2 = 1.0 / (2 * rate * 10 ** (snr_db / 10))
        reps = int(np.ceil(n / 64))
        llrs = np.concatenate([
            bpsk_awgn(np.zeros(64, np.uint8), snr_db, s, rate).llrs
            for s in range(reps)])[:n]
        mean, var = 2 / sigma2, 4 / sigma2
        assert abs(llrs.mean() - mean) <= 3 * math.sqrt(var / n)

    def test_seed_determinism(self):
        cw = np.zeros(32, np.uint8)
        a = bpsk_awgn(cw, 3.0, 5, 0.5)
        b = bpsk_awgn(cw, 3.0, 5, 0.5)
        assert np.array_equal(a.llrs, b.llrs)

    def test_non_finite_llrs_rejected(self):
        with pytest.raises(DomainError):
            ChannelOutput(llrs=np.array([1.0, np.inf]), snr_db=0.0)


class TestScDecode:
    @pytest.mark.parametrize("N", [2, 8, 64, 256, 1024])
    def test_noiseless_invertibility(self, N):
        spec = construct_frozen_set(N, N // 2)
        rng = derive_rng(N, "msg")
        for _ in range(5):
            msg = rng.integers(0, 2, spec.K).astype(np.uint8)
            out = bpsk_awgn(encode(msg, spec), 100.0, 3, spec.rate)
            res = sc_decode(out, spec)
            assert np.array_equal(res.message_hat, msg)

    def test_rate_zero_code(self):
        spec = construct_frozen_set(8, 0)
        out = bpsk_awgn(np.zeros(8, np.uint8), 0.0, 1, rate=1.0)
        res = sc_decode(out, spec)
        assert res.message_hat.size == 0
        assert not res.u_hat.any()

    def test_frozen_positions_forced_zero(self):
        spec = construct_frozen_set(16, 4)
        out = bpsk_awgn(encode(np.ones(4, np.uint8), spec), 0.0, 9, spec.rate)
        res = sc_decode(out, spec)
        assert not res.u_hat[spec.frozen].any()

    def test_matches_exhaustive_oracle(self):
        spec = construct_frozen_set(8, 4)
        rng = derive_rng(0, "oracle")
        for trial in range(8):
            msg = rng.integers(0, 2, 4).astype(np.uint8)
            out = bpsk_awgn(encode(msg, spec), 1.0, 100 + trial, spec.rate)
            res = sc_decode(out, spec)
            u_oracle = oracle_sc_decode(out.llrs, spec.frozen)
            assert np.array_equal(res.u_hat, u_oracle)

    def test_min_sum_close_to_exact_at_high_snr(self):
        spec = construct_frozen_set(64, 32)
        msg = derive_rng(1, "ms").integers(0, 2, 32).astype(np.uint8)
        out = bpsk_awgn(encode(msg, spec), 6.0, 2, spec.rate)
        assert np.array_equal(sc_decode(out, spec, min_sum=True).message_hat,
                              sc_decode(out, spec).message_hat)

    def test_wrong_length_rejected(self):
        spec = construct_frozen_set(8, 4)
        with pytest.raises(ShapeError):
            sc_decode(ChannelOutput(np.zeros(4), 0.0), spec)


class TestNeuralDecode:
    def test_zero_weight_model_decodes_to_zero(self):
        spec = construct_frozen_set(8, 4)
        model = NetworkModel(layers=[Layer(np.zeros((4, 8)), np.zeros(4))])
        out = bpsk_awgn(encode(np.ones(4, np.uint8), spec), 2.0, 3, spec.rate)
        res = neural_sc_decode(out, model, spec)
        # every pre-threshold output is exactly 0.5; the tie maps to bit 0
        assert not res.message_hat.any()

    def test_dimension_mismatch(self):
        spec = construct_frozen_set(8, 4)
        model = NetworkModel(layers=[Layer(np.zeros((4, 16)), np.zeros(4))])
        out = ChannelOutput(np.zeros(8), 0.0)
        with pytest.raises(ShapeError):
            neural_sc_decode(out, model, spec)


class TestBerExperiment:
    def test_noiseless_ber_zero(self):
        spec = construct_frozen_set(32, 16)
        rows = ber_experiment(spec, "classical", [100.0], 20, 4)
        assert rows[0]["ber"] == 0.0 and rows[0]["fer"] == 0.0

    def test_rate_one_n1_matches_uncoded_bpsk(self):
        spec = PolarCodeSpec(N=1, K=1, frozen=np.zeros(1, bool))
        snr_db = 2.0
        rows = ber_experiment(spec, "classical", [snr_db], 20_000, 11)
        q = 0.5 * math.erfc(math.sqrt(10 ** (snr_db / 10)))
        se = math.sqrt(q * (1 - q) / 20_000)
        assert abs(rows[0]["ber"] - q) <= 3 * se

    def test_seed_and_worker_independence(self):
        spec = construct_frozen_set(16, 8)
        a = ber_experiment(spec, "classical", [1.0, 3.0], 50, 21, workers=1)
        b = ber_experiment(spec, "classical", [1.0, 3.0], 50, 21, workers=2)
        for ra, rb in zip(a, b):
            assert ra["bit_errors"] == rb["bit_errors"]
            assert ra["frame_errors"] == rb["frame_errors"]

    def test_neural_requires_model(self):
        spec = construct_frozen_set(8, 4)
        with pytest.raises(DomainError):
            ber_experiment(spec, "neural", [1.0], 5, 1)

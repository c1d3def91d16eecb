import math
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sqlrl.grpo import SEQUENCE, TOKEN_MEAN, CandidateGroup, GrpoConfig, group_advantages, grpo_objective, kl_k3

from . import oracles

finite = st.floats(-50, 50, allow_nan=False)


def single(ratio, adv, eps=0.2, beta=0.0):
    """A two-member group where member 0 carries the ratio/advantage under test."""
    lr = math.log(ratio)
    g = CandidateGroup("x", ["a", "b"], [0, 0], [adv, 0.0],
                       logp_theta=[[lr], [0.0]], logp_old=[[0.0], [0.0]], logp_ref=[[lr], [0.0]])
    return 2 * grpo_objective(g, GrpoConfig(epsilon=eps, beta=beta)).value


class TestAdvantages:
    def test_centering(self):
        assert group_advantages([6, 2, 2, 2]).tolist() == [3, -1, -1, -1]

    def test_flat(self):
        assert group_advantages([4, 4, 4]).tolist() == [0, 0, 0]

    def test_std(self):
        got = group_advantages([1, 0], std_normalize=True)
        m = 0.5
        sd = math.sqrt(((1 - m) ** 2 + (0 - m) ** 2) / 2)
        assert got.tolist() == pytest.approx([(1 - m) / (sd + 1e-8), (0 - m) / (sd + 1e-8)], abs=1e-15)
        assert got.tolist() == pytest.approx([1.0, -1.0], abs=1e-7)

    @pytest.mark.parametrize("bad", [[], [1.0]])
    def test_too_short(self, bad):
        with pytest.raises(ValueError):
            group_advantages(bad)

    @given(st.lists(finite, min_size=2, max_size=8), finite)
    def test_zero_sum_and_shift(self, rewards, c):
        a = group_advantages(rewards)
        assert abs(a.mean()) < 1e-9
        assert np.allclose(group_advantages([r + c for r in rewards]), a, atol=1e-9)
        assert np.allclose(a, oracles.advantages(rewards), atol=1e-9)


class TestKl:
    def test_identity(self):
        assert kl_k3(-1.3, -1.3) == 0.0

    @pytest.mark.parametrize("rho", [2.0, 0.5])
    def test_values(self, rho):
        want = rho - math.log(rho) - 1
        assert kl_k3(0.0, math.log(rho)) == pytest.approx(want, rel=1e-12)
        assert kl_k3(0.0, math.log(rho)) == pytest.approx(oracles.k3(0.0, math.log(rho)), rel=1e-12)
        assert round(want, 4) == {2.0: 0.3069, 0.5: 0.1931}[rho]

    @given(finite, finite)
    def test_non_negative(self, a, b):
        k = kl_k3(a, b)
        assert k >= 0.0
        if a == b:
            assert k == 0.0
        elif (a - b) ** 2 / 2 >= 2 * sys.float_info.min * sys.float_info.epsilon:
            # below this the true value x^2 / 2 rounds to zero in double precision
            assert k > 0.0

    def test_tiny_differences_stay_positive(self):
        for d in (1e-17, 1e-12, 1e-9, 1e-6, 5e-5, 2e-4):
            assert kl_k3(0.0, d) > 0 and kl_k3(d, 0.0) > 0
            assert kl_k3(0.0, d) == pytest.approx(d * d / 2, rel=1e-3)

    def test_vectorized(self):
        out = kl_k3(np.zeros(3), np.array([0.0, math.log(2), math.log(0.5)]))
        assert out.shape == (3,) and out[0] == 0.0


class TestObjective:
    def test_clip_positive_advantage(self):
        assert single(1.3, 1.0) == pytest.approx(1.2, abs=1e-12)

    def test_clip_negative_advantage(self):
        # min(0.7 * -1, clip(0.7) * -1) = min(-0.7, -0.8)
        assert min(0.7 * -1, 0.8 * -1) == -0.8
        assert single(0.7, -1.0) == pytest.approx(-0.8, abs=1e-12)

    def test_unclipped_inside_band(self):
        assert single(1.1, 2.0) == pytest.approx(2.2, abs=1e-12)

    @settings(max_examples=100)
    @given(st.lists(st.floats(-3, 3), min_size=2, max_size=6), st.integers(1, 5),
           st.floats(0.01, 0.99), st.floats(0, 5), st.integers(0, 2**31))
    def test_identity_at_old_equals_ref(self, rewards, t, eps, beta, seed):
        rng = np.random.default_rng(seed)
        lp = [rng.normal(-2, 1, size=t) for _ in rewards]
        g = CandidateGroup.from_rewards("x", rewards, rewards, lp, lp, lp)
        for agg in (TOKEN_MEAN, SEQUENCE):
            res = grpo_objective(g, GrpoConfig(epsilon=eps, beta=beta, aggregation=agg))
            assert abs(res.value - g.advantages.mean()) < 1e-12
            assert res.kl == 0.0
            other = grpo_objective(g, GrpoConfig(epsilon=0.5 * eps, beta=beta, aggregation=agg))
            assert other.value == res.value

    @given(st.floats(0.1, 3.0), st.floats(-3, 3), st.floats(0.01, 0.99))
    def test_min_contract(self, ratio, adv, eps):
        term = single(ratio, adv, eps)
        assert term <= ratio * adv + 1e-12
        assert term == pytest.approx(min(ratio * adv, min(max(ratio, 1 - eps), 1 + eps) * adv), abs=1e-12)

    def test_sequence_ratio_is_product(self):
        lp_old = [[-1.0, -2.0], [-1.0, -1.0]]
        lp = [[-0.9, -1.95], [-1.0, -1.0]]
        g = CandidateGroup("x", ["a", "b"], [1, 0], [1.0, -1.0], lp, lp_old, lp)
        res = grpo_objective(g, GrpoConfig(epsilon=0.5, beta=0.0, aggregation=SEQUENCE))
        r0 = math.exp(0.1) * math.exp(0.05)
        assert res.value == pytest.approx((r0 * 1.0 + 1.0 * -1.0) / 2, abs=1e-12)

    def test_token_mean_value_against_oracle(self):
        rng = np.random.default_rng(3)
        cfg = GrpoConfig(epsilon=0.2, beta=0.3)
        lens = [3, 1, 4]
        th = [rng.normal(-1, .3, n) for n in lens]
        old = [rng.normal(-1, .3, n) for n in lens]
        ref = [rng.normal(-1, .3, n) for n in lens]
        adv = [0.7, -0.2, -0.5]
        g = CandidateGroup("x", ["a", "b", "c"], [0, 0, 0], adv, th, old, ref)
        want = 0.0
        for a, lt, lo, lr in zip(adv, th, old, ref):
            per = []
            for x, y, z in zip(lt, lo, lr):
                r = math.exp(x - y)
                per.append(min(r * a, min(max(r, 0.8), 1.2) * a) - 0.3 * oracles.k3(x, z))
            want += sum(per) / len(per)
        assert grpo_objective(g, cfg).value == pytest.approx(want / 3, abs=1e-12)

    @pytest.mark.parametrize("agg", [TOKEN_MEAN, SEQUENCE])
    def test_logprob_gradient_finite_difference(self, agg):
        rng = np.random.default_rng(11)
        cfg = GrpoConfig(epsilon=0.2, beta=0.1, aggregation=agg)
        for _ in range(20):
            lens = rng.integers(1, 5, size=4)
            th = [rng.normal(-1, .2, n) for n in lens]
            old = [x + rng.normal(0, .1, x.size) for x in th]
            ref = [x + rng.normal(0, .3, x.size) for x in th]
            adv = group_advantages(rng.normal(size=4))
            g = CandidateGroup("x", list("abcd"), adv, adv, th, old, ref)
            res = grpo_objective(g, cfg)
            h = 1e-6
            for i in range(4):
                for t in range(lens[i]):
                    up = [x.copy() for x in th]
                    dn = [x.copy() for x in th]
                    up[i][t] += h
                    dn[i][t] -= h
                    fd = (grpo_objective(CandidateGroup("x", list("abcd"), adv, adv, up, old, ref), cfg).value
                          - grpo_objective(CandidateGroup("x", list("abcd"), adv, adv, dn, old, ref), cfg).value) / (2 * h)
                    assert res.grad_logp[i][t] == pytest.approx(fd, abs=1e-7)

    def test_clip_fraction(self):
        g = CandidateGroup("x", ["a", "b"], [0, 0], [1.0, -1.0],
                           [[math.log(1.5)], [math.log(0.5)]], [[0.0], [0.0]], [[0.0], [0.0]])
        assert grpo_objective(g, GrpoConfig(beta=0.0)).clip_fraction == 1.0


class TestValidation:
    def test_config(self):
        for kw in ({"epsilon": 0}, {"epsilon": 1}, {"beta": -1}, {"group_size": 1}, {"aggregation": "sum"}):
            with pytest.raises(ValueError):
                GrpoConfig(**kw)

    def test_group_lengths(self):
        with pytest.raises(ValueError):
            CandidateGroup("x", ["a"], [0], [0], [[0]], [[0]], [[0]])
        with pytest.raises(ValueError):
            CandidateGroup("x", ["a", "b"], [0, 0], [0], [[0], [0]], [[0], [0]], [[0], [0]])
        with pytest.raises(ValueError):
            CandidateGroup("x", ["a", "b"], [0, 0], [0, 0], [[0, 1], [0]], [[0], [0]], [[0], [0]])

    @pytest.mark.parametrize("bad", [float("nan"), float("inf"), -float("inf")])
    def test_non_finite_rejected(self, bad):
        with pytest.raises(ValueError):
            CandidateGroup("x", ["a", "b"], [0, 0], [0, 0], [[bad], [0]], [[0], [0]], [[0], [0]])

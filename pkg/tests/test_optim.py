"""Optimizer: clipping, AdamW vs scalar hand-oracle, the warmup/cosine
schedule endpoints, and label-smoothed cross-entropy."""

import math

import numpy as np
import pytest

from hrmvision.errors import ConfigError, ContractError, DataError, NumericError
from hrmvision.optim import (AdamW, ScheduleConfig, clip_global_norm,
                             label_smoothed_ce, lr_at)
from hrmvision.tensor import Tensor

from conftest import gradcheck


class TestClipGlobalNorm:
    def test_below_threshold_unchanged(self):
        g = {"a": np.array([0.3, 0.4])}
        norm = clip_global_norm(g, 1.0)
        assert math.isclose(norm, 0.5)
        assert np.allclose(g["a"], [0.3, 0.4])

    def test_scaling(self):
        g = {"a": np.array([3.0, 4.0])}
        norm = clip_global_norm(g, 1.0)
        assert math.isclose(norm, 5.0)
        assert np.allclose(g["a"], [0.6, 0.8])

    def test_postclip_norm_is_min(self):
        rng = np.random.default_rng(0)
        g = {f"p{i}": rng.standard_normal((4, 5)) for i in range(3)}
        pre = math.sqrt(sum(float(np.sum(v ** 2)) for v in g.values()))
        clip_global_norm(g, 1.0)
        post = math.sqrt(sum(float(np.sum(v ** 2)) for v in g.values()))
        assert abs(post - min(pre, 1.0)) < 1e-6

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        g = {"a": rng.standard_normal(10) * 3}
        clip_global_norm(g, 1.0)
        once = g["a"].copy()
        clip_global_norm(g, 1.0)
        assert np.allclose(g["a"], once, atol=1e-12)

    def test_nonfinite_names_parameter(self):
        g = {"fine": np.ones(2), "broken.weight": np.array([1.0, np.inf])}
        with pytest.raises(NumericError, match="broken.weight"):
            clip_global_norm(g, 1.0)


class TestAdamW:
    def test_first_step_scalar_hand_oracle(self):
        p = Tensor(np.array([1.0], dtype=np.float64), requires_grad=True)
        opt = AdamW([("p", p)], weight_decay=0.0)
        g = 0.3
        lr = 1e-3
        opt.step({"p": np.array([g])}, lr)
        m = 0.1 * g
        v = 0.001 * g * g
        mhat = m / (1 - 0.9)
        vhat = v / (1 - 0.999)
        expected = 1.0 - lr * mhat / (math.sqrt(vhat) + 1e-8)
        assert abs(p.data[0] - expected) < 1e-8

    def test_zero_grad_zero_decay_unchanged(self):
        p = Tensor(np.array([2.5]), requires_grad=True)
        opt = AdamW([("p", p)], weight_decay=0.0)
        for _ in range(3):
            opt.step({"p": np.zeros(1)}, 1e-3)
        assert np.allclose(p.data, [2.5])

    def test_decoupled_decay_shrinks(self):
        p = Tensor(np.array([2.0], dtype=np.float64), requires_grad=True)
        wd, lr = 5e-4, 1e-2
        opt = AdamW([("p", p)], weight_decay=wd)
        for k in range(1, 4):
            opt.step({"p": np.zeros(1)}, lr)
            assert abs(p.data[0] - 2.0 * (1 - lr * wd) ** k) < 1e-12

    def test_ten_steps_match_hand_adam(self):
        rng = np.random.default_rng(2)
        p = Tensor(np.array([0.7], dtype=np.float64), requires_grad=True)
        opt = AdamW([("p", p)], weight_decay=0.0)
        theta, m, v = 0.7, 0.0, 0.0
        lr = 2e-3
        for t in range(1, 11):
            g = float(rng.standard_normal())
            opt.step({"p": np.array([g])}, lr)
            m = 0.9 * m + 0.1 * g
            v = 0.999 * v + 0.001 * g * g
            theta -= lr * (m / (1 - 0.9 ** t)) / (math.sqrt(v / (1 - 0.999 ** t)) + 1e-8)
            assert abs(p.data[0] - theta) < 1e-8, f"diverged at step {t}"

    def test_shape_mismatch_rejected(self):
        p = Tensor(np.zeros((2, 2)), requires_grad=True)
        opt = AdamW([("p", p)])
        with pytest.raises(ContractError):
            opt.step({"p": np.zeros(3)}, 1e-3)

    def test_step_counter_increases(self):
        p = Tensor(np.zeros(1), requires_grad=True)
        opt = AdamW([("p", p)])
        for expected in (1, 2, 3):
            opt.step({"p": np.zeros(1)}, 1e-3)
            assert opt.step_count == expected


class TestSchedule:
    def cfg(self, warmup=100, total=1000):
        return ScheduleConfig(lr_peak=3e-4, warmup_steps=warmup, total_steps=total)

    def test_end_of_warmup_hits_peak(self):
        assert math.isclose(lr_at(99, self.cfg()), 3e-4, rel_tol=1e-12)

    def test_continuity_at_boundary(self):
        c = self.cfg()
        assert abs(lr_at(99, c) - lr_at(100, c)) < 1e-12

    def test_final_step_reaches_floor(self):
        c = self.cfg()
        assert math.isclose(lr_at(999, c), 6e-5, rel_tol=1e-4)

    def test_midpoint_of_decay(self):
        c = self.cfg(warmup=100, total=1100)  # decay span 1000, midpoint exact
        assert math.isclose(lr_at(600, c), 1.8e-4, rel_tol=1e-12)

    def test_warmup_is_linear_from_first_step(self):
        c = self.cfg()
        assert math.isclose(lr_at(0, c), 3e-4 / 100, rel_tol=1e-12)
        assert math.isclose(lr_at(49, c), 3e-4 * 50 / 100, rel_tol=1e-12)

    def test_floor_bound_everywhere(self):
        c = self.cfg(warmup=10, total=200)
        values = [lr_at(s, c) for s in range(10, 200)]
        assert min(values) >= 0.2 * 3e-4 - 1e-15

    def test_out_of_range_rejected(self):
        c = self.cfg()
        with pytest.raises(ContractError):
            lr_at(-1, c)
        with pytest.raises(ContractError):
            lr_at(1000, c)

    def test_invalid_config_rejected(self):
        with pytest.raises(ConfigError):
            ScheduleConfig(3e-4, warmup_steps=11, total_steps=10)
        with pytest.raises(ConfigError):
            ScheduleConfig(3e-4, warmup_steps=1, total_steps=10, floor_frac=0.0)


class TestLabelSmoothedCE:
    def test_zero_smoothing_is_plain_ce(self):
        rng = np.random.default_rng(3)
        logits = rng.standard_normal((4, 6))
        labels = np.array([0, 5, 2, 2])
        loss = label_smoothed_ce(Tensor(logits), labels, smoothing=0.0).item()
        logp = logits - np.log(np.exp(logits).sum(axis=1, keepdims=True))
        ref = -np.mean(logp[np.arange(4), labels])
        assert abs(loss - ref) < 1e-7

    def test_uniform_logits_give_log_k(self):
        for eps in (0.0, 0.05, 0.3):
            loss = label_smoothed_ce(Tensor(np.zeros((5, 10))),
                                     np.arange(5), smoothing=eps).item()
            assert abs(loss - math.log(10)) < 1e-6

    def test_direct_summation_oracle(self):
        k, eps = 10, 0.05
        labels = np.array([3, 7])
        logits = np.zeros((2, k))
        logits[0, 3] = 10.0
        logits[1, 7] = 10.0
        loss = label_smoothed_ce(Tensor(logits), labels, smoothing=eps).item()
        ref = 0.0
        for b in range(2):
            logp = logits[b] - np.log(np.exp(logits[b]).sum())
            target = np.full(k, eps / k)
            target[labels[b]] += 1 - eps
            ref += -np.sum(target * logp)
        ref /= 2
        assert abs(loss - ref) < 1e-7

    def test_out_of_range_label(self):
        with pytest.raises(DataError):
            label_smoothed_ce(Tensor(np.zeros((2, 3))), np.array([0, 3]))
        with pytest.raises(DataError):
            label_smoothed_ce(Tensor(np.zeros((2, 3))), np.array([-1, 0]))

    def test_nonnegative_and_minimized_by_target(self):
        rng = np.random.default_rng(4)
        k, eps = 5, 0.1
        labels = np.array([2])
        target = np.full(k, eps / k)
        target[2] += 1 - eps
        at_target = label_smoothed_ce(Tensor(np.log(target)[None, :]), labels,
                                      smoothing=eps).item()
        assert at_target >= 0
        for _ in range(20):
            other = rng.standard_normal((1, k))
            loss = label_smoothed_ce(Tensor(other), labels, smoothing=eps).item()
            assert loss >= at_target - 1e-9

    def test_gradients(self):
        rng = np.random.default_rng(5)
        labels = np.array([1, 0, 3])
        gradcheck(lambda t: label_smoothed_ce(t, labels, smoothing=0.05),
                  rng.standard_normal((3, 4)))

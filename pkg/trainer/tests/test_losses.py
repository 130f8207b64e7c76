"""Loss arithmetic pinned to closed-form cases, plus a finite-difference check."""

import math

import numpy as np
import pytest
import torch

from dpn_trainer.config import ModelConfig
from dpn_trainer.episodes import Episode
from dpn_trainer.losses import discretization_gap, episode_loss
from dpn_trainer.model import DPN

N = 32
WAY = 5


def _episode(way=WAY, shot=1, queries=2, size=16, dtype=torch.float32):
    torch.manual_seed(2)
    return Episode(
        anchors=torch.rand(way, shot, 1, size, size, dtype=dtype),
        queries=torch.rand(way * queries, 1, size, size, dtype=dtype),
        labels=torch.arange(way).repeat_interleave(queries),
        class_indices=tuple(range(way)),
    )


def _constant_half_model():
    """All-zero parameters -> every embedding coordinate is exactly 0.5."""
    model = DPN(ModelConfig(n=N, channels=4, image_size=16))
    model.eval()
    with torch.no_grad():
        for p in model.parameters():
            p.zero_()
    return model


def _saturated_model():
    """Huge head bias -> every embedding coordinate is exactly 1.0 in float32."""
    model = _constant_half_model()
    with torch.no_grad():
        model.fc.bias.fill_(50.0)
    return model


class TestClosedForms:
    def test_uniform_distances_nll_is_ln_way(self):
        loss, stats = episode_loss(_constant_half_model(), _episode())
        assert loss.item() == pytest.approx(math.log(WAY), rel=1e-6)
        assert stats["nll"] == pytest.approx(math.log(WAY), rel=1e-6)

    def test_constant_half_regularizer_is_quarter_n(self):
        model = _constant_half_model()
        ep = _episode()
        lam = 0.01
        base = episode_loss(model, ep, 0.0)[0].item()
        with_reg = episode_loss(model, ep, lam)[0].item()
        assert with_reg - base == pytest.approx(lam * N * 0.25, rel=1e-6)

    def test_binary_output_regularizer_is_zero(self):
        model = _saturated_model()
        ep = _episode()
        base, stats = episode_loss(model, ep, 0.0)
        with_reg, _ = episode_loss(model, ep, 0.1)
        assert with_reg.item() == base.item()
        assert stats["gap"] == 0.0

    def test_shape_mismatch_raises(self):
        model = _constant_half_model()
        bad = _episode(size=8)   # wrong spatial size for the fc layer
        with pytest.raises(RuntimeError):
            episode_loss(model, bad)


class TestGap:
    def test_binary_outputs_zero(self):
        bits = torch.tensor([[0.0, 1.0, 1.0], [1.0, 0.0, 0.0]])
        assert discretization_gap(bits).item() == 0.0

    def test_uniform_outputs_quarter(self):
        torch.manual_seed(4)
        u = torch.rand(200, 500)
        # E|u - round(u)| = 1/4 for uniform u; 100k coords give sigma ~ 4.6e-4
        assert discretization_gap(u).item() == pytest.approx(0.25, abs=2e-3)

    def test_constant_half_is_half(self):
        # ties round up, so 0.5 sits at distance 0.5 from its rounded value
        half = torch.full((3, 7), 0.5)
        assert discretization_gap(half).item() == 0.5

    @pytest.mark.parametrize("bad", [-0.1, 1.2])
    def test_out_of_range_rejected(self, bad):
        with pytest.raises(ValueError):
            discretization_gap(torch.tensor([0.3, bad]))


class TestGradients:
    def test_match_finite_differences(self):
        torch.manual_seed(3)
        model = DPN(ModelConfig(n=8, channels=2, image_size=16)).double()
        model.train()
        for m in model.modules():
            if isinstance(m, torch.nn.BatchNorm2d):
                m.momentum = 0.0   # freeze running stats between evaluations
        ep = _episode(way=3, shot=1, queries=2, dtype=torch.float64)
        lam = 0.05

        loss, _ = episode_loss(model, ep, lam)
        loss.backward()

        rng = np.random.default_rng(0)
        h = 1e-6
        analytic, numeric = [], []
        with torch.no_grad():
            for p in model.parameters():
                flat, gflat = p.view(-1), p.grad.view(-1)
                picks = rng.choice(flat.numel(), size=min(4, flat.numel()),
                                   replace=False)
                for idx in picks:
                    orig = flat[idx].item()
                    flat[idx] = orig + h
                    up = episode_loss(model, ep, lam)[0].item()
                    flat[idx] = orig - h
                    down = episode_loss(model, ep, lam)[0].item()
                    flat[idx] = orig
                    analytic.append(gflat[idx].item())
                    numeric.append((up - down) / (2 * h))

        a, n = np.asarray(analytic), np.asarray(numeric)
        assert np.linalg.norm(a - n) <= 1e-4 * max(np.linalg.norm(n), 1e-12)

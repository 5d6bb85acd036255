"""Finite-difference verification of the autodiff engine.

Central differences with a configurable step are compared against the
analytic gradients for every parameter of a model, producing a per-parameter
report.  Intended for desk-scale instances (a few thousand parameters).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import (Conv1D, Dense, Embedding, EncoderBlock, LSTM, LayerNorm,
                     key_padding_mask)
from .losses import masked_mse
from .tensor import Tensor

_REL_FLOOR = 1e-6  # denominators below this are treated as this


@dataclass
class GradCheckRow:
    name: str
    n_checked: int
    max_rel_err: float
    passed: bool


@dataclass
class GradCheckReport:
    tolerance: float
    rows: list[GradCheckRow] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.rows)

    @property
    def max_rel_err(self) -> float:
        return max((r.max_rel_err for r in self.rows), default=0.0)

    def format_table(self) -> str:
        width = max([len(r.name) for r in self.rows] + [9])
        lines = [f"{'parameter':<{width}}  {'entries':>7}  {'max rel err':>12}  result"]
        for r in self.rows:
            status = "pass" if r.passed else "FAIL"
            lines.append(
                f"{r.name:<{width}}  {r.n_checked:>7}  {r.max_rel_err:>12.3e}  {status}")
        lines.append(f"overall: {'pass' if self.passed else 'FAIL'} "
                     f"(tolerance {self.tolerance:g})")
        return "\n".join(lines)


def check_gradients(loss_fn, named_params, tolerance: float = 1e-4,
                    h: float = 1e-5, max_entries: int | None = None,
                    rng: np.random.Generator | None = None) -> GradCheckReport:
    """Compare analytic gradients of `loss_fn()` against central differences.

    `loss_fn` must rebuild the forward graph on every call and return a
    scalar Tensor.  `named_params` is an iterable of (name, Parameter).
    """
    named_params = list(named_params)
    for _, p in named_params:
        p.zero_grad()
    loss = loss_fn()
    loss.backward()
    analytic = {name: p.grad.copy() if p.grad is not None else np.zeros_like(p.data)
                for name, p in named_params}

    report = GradCheckReport(tolerance=tolerance)
    rng = rng or np.random.default_rng(0)
    for name, p in named_params:
        flat = p.data.reshape(-1)
        idx = np.arange(flat.size)
        if max_entries is not None and flat.size > max_entries:
            idx = np.sort(rng.choice(flat.size, size=max_entries, replace=False))
        worst = 0.0
        a_flat = analytic[name].reshape(-1)
        for i in idx:
            orig = flat[i]
            flat[i] = orig + h
            f_plus = loss_fn().item()
            flat[i] = orig - h
            f_minus = loss_fn().item()
            flat[i] = orig
            numeric = (f_plus - f_minus) / (2.0 * h)
            denom = max(abs(a_flat[i]), abs(numeric), _REL_FLOOR)
            worst = max(worst, abs(a_flat[i] - numeric) / denom)
        report.rows.append(GradCheckRow(name, len(idx), worst, worst < tolerance))
    return report


def _scalarize(out: Tensor, rng: np.random.Generator) -> Tensor:
    """Project an arbitrary output to a scalar with fixed random weights."""
    w = rng.normal(size=out.shape)
    return (out * Tensor(w)).sum()


def standard_suite(tolerance: float = 1e-4, h: float = 1e-5) -> dict[str, GradCheckReport]:
    """Gradient-check every layer family plus one full classifier and one
    full generator at desk scale.  Returns a report per case."""
    reports: dict[str, GradCheckReport] = {}

    rng = np.random.default_rng(7)
    x = Tensor(rng.normal(size=(3, 5)) + 0.05)
    dense = Dense(5, 4, "relu", np.random.default_rng(1))
    reports["dense"] = check_gradients(
        lambda: _scalarize(dense(x), np.random.default_rng(11)),
        dense.named_parameters("dense."), tolerance, h)

    seq = Tensor(np.random.default_rng(3).normal(size=(2, 4, 3)))
    mask = np.array([[True, True, True, False], [True, True, False, False]])
    lstm = LSTM(3, 4, np.random.default_rng(4))
    reports["lstm"] = check_gradients(
        lambda: _scalarize(lstm(seq, mask), np.random.default_rng(12)),
        lstm.named_parameters("lstm."), tolerance, h)

    cx = Tensor(np.random.default_rng(5).normal(size=(2, 6, 3)))
    conv = Conv1D(3, 4, kernel=3, stride=2, padding="same",
                  activation="relu", rng=np.random.default_rng(6))
    reports["conv1d"] = check_gradients(
        lambda: _scalarize(conv(cx), np.random.default_rng(13)),
        conv.named_parameters("conv."), tolerance, h)

    ax = Tensor(np.random.default_rng(8).normal(size=(2, 5, 8)))
    amask = key_padding_mask(np.array([[1, 1, 1, 1, 0], [1, 1, 1, 0, 0]], dtype=bool))
    block = EncoderBlock(8, heads=2, d_k=4, d_v=4, ffn_hidden=16,
                         rng=np.random.default_rng(9))
    reports["attention_block"] = check_gradients(
        lambda: _scalarize(block(ax, amask), np.random.default_rng(14)),
        block.named_parameters("block."), tolerance, h)

    nx = Tensor(np.random.default_rng(10).normal(size=(4, 6)))
    norm = LayerNorm(6)
    norm.gamma.data[:] = np.random.default_rng(15).normal(size=6)
    reports["layer_norm"] = check_gradients(
        lambda: _scalarize(norm(nx), np.random.default_rng(16)),
        norm.named_parameters("ln."), tolerance, h)

    emb = Embedding(5, 4, np.random.default_rng(17))
    eidx = np.array([[0, 2, 4], [1, 1, 3]])
    reports["embedding"] = check_gradients(
        lambda: _scalarize(emb(eidx), np.random.default_rng(18)),
        emb.named_parameters("emb."), tolerance, h)

    reports["classifier"] = _classifier_case(tolerance, h)
    reports["generator"] = _generator_case(tolerance, h)
    return reports


def _classifier_case(tolerance: float, h: float) -> GradCheckReport:
    # imported here: estimators depend on nn, not the other way round
    from ..estimators.classifiers import build_network
    from .losses import weighted_cross_entropy

    rng = np.random.default_rng(21)
    net = build_network(
        "lstm-transformer",
        dict(n_strike_features=3, strike_embed=4, strike_hidden=5,
             motion_hidden=0, d_model=6, heads=2, d_k=3, d_v=3,
             ffn_hidden=8, encoder_blocks=1, fusion_hidden=7, dropout=0.0),
        np.random.default_rng(22))
    net.eval()
    strikes = rng.random(size=(3, 2, 3))
    strike_times = rng.random(size=(3, 2))
    strike_mask = np.array([[1, 1], [1, 0], [1, 1]], dtype=bool)
    motion = rng.normal(size=(3, 4, 18))
    motion_mask = np.array([[1, 1, 1, 0], [1, 1, 1, 1], [1, 1, 0, 0]], dtype=bool)
    labels = np.array([0, 1, 0])

    def loss_fn():
        logits = net(strikes=strikes, strike_times=strike_times,
                     strike_mask=strike_mask, motion=motion,
                     motion_mask=motion_mask)
        return weighted_cross_entropy(logits, labels, [1.0, 2.0])

    return check_gradients(loss_fn, net.named_parameters("clf."), tolerance, h)


def _generator_case(tolerance: float, h: float) -> GradCheckReport:
    from ..estimators.generator import Seq2SeqTransformer

    rng = np.random.default_rng(31)
    net = Seq2SeqTransformer(
        n_strike_features=3, n_channels=4, d_model=8, heads=2, d_k=4, d_v=4,
        ffn_hidden=16, encoder_blocks=1, decoder_blocks=1, dropout=0.0,
        pe_max_len=32, rng=np.random.default_rng(32))
    net.eval()
    source = rng.random(size=(2, 2, 3))
    source_mask = np.array([[1, 1], [1, 0]], dtype=bool)
    dec_in = rng.normal(size=(2, 5, 4))
    target = rng.normal(size=(2, 5, 4))
    step_mask = np.array([[1, 1, 1, 1, 0], [1, 1, 1, 0, 0]], dtype=bool)

    def loss_fn():
        pred = net(source, source_mask, dec_in, step_mask)
        return masked_mse(pred, target, step_mask)

    return check_gradients(loss_fn, net.named_parameters("gen."), tolerance, h)

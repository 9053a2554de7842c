"""Training objectives and evaluation metrics.

The evaluation-side fairness measure is the mean absolute deviation of
per-location RMSE from the pooled RMSE (exact absolute values, numpy).
The training-side losses are differentiable Tensor expressions: a smooth
surrogate of that fairness computed against simulated labels, an error
direction-alignment (consistency) term, and two physics constraints.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .simulators import STEFAN_BOLTZMANN, EnergyBalanceInputs, energy_balance_residual

SMOOTH_ABS_EPS = 1e-12


class LossInputError(ValueError):
    """Raised on malformed loss inputs (length or location mismatches)."""


# ---------------------------------------------------------------------------
# Evaluation-side metrics (plain numpy, exact)
# ---------------------------------------------------------------------------

@dataclass
class PerLocationErrors:
    """Map location_id -> list of (prediction, truth) pairs."""

    pairs: dict = field(default_factory=dict)

    @classmethod
    def from_arrays(cls, preds, truths, loc_ids) -> "PerLocationErrors":
        preds = np.asarray(preds, dtype=np.float64).reshape(-1)
        truths = np.asarray(truths, dtype=np.float64).reshape(-1)
        loc_ids = np.asarray(loc_ids)
        if not (len(preds) == len(truths) == len(loc_ids)):
            raise LossInputError(
                f"per-location errors: lengths differ ({len(preds)}, {len(truths)}, {len(loc_ids)})")
        out = {}
        for p, t, s in zip(preds, truths, loc_ids):
            out.setdefault(s, []).append((float(p), float(t)))
        return cls(out)

    def locations(self):
        return list(self.pairs.keys())


def rmse(preds, truths) -> float:
    preds = np.asarray(preds, dtype=np.float64).reshape(-1)
    truths = np.asarray(truths, dtype=np.float64).reshape(-1)
    return float(np.sqrt(np.mean((preds - truths) ** 2)))


def pearson_r(preds, truths) -> tuple[float, bool]:
    """Pearson correlation over pooled pairs; (0.0, True) when degenerate."""
    preds = np.asarray(preds, dtype=np.float64).reshape(-1)
    truths = np.asarray(truths, dtype=np.float64).reshape(-1)
    sp = preds.std()
    st = truths.std()
    if sp == 0.0 or st == 0.0:
        return 0.0, True
    r = float(np.mean((preds - preds.mean()) * (truths - truths.mean())) / (sp * st))
    return r, False


def fairness_measure(errs: PerLocationErrors, metric: str = "rmse") -> float:
    """Mean absolute deviation of the per-location metric from the pooled metric."""
    if metric != "rmse":
        raise LossInputError(f"unsupported fairness metric {metric!r}")
    if not errs.pairs:
        raise LossInputError("fairness_measure: empty location set")
    all_pairs = [pt for pairs in errs.pairs.values() for pt in pairs]
    global_metric = rmse([p for p, _ in all_pairs], [t for _, t in all_pairs])
    devs = []
    for pairs in errs.pairs.values():
        loc_metric = rmse([p for p, _ in pairs], [t for _, t in pairs])
        devs.append(abs(loc_metric - global_metric))
    return float(np.mean(devs))


# ---------------------------------------------------------------------------
# Differentiable training losses
# ---------------------------------------------------------------------------

def smooth_abs(t: Tensor, eps: float = SMOOTH_ABS_EPS) -> Tensor:
    """sqrt(x^2 + eps): differentiable surrogate for |x|."""
    return ad.powc(t * t + eps, 0.5)


def mse_loss(preds: Tensor, targets) -> Tensor:
    diff = preds - np.asarray(targets, dtype=np.float64).reshape(preds.shape)
    return (diff * diff).mean()


def _location_masks(loc_ids) -> tuple[np.ndarray, np.ndarray]:
    """(L, n) 0/1 membership matrix and per-location counts."""
    loc_ids = np.asarray(loc_ids)
    uniq, inv = np.unique(loc_ids, return_inverse=True)
    masks = np.zeros((len(uniq), len(loc_ids)))
    masks[inv, np.arange(len(loc_ids))] = 1.0
    return masks, masks.sum(axis=1)


def preliminary_fairness_loss(preds: Tensor, sim_labels, loc_ids,
                              global_term: float | None = None) -> Tensor:
    """Fairness surrogate against simulated labels (no true labels involved).

    Per-location RMSE deviations from the pooled RMSE, smooth-abs averaged.
    When ``global_term`` is given it is treated as a frozen constant,
    otherwise the pooled term is computed from the same inputs and carries
    gradient.
    """
    sim_labels = np.asarray(sim_labels, dtype=np.float64).reshape(-1)
    loc_ids = np.asarray(loc_ids)
    n = preds.size
    if len(sim_labels) != n or len(loc_ids) != n:
        raise LossInputError(
            f"preliminary fairness: got {n} predictions, {len(sim_labels)} labels, "
            f"{len(loc_ids)} location ids")
    flat = preds.reshape((n, 1))
    sq = (flat - sim_labels[:, None]) ** 2.0
    masks, counts = _location_masks(loc_ids)
    loc_mse = ad.matmul(Tensor(masks / counts[:, None]), sq)
    loc_rmse = loc_mse ** 0.5
    if global_term is None:
        pooled = sq.mean() ** 0.5
    else:
        pooled = Tensor(np.float64(global_term))
    return smooth_abs(loc_rmse - pooled).mean()


def consistency_loss(y, y_hat: Tensor, y_sim) -> Tensor:
    """Alignment of prediction errors against truth and against simulation.

    -(1/n) sum (y_i - yhat_i)(ysim_i - yhat_i): negative when the two error
    directions agree, zero when the prediction matches either reference.
    """
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    y_sim = np.asarray(y_sim, dtype=np.float64).reshape(-1)
    n = y_hat.size
    if len(y) != n or len(y_sim) != n:
        raise LossInputError(
            f"consistency: got {n} predictions, {len(y)} labels, {len(y_sim)} simulated labels")
    flat = y_hat.reshape((n,))
    e = y - flat
    e_m = y_sim - flat
    return -((e * e_m).mean())


def pm1_constraint_factors(x: np.ndarray, chain) -> tuple[np.ndarray, np.ndarray]:
    """Per-band scaling factors for the gray-body constraint.

    ratio = forward-simulated observation over inverse-simulated state,
    evaluated through the frozen invertible surrogate; the lower-bound
    factor is capped at one, the upper-bound factor floored at zero.
    """
    x = np.asarray(x, dtype=np.float64)
    sim_side = chain.obs_to_sim(x)
    x_sim = chain.sim_to_obs(sim_side)
    denom = np.where(np.abs(sim_side) < 1e-9, 1e-9, sim_side)
    ratio = x_sim / denom
    eps = np.minimum(1.0, ratio)
    eta = np.maximum(0.0, ratio)
    return eps, eta


def phy_loss_pm1(x, y_hat: Tensor, chain=None, eps=None, eta=None,
                 variant: str = "hinge", band_scale=None) -> Tensor:
    """Gray-body band constraint on the predicted temperature.

    hinge (default): mean over samples and bands of
        max(0, X - eps*yhat) + max(0, eta*yhat - X)
    literal: keeps the published min() second term, which is non-positive:
        max(0, X - eps*yhat) + min(0, X - eta*yhat)

    eps/eta default to chain-derived factors; ``band_scale`` divides the
    residuals per band (used to keep magnitudes commensurate with
    normalized prediction losses).
    """
    x = np.asarray(x, dtype=np.float64)
    if eps is None or eta is None:
        if chain is None:
            raise LossInputError("phy_loss_pm1: need either a chain or explicit eps/eta")
        eps, eta = pm1_constraint_factors(x, chain)
    eps = np.broadcast_to(np.asarray(eps, dtype=np.float64), x.shape)
    eta = np.broadcast_to(np.asarray(eta, dtype=np.float64), x.shape)
    n = y_hat.size
    if x.shape[0] != n:
        raise LossInputError(f"phy_loss_pm1: {x.shape[0]} observations vs {n} predictions")
    yh = y_hat.reshape((n, 1))
    lower = ad.max0(x - eps * yh)
    if variant == "hinge":
        upper = ad.max0(eta * yh - x)
        total = lower + upper
    elif variant == "literal":
        total = lower + ad.min0(x - eta * yh)
    else:
        raise LossInputError(f"phy_loss_pm1: unknown variant {variant!r}")
    if band_scale is not None:
        total = total * (1.0 / np.asarray(band_scale, dtype=np.float64))
    return total.mean()


def phy_loss_pm2(y_hat: Tensor, e: EnergyBalanceInputs, scale: float = 1.0) -> Tensor:
    """Mean absolute surface energy-balance residual at the predicted temperature."""
    n = y_hat.size
    forcing = e.forcing()
    if len(forcing) != n:
        raise LossInputError(f"phy_loss_pm2: {len(forcing)} flux rows vs {n} predictions")
    res = energy_balance_residual(y_hat.reshape((n,)), e)
    return res.abs().mean() * (1.0 / float(scale))


@dataclass
class LossWeights:
    prediction: float = 1.0
    fairness: float = 1.0
    consistency: float = 1.0
    physics: float = 1.0

    def validate(self):
        for name, w in self.as_dict().items():
            if w < 0.0:
                raise LossInputError(f"loss weight {name} must be nonnegative, got {w}")

    def as_dict(self):
        return {"prediction": self.prediction, "fairness": self.fairness,
                "consistency": self.consistency, "physics": self.physics}


def total_loss(parts: dict, weights: LossWeights) -> Tensor:
    """Weighted sum of already sample-normalized loss parts (missing parts count as zero)."""
    weights.validate()
    total = None
    for name, w in weights.as_dict().items():
        term = parts.get(name)
        if term is None or w == 0.0:
            continue
        term = term * w
        total = term if total is None else total + term
    if total is None:
        total = Tensor(np.float64(0.0))
    return total


@dataclass
class LossReport:
    """Per-step or per-epoch record of the objective decomposition."""

    l_p: float = 0.0
    l_f_pre: float = 0.0
    l_c: float = 0.0
    l_phy: float = 0.0
    total: float = 0.0
    weights: dict = field(default_factory=dict)
    n_train: int = 0
    n_fair: int = 0

    def to_json_dict(self) -> dict:
        return {
            "schema_version": 1,
            "l_p": self.l_p, "l_f_pre": self.l_f_pre, "l_c": self.l_c,
            "l_phy": self.l_phy, "total": self.total,
            "weights": dict(self.weights),
            "n_train": self.n_train, "n_fair": self.n_fair,
        }

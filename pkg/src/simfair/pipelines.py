"""The seven training strategies sharing one trainer skeleton, plus evaluation.

Strategies differ only in which loss terms are active, where the fairness
term draws its labels (train truth, the model's own test predictions, or
chain-inverted simulation labels), and whether a simulation-label
pretraining phase runs first.  Training never sees test labels: the test
side enters as a feature-only container that has no label field at all.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .checkpoint import load_checkpoint, save_checkpoint
from .dataworld import StDataset, StFeatures, window_features
from .losses import (LossInputError, LossReport, LossWeights, PerLocationErrors,
                     consistency_loss, fairness_measure, mse_loss, pearson_r,
                     phy_loss_pm1, phy_loss_pm2, pm1_constraint_factors,
                     preliminary_fairness_loss, rmse)
from .nets import FnnPredictor, LstmPredictor, Normalization
from .simulators import STEFAN_BOLTZMANN


class PipelineError(ValueError):
    """Raised on invalid strategy setup (missing chain, labelled test side, ...)."""


class TrainingDiverged(RuntimeError):
    """Raised when a loss goes non-finite; carries diagnostics."""


@dataclass
class StrategySpec:
    name: str
    display: str
    weights: LossWeights
    pretrain: bool = False
    fairness_source: str = "none"   # none | train | test_self | test_sim
    uses_consistency: bool = False
    uses_physics: bool = False
    needs_chain: bool = False


def _registry() -> dict:
    return {
        "basenet": StrategySpec("basenet", "BaseNet", LossWeights(1, 0, 0, 0)),
        "sim": StrategySpec("sim", "Sim", LossWeights(1, 0, 0, 0),
                            pretrain=True, needs_chain=True),
        "simphy": StrategySpec("simphy", "SimPhy", LossWeights(1, 0, 0, 1),
                               pretrain=True, uses_physics=True, needs_chain=True),
        "regfair": StrategySpec("regfair", "RegFair", LossWeights(1, 1, 0, 0),
                                fairness_source="train"),
        "selfreg": StrategySpec("selfreg", "Self-Reg", LossWeights(1, 1, 0, 0),
                                fairness_source="test_self"),
        "simfair": StrategySpec("simfair", "SimFair", LossWeights(1, 1, 1, 0),
                                fairness_source="test_sim", uses_consistency=True,
                                needs_chain=True),
        "simfair-p": StrategySpec("simfair-p", "SimFair-P", LossWeights(1, 1, 1, 1),
                                  fairness_source="test_sim", uses_consistency=True,
                                  uses_physics=True, needs_chain=True),
    }


STRATEGY_NAMES = tuple(_registry().keys())
_ALIASES = {"self-reg": "selfreg", "simfairp": "simfair-p", "base": "basenet"}


def resolve_strategy(name: str, weight_overrides=None) -> StrategySpec:
    key = name.strip().lower()
    key = _ALIASES.get(key, key)
    reg = _registry()
    if key not in reg:
        raise PipelineError(f"unknown strategy {name!r}; expected one of {STRATEGY_NAMES}")
    spec = reg[key]
    if weight_overrides is not None:
        w = list(weight_overrides)
        if len(w) != 4:
            raise PipelineError("weight overrides need 4 entries (prediction, fairness, "
                                "consistency, physics)")
        spec.weights = LossWeights(*[float(v) for v in w])
    return spec


@dataclass
class TrainConfig:
    epochs: int = 50
    batch_size: int = 32
    lr: float = 1e-2
    decay_steps: int = 150
    decay_rate: float = 0.96
    pretrain_epochs: int = 15
    max_rows: int = 5000
    model: str = "fnn"
    hidden: int = 256
    n_hidden: int = 3
    lstm_layers: int = 3
    fc_sizes: tuple = (1024, 128)
    window: int = 8
    pm1_loss_variant: str = "hinge"
    loss_weights: tuple | None = None
    audit: bool = False

    def build_model(self, d_in: int, seed: int = 0):
        if self.model == "fnn":
            return FnnPredictor(d_in, self.hidden, self.n_hidden, seed=seed)
        if self.model == "lstm":
            return LstmPredictor(d_in, self.hidden, self.lstm_layers,
                                 tuple(self.fc_sizes), self.window, seed=seed)
        raise PipelineError(f"unknown model kind {self.model!r}")

    def to_json_dict(self) -> dict:
        d = asdict(self)
        d["fc_sizes"] = list(self.fc_sizes)
        d["schema_version"] = 1
        return d

    @classmethod
    def from_json_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d.pop("schema_version", None)
        if "fc_sizes" in d:
            d["fc_sizes"] = tuple(d["fc_sizes"])
        if "loss_weights" in d and d["loss_weights"] is not None:
            d["loss_weights"] = tuple(d["loss_weights"])
        return cls(**d)


@dataclass
class TrainHistory:
    epochs: list = field(default_factory=list)
    audit: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# Row selection and batching
# ---------------------------------------------------------------------------

def _stratified_cap(loc_ids, cap: int) -> np.ndarray:
    """Deterministic location-stratified subsample, even coverage in row order."""
    n = len(loc_ids)
    if n <= cap:
        return np.arange(n)
    by_loc: dict = {}
    for i, s in enumerate(np.asarray(loc_ids)):
        by_loc.setdefault(s, []).append(i)
    frac = cap / n
    keep = []
    for loc in sorted(by_loc):
        rows = by_loc[loc]
        take = max(1, int(round(len(rows) * frac)))
        pos = np.linspace(0, len(rows) - 1, take).round().astype(int)
        keep.extend(rows[p] for p in sorted(set(pos)))
    return np.asarray(sorted(keep))


def _location_batches(locs, perm: np.ndarray, batch_size: int) -> list[np.ndarray]:
    """Batches from a permutation, fixed up so each holds >= 2 locations."""
    locs = np.asarray(locs)
    batches = [perm[i:i + batch_size].copy() for i in range(0, len(perm), batch_size)]
    for j, b in enumerate(batches):
        if len(b) < 2 or len(set(locs[b].tolist())) >= 2:
            continue
        for j2 in range(len(batches)):
            if j2 == j:
                continue
            cand = batches[j2]
            k = np.where(locs[cand] != locs[b][0])[0]
            if len(k):
                b[0], cand[k[0]] = cand[k[0]], b[0]
                break
    return batches


def _predict(model, X: np.ndarray, chunk: int = 4096) -> np.ndarray:
    outs = []
    with ad.no_grad():
        for lo in range(0, len(X), chunk):
            outs.append(model.forward(X[lo:lo + chunk]).data[:, 0])
    return np.concatenate(outs)


def _design(data, model_kind: str, window: int):
    """(X, y_or_None, locs, end_rows) in the layout the model consumes."""
    has_labels = isinstance(data, StDataset)
    if model_kind == "lstm":
        x3, locs, _, ends = window_features(data.X, data.loc_ids, data.time_index, window)
        y = data.Y[ends] if has_labels else None
        return x3, y, locs, ends
    idx = np.arange(len(data.loc_ids))
    y = data.Y if has_labels else None
    return data.X, y, np.asarray(data.loc_ids), idx


def _pm2_scale(energy, y_mean: float, y_std: float) -> float:
    """Slope-matching divisor so the balance residual is O(1) per normalized unit."""
    return 4.0 * float(np.mean(energy.emissivity)) * STEFAN_BOLTZMANN * y_mean ** 3 * y_std


# ---------------------------------------------------------------------------
# Trainer
# ---------------------------------------------------------------------------

def train(strategy, model, train_data: StDataset, test_features: StFeatures | None = None,
          chain=None, cfg: TrainConfig | None = None, seed: int = 0):
    """Train a predictor under one of the named strategies.

    Returns (model, TrainHistory).  Test-side inputs must be a label-free
    StFeatures; strategies that do not use the test side ignore it.
    Deterministic in (strategy, cfg, seed).
    """
    cfg = cfg or TrainConfig()
    spec = strategy if isinstance(strategy, StrategySpec) else \
        resolve_strategy(strategy, cfg.loss_weights)
    w = spec.weights
    w.validate()

    if spec.needs_chain and chain is None:
        raise PipelineError(
            f"strategy '{spec.name}' requires a trained inverse surrogate (--chain)")
    if test_features is not None and not isinstance(test_features, StFeatures):
        raise PipelineError("test side must be a label-free StFeatures "
                            "(use StDataset.features_only())")
    needs_test = spec.fairness_source in ("test_self", "test_sim") and w.fairness > 0.0
    if needs_test and test_features is None:
        raise PipelineError(f"strategy '{spec.name}' needs test features for its fairness term")

    Xtr_all, ytr_all, loc_tr_all, end_tr_all = _design(train_data, model.kind, cfg.window)
    keep = _stratified_cap(loc_tr_all, cfg.max_rows)
    Xtr, ytr, loc_tr = Xtr_all[keep], ytr_all[keep], loc_tr_all[keep]
    end_tr = end_tr_all[keep]
    n_tr = len(ytr)

    norm = Normalization.fit(Xtr, ytr)
    model.set_normalization(norm)
    ytr_n = norm.scale_y_values(ytr)
    snap = lambda X: X[:, -1, :] if X.ndim == 3 else X  # chain/physics see snapshots

    Xte = loc_te = None
    n_te = 0
    if needs_test:
        Xte_all, _, loc_te_all, _ = _design(test_features, model.kind, cfg.window)
        keep_te = _stratified_cap(loc_te_all, cfg.max_rows)
        Xte, loc_te = Xte_all[keep_te], loc_te_all[keep_te]
        n_te = len(loc_te)

    sim_test_n = None
    if spec.fairness_source == "test_sim" and w.fairness > 0.0:
        sim_test_n = norm.scale_y_values(chain.sim_labels(snap(Xte)))
    sim_train_n = None
    if (spec.uses_consistency and w.consistency > 0.0) or spec.pretrain:
        sim_train_n = norm.scale_y_values(chain.sim_labels(snap(Xtr)))

    phy_kind = None
    if spec.uses_physics and w.physics > 0.0:
        phy_kind = train_data.sim_kind
        if phy_kind == "pm1":
            eps_tr, eta_tr = pm1_constraint_factors(snap(Xtr), chain)
            band_scale = snap(Xtr).std(axis=0)
        elif phy_kind == "pm2":
            energy = train_data.energy_inputs().subset(end_tr)
            e_scale = _pm2_scale(energy, float(ytr.mean()), norm.y_std)
        else:
            raise PipelineError("physics losses need a pm1 or pm2 dataset with ground-state")

    rng_train = np.random.default_rng([seed, 31])
    rng_test = np.random.default_rng([seed, 32])
    params = model.parameters()
    opt = ad.AdamState(lr0=cfg.lr, decay_steps=cfg.decay_steps, decay_rate=cfg.decay_rate)
    history = TrainHistory()

    if spec.pretrain:
        for _ in range(cfg.pretrain_epochs):
            perm = rng_train.permutation(n_tr)
            for lo in range(0, n_tr, cfg.batch_size):
                b = perm[lo:lo + cfg.batch_size]
                pred_n = (model.forward(Xtr[b]) - norm.y_mean) * (1.0 / norm.y_std)
                ad.backward(mse_loss(pred_n, sim_train_n[b][:, None]))
                ad.adam_step(params, opt)

    pseudo_n = None
    if spec.fairness_source == "test_self" and w.fairness > 0.0:
        pseudo_n = norm.scale_y_values(_predict(model, Xte))
        if cfg.audit:
            history.audit["pseudo_used"] = []
            history.audit["pred_end"] = []

    def test_batch_stream():
        while True:
            perm = rng_test.permutation(n_te)
            for b in _location_batches(loc_te, perm, cfg.batch_size):
                yield b

    test_stream = test_batch_stream() if needs_test else None

    for epoch in range(cfg.epochs):
        sums = {"prediction": 0.0, "fairness": 0.0, "consistency": 0.0,
                "physics": 0.0, "total": 0.0}
        if pseudo_n is not None and cfg.audit:
            history.audit["pseudo_used"].append(pseudo_n.copy())
        perm = rng_train.permutation(n_tr)
        batches = _location_batches(loc_tr, perm, cfg.batch_size)
        for b in batches:
            parts = {}
            pred = model.forward(Xtr[b])
            pred_n = (pred - norm.y_mean) * (1.0 / norm.y_std)
            if w.prediction > 0.0:
                parts["prediction"] = mse_loss(pred_n, ytr_n[b][:, None])
            if w.fairness > 0.0 and spec.fairness_source == "train":
                parts["fairness"] = preliminary_fairness_loss(pred_n, ytr_n[b], loc_tr[b])
            elif w.fairness > 0.0 and spec.fairness_source in ("test_self", "test_sim"):
                tb = next(test_stream)
                pred_te_n = (model.forward(Xte[tb]) - norm.y_mean) * (1.0 / norm.y_std)
                labels = sim_test_n if spec.fairness_source == "test_sim" else pseudo_n
                parts["fairness"] = preliminary_fairness_loss(pred_te_n, labels[tb], loc_te[tb])
            if spec.uses_consistency and w.consistency > 0.0:
                parts["consistency"] = consistency_loss(ytr_n[b], pred_n, sim_train_n[b])
            if phy_kind == "pm1":
                parts["physics"] = phy_loss_pm1(snap(Xtr[b]), pred, eps=eps_tr[b], eta=eta_tr[b],
                                                variant=cfg.pm1_loss_variant,
                                                band_scale=band_scale)
            elif phy_kind == "pm2":
                parts["physics"] = phy_loss_pm2(pred, energy.subset(b), scale=e_scale)

            total = None
            for key, weight in (("prediction", w.prediction), ("fairness", w.fairness),
                                ("consistency", w.consistency), ("physics", w.physics)):
                if key in parts and weight > 0.0:
                    term = parts[key] * weight
                    total = term if total is None else total + term
                    sums[key] += float(parts[key].data)
            if total is None:
                raise PipelineError(f"strategy '{spec.name}' has no active loss terms")
            sums["total"] += float(total.data)
            if not np.isfinite(total.data):
                raise TrainingDiverged(
                    f"strategy '{spec.name}': non-finite loss at epoch {epoch} "
                    f"(parts: { {k: float(v.data) for k, v in parts.items()} })")
            ad.backward(total)
            ad.adam_step(params, opt)

        nb = len(batches)
        report = LossReport(l_p=sums["prediction"] / nb, l_f_pre=sums["fairness"] / nb,
                            l_c=sums["consistency"] / nb, l_phy=sums["physics"] / nb,
                            total=sums["total"] / nb, weights=w.as_dict(),
                            n_train=n_tr, n_fair=n_te)
        entry = report.to_json_dict()
        entry["epoch"] = epoch
        entry["lr"] = opt.lr_at()
        if spec.fairness_source == "test_sim" and w.fairness > 0.0:
            # full-test pooled term, recomputed once per epoch for the record
            entry["fair_global_term"] = float(
                np.sqrt(np.mean((norm.scale_y_values(_predict(model, Xte)) - sim_test_n) ** 2)))
        history.epochs.append(entry)

        if pseudo_n is not None:
            pseudo_n = norm.scale_y_values(_predict(model, Xte))
            if cfg.audit:
                history.audit["pred_end"].append(pseudo_n.copy())

    return model, history


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

@dataclass
class Metrics:
    rmse: float
    pearson_r: float
    fairness: float
    n: int
    n_locations: int
    flags: dict = field(default_factory=dict)
    per_location: list = field(default_factory=list)

    def to_json_dict(self) -> dict:
        return {"schema_version": 1, "rmse": self.rmse, "pearson_r": self.pearson_r,
                "fairness": self.fairness, "n": self.n, "n_locations": self.n_locations,
                "flags": dict(self.flags), "per_location": list(self.per_location)}


def evaluate(model, test: StDataset, window: int | None = None) -> Metrics:
    """Pooled RMSE, Pearson correlation, and the location fairness measure."""
    width = window if window is not None else getattr(model, "window", 1)
    X, y, locs, _ = _design(test, model.kind, width)
    preds = _predict(model, X)
    r, degenerate = pearson_r(preds, y)
    errs = PerLocationErrors.from_arrays(preds, y, locs)
    fair = fairness_measure(errs)
    flags = {}
    if degenerate:
        flags["pearson_degenerate"] = True
    if len(errs.pairs) < 2:
        flags["single_location"] = True
    per_loc = []
    for loc in sorted(errs.pairs):
        pairs = errs.pairs[loc]
        p = np.asarray([a for a, _ in pairs])
        t = np.asarray([b for _, b in pairs])
        per_loc.append({"location_id": str(loc), "n": len(pairs),
                        "mae": float(np.mean(np.abs(p - t))),
                        "rmse": float(np.sqrt(np.mean((p - t) ** 2)))})
    return Metrics(rmse=rmse(preds, y), pearson_r=r, fairness=fair, n=len(preds),
                   n_locations=len(errs.pairs), flags=flags, per_location=per_loc)


# ---------------------------------------------------------------------------
# Model checkpoints
# ---------------------------------------------------------------------------

def save_model(model, path):
    save_checkpoint(path, model.kind, model.config(), model.to_arrays())


def load_model(path):
    kind, config, arrays, _ = load_checkpoint(path)
    if kind == "fnn":
        return FnnPredictor.from_arrays(config, arrays)
    if kind == "lstm":
        return LstmPredictor.from_arrays(config, arrays)
    raise PipelineError(f"{path}: unknown model kind {kind!r}")

"""Single-hidden-layer recurrent network ensemble for next-quarter ranking.

Each member is a tanh-hidden, linear-output net over the 20 rank features
plus per-equity context units carrying the previous quarter's hidden
activation scaled by a decay factor. Members differ only by initialization;
their score orderings are aggregated by mean position. Training is plain
backpropagation on mean-squared error against winsorized targets, with the
context treated as a fixed input (no gradient through the recurrent copy),
and epoch count is capped by early stopping on a 2-of-10 validation split
chosen up front at random.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .features import FeatureMatrix, N_FEATURES

logger = logging.getLogger(__name__)

WINSOR_PCT = (1.0, 99.0)
VALIDATION_QUARTERS = 2
TRAIN_QUARTERS = 10
PATIENCE = 10
MODEL_FORMAT_VERSION = 1


@dataclass
class AnnConfig:
    hidden_units: int = 8
    learning_rate: float = 0.02
    epochs: int = 200
    context_decay: float = 0.5
    init_count: int = 8
    seed: int = 0

    def __post_init__(self):
        if not 2 <= self.hidden_units <= 16:
            raise ValidationError(f"hidden_units {self.hidden_units} outside [2, 16]")
        if not 1e-4 <= self.learning_rate <= 1e-1:
            raise ValidationError(f"learning_rate {self.learning_rate} outside [1e-4, 1e-1]")
        if self.epochs < 1:
            raise ValidationError("epochs must be >= 1")
        if not 0.0 <= self.context_decay <= 1.0:
            raise ValidationError(f"context_decay {self.context_decay} outside [0, 1]")
        if self.init_count < 1:
            raise ValidationError("init_count must be >= 1")


@dataclass
class AnnMember:
    w_in: np.ndarray  # (20 + hidden, hidden)
    b_hidden: np.ndarray  # (hidden,)
    w_out: np.ndarray  # (hidden, 1)
    b_out: float
    context: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def hidden_units(self) -> int:
        return self.w_in.shape[1]

    def forward(self, features: np.ndarray, context_rows: np.ndarray):
        scores, hidden, _ = self.forward_full(features, context_rows)
        return scores, hidden

    def forward_full(self, features: np.ndarray, context_rows: np.ndarray):
        x = np.hstack([features, context_rows])
        hidden = np.tanh(x @ self.w_in + self.b_hidden)
        scores = hidden @ self.w_out + self.b_out
        return scores[:, 0], hidden, x

    def context_rows(self, ids, decay: float) -> np.ndarray:
        h = self.hidden_units
        rows = np.zeros((len(ids), h))
        for i, eid in enumerate(ids):
            prev = self.context.get(eid)
            if prev is not None:
                rows[i] = decay * prev
        return rows


@dataclass
class EnsembleModel:
    members: list[AnnMember]
    config: AnnConfig
    train_window: tuple[str, str]
    val_loss: float
    degenerate_targets: bool = False


def _winsorize(y: np.ndarray) -> np.ndarray:
    valid = y[~np.isnan(y)]
    if valid.size == 0:
        return y
    lo, hi = np.percentile(valid, WINSOR_PCT)
    return np.clip(y, lo, hi)


def _positions(ids: np.ndarray, scores: np.ndarray) -> np.ndarray:
    """Descending-score positions 1..N, ties broken by id."""
    order = np.lexsort((ids, -scores))
    pos = np.empty(len(ids))
    pos[order] = np.arange(1, len(ids) + 1)
    return pos


def _row_alignments(mats) -> list[np.ndarray | None]:
    """For each quarter, map its rows to the previous quarter's rows (-1
    where the equity was not active then). Context survives only across
    consecutive active quarters."""
    aligns: list[np.ndarray | None] = [None]
    for prev, cur in zip(mats, mats[1:]):
        if prev.ids == cur.ids:
            aligns.append(np.arange(len(cur.ids)))
            continue
        lookup = {eid: i for i, eid in enumerate(prev.ids)}
        aligns.append(np.array([lookup.get(eid, -1) for eid in cur.ids]))
    return aligns


def _context_rows(hidden_prev, align, decay: float, n: int, h: int) -> np.ndarray:
    ctx = np.zeros((n, h))
    if hidden_prev is not None and align is not None:
        mask = align >= 0
        ctx[mask] = decay * hidden_prev[align[mask]]
    return ctx


def _train_member(mats, targets, aligns, train_idx, val_idx, config: AnnConfig, rng) -> tuple[AnnMember, float]:
    h = config.hidden_units
    n_in = N_FEATURES + h
    pooled = np.concatenate([targets[i][~np.isnan(targets[i])] for i in train_idx])
    # zero output weights + mean output bias: the net starts at the best
    # constant fit and grows signal terms from there
    member = AnnMember(
        w_in=rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(n_in, h)),
        b_hidden=np.zeros(h),
        w_out=np.zeros((h, 1)),
        b_out=float(pooled.mean()),
    )
    train_set, val_set = set(train_idx), set(val_idx)
    valid_masks = [~np.isnan(y) for y in targets]
    best = (np.inf, None)  # (val mse, weight snapshot)
    bad = 0
    for _ in range(config.epochs):
        hidden_prev = None
        val_sse, val_n = 0.0, 0
        for qi, fm in enumerate(mats):
            ctx = _context_rows(hidden_prev, aligns[qi], config.context_decay, len(fm.ids), h)
            scores, hidden, x = member.forward_full(fm.features, ctx)
            hidden_prev = hidden
            valid = valid_masks[qi]
            n_valid = int(valid.sum())
            if n_valid == 0:
                continue
            err = np.where(valid, scores - np.where(valid, targets[qi], 0.0), 0.0)
            if qi in val_set:
                val_sse += float((err**2).sum())
                val_n += n_valid
            elif qi in train_set:
                g = (2.0 / n_valid) * err[:, None]  # (n, 1)
                d_hidden = (g @ member.w_out.T) * (1.0 - hidden**2)
                member.w_out = member.w_out - config.learning_rate * (hidden.T @ g)
                member.b_out = member.b_out - config.learning_rate * float(g.sum())
                member.w_in = member.w_in - config.learning_rate * (x.T @ d_hidden)
                member.b_hidden = member.b_hidden - config.learning_rate * d_hidden.sum(axis=0)
        val_mse = val_sse / val_n if val_n else np.inf
        if val_mse < best[0] - 1e-12:
            best = (val_mse, (member.w_in.copy(), member.b_hidden.copy(),
                              member.w_out.copy(), member.b_out))
            bad = 0
        else:
            bad += 1
            if bad > PATIENCE:
                break
    if best[1] is not None:
        member.w_in, member.b_hidden, member.w_out, member.b_out = (
            best[1][0], best[1][1], best[1][2], best[1][3],
        )
    # final pass to capture the context each equity carries forward
    hidden_prev = None
    for qi, fm in enumerate(mats):
        ctx = _context_rows(hidden_prev, aligns[qi], config.context_decay, len(fm.ids), h)
        _, hidden_prev = member.forward(fm.features, ctx)
    member.context = {eid: hidden_prev[i] for i, eid in enumerate(mats[-1].ids)}
    return member, (best[0] if np.isfinite(best[0]) else np.inf)


def ann_train(feature_matrices, config: AnnConfig) -> EnsembleModel:
    """Train init_count members on ten chronological quarters of features.

    Two of the ten quarters are held out (chosen a priori at random from the
    ensemble seed, shared by all members) to pick the stopping epoch; fewer
    epochs win ties. Targets are winsorized at the cross-sectional 1st/99th
    percentiles. All-equal targets still train (to the constant) but flag
    the model as degenerate.
    """
    mats = list(feature_matrices)
    if len(mats) != TRAIN_QUARTERS:
        raise ValidationError(f"need exactly {TRAIN_QUARTERS} training quarters, got {len(mats)}")
    for fm in mats:
        if fm.targets is None:
            raise ValidationError(f"{fm.quarter}: training quarter lacks targets")

    targets = [_winsorize(fm.targets) for fm in mats]
    pooled = np.concatenate([t[~np.isnan(t)] for t in targets])
    if pooled.size == 0:
        raise ValidationError("no usable targets in any training quarter")
    degenerate = bool(np.all(pooled == pooled[0]))
    if degenerate:
        logger.warning("all training targets equal (%s); model will fit a constant", pooled[0])

    split_rng = np.random.default_rng(np.random.SeedSequence([config.seed, 0x5EED]))
    val_idx = sorted(split_rng.choice(TRAIN_QUARTERS, size=VALIDATION_QUARTERS, replace=False).tolist())
    train_idx = [i for i in range(TRAIN_QUARTERS) if i not in val_idx]

    aligns = _row_alignments(mats)
    members, losses = [], []
    for k in range(config.init_count):
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, k]))
        member, loss = _train_member(mats, targets, aligns, train_idx, val_idx, config, rng)
        members.append(member)
        losses.append(loss)
    finite = [l for l in losses if np.isfinite(l)]
    val_loss = float(np.mean(finite)) if finite else np.inf
    return EnsembleModel(
        members=members,
        config=config,
        train_window=(mats[0].quarter, mats[-1].quarter),
        val_loss=val_loss,
        degenerate_targets=degenerate,
    )


def ann_predict(model: EnsembleModel, fm: FeatureMatrix) -> list[str]:
    """Aggregate member orderings by mean position (ascending, ties by id)."""
    if fm.features.shape[1] != N_FEATURES:
        raise ValidationError(f"feature count {fm.features.shape[1]} != {N_FEATURES}")
    expected = N_FEATURES + model.config.hidden_units
    if model.members[0].w_in.shape[0] != expected:
        raise ValidationError("member weight dimensions do not match feature layout")
    ids = np.array(fm.ids)
    mean_pos = np.zeros(len(ids))
    for member in model.members:
        ctx = member.context_rows(fm.ids, model.config.context_decay)
        scores, _ = member.forward(fm.features, ctx)
        mean_pos += _positions(ids, scores)
    mean_pos /= len(model.members)
    order = np.lexsort((ids, mean_pos))
    return [fm.ids[i] for i in order]


def save_model(model: EnsembleModel, path) -> None:
    doc = {
        "format_version": MODEL_FORMAT_VERSION,
        "config": {
            "hidden_units": model.config.hidden_units,
            "learning_rate": model.config.learning_rate,
            "epochs": model.config.epochs,
            "context_decay": model.config.context_decay,
            "init_count": model.config.init_count,
            "seed": model.config.seed,
        },
        "train_window": list(model.train_window),
        "val_loss": model.val_loss,
        "degenerate_targets": model.degenerate_targets,
        "members": [
            {
                "w_in": m.w_in.tolist(),
                "b_hidden": m.b_hidden.tolist(),
                "w_out": m.w_out.tolist(),
                "b_out": m.b_out,
                "context_ids": list(m.context.keys()),
                "context_h": [m.context[eid].tolist() for eid in m.context],
            }
            for m in model.members
        ],
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True)


def load_model(path) -> EnsembleModel:
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValidationError(f"unsupported model format {doc.get('format_version')!r}")
    members = []
    for m in doc["members"]:
        members.append(
            AnnMember(
                w_in=np.array(m["w_in"]),
                b_hidden=np.array(m["b_hidden"]),
                w_out=np.array(m["w_out"]),
                b_out=float(m["b_out"]),
                context={
                    eid: np.array(h) for eid, h in zip(m["context_ids"], m["context_h"])
                },
            )
        )
    return EnsembleModel(
        members=members,
        config=AnnConfig(**doc["config"]),
        train_window=tuple(doc["train_window"]),
        val_loss=float(doc["val_loss"]),
        degenerate_targets=bool(doc["degenerate_targets"]),
    )

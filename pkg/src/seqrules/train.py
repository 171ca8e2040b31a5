"""Training, evaluation, the hard k-means baseline and model archives."""

from __future__ import annotations

import json
import logging
import struct
import time
from collections import Counter
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import logic
from .data import Dataset, binarize
from .errors import FormatError, InvalidArgument, InvalidDataset, TrainingDiverged
from .nn import Dense, DenseNet, OptimizerState, loss_eval, net_backward, net_forward, optimizer_step
from .rulenet import RuleNetParams, init_rulenet, program_tensor, rulenet_backward, rulenet_forward
from .symbolize import (
    SymbolizerConfig,
    cluster_term,
    discretize_vector,
    flatten_region_major,
    hard_assign,
    lloyd_kmeans,
    region_membership,
    slide_windows,
    soft_assign_backward,
    sq_dists_backward,
    symbolize_backward_to_assignments,
    symbolize_batch,
)
from .nn import softmax_rows

log = logging.getLogger(__name__)

ARCHIVE_MAGIC = b"SEQRULES"
ARCHIVE_VERSION = 1
LLOYD_MAX_POINTS = 50_000


@dataclass
class TrainConfig:
    window: int = 5
    regions: int = 4
    clusters: int = 3
    embed_dim: int = 8
    hidden: int = 32
    alpha: float = 1000.0
    rule_widths: list[int] = field(default_factory=lambda: [16])
    rules: int = 4
    bias: float = 0.5
    lambda1: float = 1.0
    lambda2: float = 1.0
    lr: float = 1e-3
    rule_lr: float | None = None  # rule layers in the joint phase; None means lr
    pretrain_epochs: int = 50
    joint_epochs: int = 100
    batch_size: int = 16
    seed: int = 0
    pretrain: bool = True
    taus: list[float] = field(default_factory=lambda: [0.1, 0.2, 0.3, 0.4, 0.5])
    min_precision: float = 0.8
    refresh_every: int = 10

    def validate(self):
        self.symbolizer.validate()
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise InvalidArgument("lambda1 and lambda2 must be >= 0")
        if not 0 < self.bias < 1:
            raise InvalidArgument("bias must lie in (0, 1)")
        if self.pretrain_epochs < 0 or self.joint_epochs < 0:
            raise InvalidArgument("epoch counts must be >= 0")
        if self.lr <= 0 or (self.rule_lr is not None and self.rule_lr <= 0):
            raise InvalidArgument("learning rates must be > 0")
        if self.batch_size < 1 or self.rules < 1 or self.refresh_every < 1:
            raise InvalidArgument("batch_size, rules and refresh_every must be >= 1")
        if any(not 0 < t < 1 for t in self.taus):
            raise InvalidArgument("every tau must lie in (0, 1)")
        return self

    @property
    def symbolizer(self) -> SymbolizerConfig:
        return SymbolizerConfig(self.window, self.regions, self.clusters, self.embed_dim, self.alpha)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


@dataclass
class TrainedModel:
    encoder: DenseNet
    decoder: DenseNet
    centers: np.ndarray
    rulenet: RuleNetParams
    config: TrainConfig
    target: int = 1
    num_classes: int = 2
    majority_class: int = 0
    history: list = field(default_factory=list)
    train_seconds: float = 0.0
    kind: str = "joint"  # or "hard" for the baseline

    def symbolize(self, X):
        """Fuzzy interpretation vectors; the baseline uses hard assignments."""
        if self.kind == "hard":
            return hard_symbolize(X, self.encoder, self.centers, self.config.symbolizer)
        return symbolize_batch(X, self.encoder, self.centers, self.config.symbolizer)[0]

    def predict_proba(self, X):
        return rulenet_forward(self.rulenet, self.symbolize(X))[0]

    def discretized(self, X):
        return discretize_vector(self.symbolize(X), self.config.clusters)


@dataclass
class Report:
    accuracy_neural: float
    accuracy_rules: float
    rules: list  # dicts: Rule.to_dict() plus test_precision / test_recall
    seconds: float
    losses: list
    dataset: str = ""
    kind: str = "joint"
    config_hash: str = ""

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "Report":
        return cls(**{f.name: d[f.name] for f in fields(cls) if f.name in d})


# -- helpers -------------------------------------------------------------------


def _rng(cfg: TrainConfig, salt=None):
    return np.random.default_rng(cfg.seed if salt is None else [cfg.seed, salt])


def _batches(n: int, size: int, rng):
    order = rng.permutation(n)
    for i in range(0, n, size):
        yield order[i:i + size]


def _all_windows(X, l):
    return slide_windows(X, l).reshape(-1, l)


def init_autoencoder(cfg: TrainConfig, rng):
    enc = DenseNet.init([cfg.window, cfg.hidden, cfg.embed_dim], ["relu", "linear"], rng)
    dec = DenseNet.init([cfg.embed_dim, cfg.hidden, cfg.window], ["relu", "linear"], rng)
    return enc, dec


def _recon_loss_and_grads(enc, dec, windows, enc_acts=None):
    """Mean per-window squared reconstruction error and its gradients."""
    n = len(windows)
    if enc_acts is None:
        enc_acts = net_forward(enc, windows)
    Z = enc_acts[-1][1]
    dec_acts = net_forward(dec, Z)
    diff = dec_acts[-1][1] - windows
    value = float(np.sum(diff * diff) / n)
    dec_grads, grad_Z = net_backward(dec, dec_acts, 2.0 * diff / n)
    return value, dec_grads, grad_Z


def _net_grads(prefix, grads):
    out = {}
    for i, (gw, gb) in enumerate(grads):
        out[f"{prefix}.{i}.weight"] = gw
        out[f"{prefix}.{i}.bias"] = gb
    return out


def _check_finite(value, epoch):
    if not np.isfinite(value):
        raise TrainingDiverged(f"non-finite loss at epoch {epoch}", epoch=epoch)


# -- pretraining ---------------------------------------------------------------


def pretrain(X_train, cfg: TrainConfig, rng, history=None):
    """Autoencoder on all training windows, then Lloyd on the embeddings.

    With ``cfg.pretrain`` off the autoencoder keeps its random weights and
    the centers are the embeddings of K randomly chosen windows.
    """
    X_train = np.asarray(X_train, dtype=np.float64)
    cfg.symbolizer.validate(X_train.shape[1])
    enc, dec = init_autoencoder(cfg, rng)
    all_windows = _all_windows(X_train, cfg.window)
    if not cfg.pretrain:
        pick = rng.choice(len(all_windows), size=cfg.clusters, replace=False)
        return enc, dec, enc(all_windows[pick])
    params = {**enc.params("encoder"), **dec.params("decoder")}
    state = OptimizerState(lr=cfg.lr)
    for epoch in range(cfg.pretrain_epochs):
        total, count = 0.0, 0
        for idx in _batches(len(X_train), cfg.batch_size, rng):
            windows = _all_windows(X_train[idx], cfg.window)
            enc_acts = net_forward(enc, windows)
            value, dec_grads, grad_Z = _recon_loss_and_grads(enc, dec, windows, enc_acts)
            _check_finite(value, epoch)
            enc_grads, _ = net_backward(enc, enc_acts, grad_Z)
            optimizer_step(params, {**_net_grads("encoder", enc_grads),
                                    **_net_grads("decoder", dec_grads)}, state)
            total += value * len(idx)
            count += len(idx)
        if history is not None:
            history.append({"phase": "pretrain", "epoch": epoch, "recon": total / count})
    Z = enc(all_windows)
    if len(Z) > LLOYD_MAX_POINTS:
        Z = Z[rng.choice(len(Z), size=LLOYD_MAX_POINTS, replace=False)]
    centers = lloyd_kmeans(Z, cfg.clusters, rng)
    return enc, dec, centers


# -- joint objective -------------------------------------------------------------


def joint_loss(enc, dec, centers, rules: RuleNetParams, Xb, yb, cfg: TrainConfig,
               need_grads: bool = True):
    """Reconstruction + lambda1 * clustering + lambda2 * BCE for one batch.

    The first two terms are averaged over windows, the rule term over
    sequences. Returns ``(terms, grads)`` with ``grads`` keyed like the
    parameter dict used by :func:`train_joint`.
    """
    sym = cfg.symbolizer
    V, cache = symbolize_batch(Xb, enc, centers, sym)
    B, W, l = cache.windows.shape
    n_win = B * W
    windows = cache.windows.reshape(n_win, l)
    recon, dec_grads, grad_Z = _recon_loss_and_grads(enc, dec, windows, cache.acts)
    per_window, grad_D = cluster_term(cache.D, cache.G, sym.alpha)
    cluster = float(per_window.mean())
    grad_D = grad_D * (cfg.lambda1 / n_win)
    y_hat, rcache = rulenet_forward(rules, V)
    rule_value, grad_y = loss_eval("bce", y_hat, np.asarray(yb, dtype=np.float64))
    terms = {
        "recon": recon,
        "cluster": cluster,
        "rule": rule_value,
        "total": recon + cfg.lambda1 * cluster + cfg.lambda2 * rule_value,
    }
    if not need_grads:
        return terms, None
    rule_grads, grad_V = rulenet_backward(rules, rcache, cfg.lambda2 * grad_y)
    grad_G = symbolize_backward_to_assignments(cache, grad_V)
    grad_D = grad_D + soft_assign_backward(cache.G, grad_G, sym.alpha)
    gz, grad_centers = sq_dists_backward(cache.Z, centers, grad_D.reshape(n_win, -1))
    enc_grads, _ = net_backward(enc, cache.acts, grad_Z + gz)
    grads = {
        **_net_grads("encoder", enc_grads),
        **_net_grads("decoder", dec_grads),
        "centers": grad_centers,
        **{f"rules.{i}": g for i, g in enumerate(rule_grads)},
    }
    return terms, grads


def _param_dict(enc, dec, centers, rules):
    return {**enc.params("encoder"), **dec.params("decoder"), "centers": centers,
            **rules.params("rules")}


def train_joint(X_train, y_train, cfg: TrainConfig, rng=None, target: int = 1,
                num_classes: int = 2, init=None) -> TrainedModel:
    """Pretrain, then minimise the joint objective over all parameters.

    ``y_train`` holds binary labels (1 = ``target``). ``init`` may supply a
    ``(encoder, decoder, centers)`` triple to skip pretraining.
    """
    cfg.validate()
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train)
    if not np.isin(y_train, [0, 1]).all():
        raise InvalidDataset("train_joint needs binary labels")
    rng = _rng(cfg) if rng is None else rng
    start = time.perf_counter()
    history = []
    if init is None:
        enc, dec, centers = pretrain(X_train, cfg, rng, history)
    else:
        enc, dec, centers = (init[0].copy(), init[1].copy(), np.array(init[2], dtype=np.float64))
    V0 = symbolize_batch(X_train, enc, centers, cfg.symbolizer)[0]
    # one draw seeds the rule-net init, so its shape never shifts the batch order
    init_rng = np.random.default_rng(rng.integers(2**63))
    rules = init_rulenet(cfg.clusters * cfg.regions, cfg.rule_widths, cfg.rules, init_rng, cfg.bias,
                         inputs=V0)
    params = _param_dict(enc, dec, centers, rules)
    state = OptimizerState(lr=cfg.lr)
    if cfg.rule_lr is not None:
        state.param_lr = {k: cfg.rule_lr for k in rules.params("rules")}
    for epoch in range(cfg.joint_epochs):
        sums = Counter()
        for idx in _batches(len(X_train), cfg.batch_size, rng):
            terms, grads = joint_loss(enc, dec, centers, rules, X_train[idx], y_train[idx], cfg)
            _check_finite(terms["total"], epoch)
            try:
                optimizer_step(params, grads, state)
            except TrainingDiverged as exc:
                exc.epoch = epoch
                raise
            for k, v in terms.items():
                sums[k] += v * len(idx)
        history.append({"phase": "joint", "epoch": epoch,
                        **{k: sums[k] / len(X_train) for k in ("recon", "cluster", "rule", "total")}})
    return TrainedModel(enc, dec, centers, rules, cfg, target=target, num_classes=num_classes,
                        history=history, train_seconds=time.perf_counter() - start)


def full_objective(model: TrainedModel, X, y) -> float:
    """Joint objective over a whole split (one batch)."""
    terms, _ = joint_loss(model.encoder, model.decoder, model.centers, model.rulenet, X, y,
                          model.config, need_grads=False)
    return terms["total"]


# -- one-vs-rest driver ------------------------------------------------------------


def default_targets(ds: Dataset, target: int | None):
    if target is not None:
        if not 0 <= target < ds.num_classes:
            raise InvalidArgument(f"target class {target} outside [0, {ds.num_classes})")
        return [target]
    return [1] if ds.num_classes == 2 else list(range(ds.num_classes))


def fit(ds: Dataset, cfg: TrainConfig, target: int | None = None, hard: bool = False) -> list:
    """Train one binary model per target class (a single model for binary data)."""
    models = []
    targets = default_targets(ds, target)
    counts = Counter(ds.y_train.tolist())
    majority = max(sorted(counts), key=lambda c: counts[c])
    for t in targets:
        rng = _rng(cfg) if len(targets) == 1 else _rng(cfg, salt=t)
        y = binarize(ds, t).y_train
        trainer = run_hard_training if hard else train_joint
        model = trainer(ds.X_train, y, cfg, rng, target=t, num_classes=ds.num_classes)
        model.majority_class = majority
        models.append(model)
    return models


# -- rules and evaluation -----------------------------------------------------------


def target_labels(y, target, num_classes):
    """Labels as seen by a single-target model: ``target`` or the other class."""
    other = (1 - target) if num_classes == 2 else -1
    return np.where(y == target, target, other), other


def extract_ruleset(model: TrainedModel, X_train, y_train, taus=None, min_precision=None):
    """Rules over the tau sweep, scored on the training split and filtered by precision."""
    cfg = model.config
    taus = cfg.taus if taus is None else taus
    min_precision = cfg.min_precision if min_precision is None else min_precision
    D = model.discretized(X_train)
    M_P = program_tensor(model.rulenet)
    seen, kept = set(), []
    for tau in sorted(taus):
        for rule in logic.extract_rules(M_P, tau, model.target, cfg.clusters):
            if rule.key in seen:
                continue
            seen.add(rule.key)
            rule.precision, rule.recall = logic.rule_metrics(rule, D, y_train, cfg.clusters)
            if rule.precision is not None and rule.precision >= min_precision:
                kept.append(rule)
    kept.sort(key=lambda r: (-r.precision, -r.recall, len(r.body), r.body))
    return kept


def _fallback(rules, D, y, K):
    """Majority training class among inputs no kept rule covers."""
    covered = np.zeros(len(D), dtype=bool)
    for r in rules:
        covered |= logic.rules_fire(r, D, K)
    pool = y[~covered] if (~covered).any() else y
    counts = Counter(pool.tolist())
    return max(sorted(counts), key=lambda c: counts[c])


def evaluate(models, ds: Dataset, taus=None, min_precision=None) -> Report:
    """Accuracy of the network output and of the extracted rules on the test split."""
    if isinstance(models, TrainedModel):
        models = [models]
    if len(ds.X_test) == 0:
        raise InvalidDataset("empty test split")
    K = models[0].config.clusters
    single = len(models) == 1
    if single:
        m = models[0]
        y_tr, _ = target_labels(ds.y_train, m.target, ds.num_classes)
        y_te, other = target_labels(ds.y_test, m.target, ds.num_classes)
        y_hat = m.predict_proba(ds.X_test)
        pred_n = np.where(y_hat >= 0.5, m.target, other)
    else:
        y_tr, y_te = ds.y_train, ds.y_test
        scores = np.stack([m.predict_proba(ds.X_test) for m in models], axis=1)
        pred_n = np.array([m.target for m in models])[scores.argmax(axis=1)]
    acc_n = float(np.mean(pred_n == y_te))

    all_rules, rule_dicts = [], []
    D_tr_all = [m.discretized(ds.X_train) for m in models]
    D_te_all = [m.discretized(ds.X_test) for m in models]
    for m, D_tr, D_te in zip(models, D_tr_all, D_te_all):
        rules = extract_ruleset(m, ds.X_train, y_tr, taus, min_precision)
        for r in rules:
            d = r.to_dict()
            fires = logic.rules_fire(r, D_te, K)
            pos = y_te == r.head
            d["test_precision"] = float((fires & pos).sum() / fires.sum()) if fires.any() else None
            d["test_recall"] = float((fires & pos).sum() / pos.sum()) if pos.any() else None
            rule_dicts.append(d)
        all_rules.append(rules)
    counts = Counter(y_tr.tolist())
    if single:
        fallback = _fallback(all_rules[0], D_tr_all[0], y_tr, K)
        pred_r = logic.classify_batch(all_rules[0], D_te_all[0], fallback, K, counts)
    else:
        # each model has its own symbolizer, so pick per model and resolve by precision
        best_p = np.full(len(ds.X_test), -np.inf)
        pred_r = np.full(len(ds.X_test), -1)
        covered_tr = np.zeros(len(ds.X_train), dtype=bool)
        for rules, D_tr, D_te in zip(all_rules, D_tr_all, D_te_all):
            for r in rules:
                covered_tr |= logic.rules_fire(r, D_tr, K)
                fires = logic.rules_fire(r, D_te, K)
                better = fires & (r.precision > best_p)
                pred_r[better] = r.head
                best_p[better] = r.precision
        pool = y_tr[~covered_tr] if (~covered_tr).any() else y_tr
        pc = Counter(pool.tolist())
        pred_r[pred_r == -1] = max(sorted(pc), key=lambda c: pc[c])
    acc_r = float(np.mean(pred_r == y_te))
    losses = [{"target": int(m.target), **h} for m in models for h in m.history]
    return Report(acc_n, acc_r, rule_dicts, float(sum(m.train_seconds for m in models)), losses,
                  dataset=ds.name, kind=models[0].kind)


def top_rule(report: Report):
    """Highest training precision, then recall, then shortest body."""
    if not report.rules:
        return None
    return min(report.rules, key=lambda r: (-r["precision"], -r["recall"], len(r["body"])))


# -- hard k-means baseline ------------------------------------------------------------


def hard_symbolize(X, encoder, centers, sym: SymbolizerConfig):
    """Interpretation vectors from one-hot nearest-center assignments."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    B, T = X.shape
    windows = slide_windows(X, sym.window)
    W = windows.shape[1]
    A = hard_assign(encoder(windows.reshape(B * W, sym.window)), centers).reshape(B, W, -1)
    c = np.einsum("bwk,wr->bkr", A, region_membership(T, sym.window, sym.regions))
    c_p = np.swapaxes(softmax_rows(np.swapaxes(c, 1, 2)), 1, 2)
    return flatten_region_major(c_p)


def _align(new_centers, old_centers):
    """Permute fresh centers to best match the previous ones."""
    cost = ((new_centers[:, None, :] - old_centers[None, :, :]) ** 2).sum(-1)
    rows, cols = linear_sum_assignment(cost)
    out = np.empty_like(new_centers)
    out[cols] = new_centers[rows]
    return out


def run_hard_training(X_train, y_train, cfg: TrainConfig, rng=None, target: int = 1,
                      num_classes: int = 2) -> TrainedModel:
    """Baseline: frozen pretrained autoencoder, Lloyd assignments, only the rules learn.

    Lloyd is re-run from a fresh seeding every ``cfg.refresh_every`` epochs
    over all training-window embeddings.
    """
    cfg.validate()
    X_train = np.asarray(X_train, dtype=np.float64)
    y_train = np.asarray(y_train, dtype=np.float64)
    rng = _rng(cfg) if rng is None else rng
    start = time.perf_counter()
    history = []
    enc, dec, centers = pretrain(X_train, cfg, rng, history)
    Z = enc(_all_windows(X_train, cfg.window))
    V = hard_symbolize(X_train, enc, centers, cfg.symbolizer)
    rules = init_rulenet(cfg.clusters * cfg.regions, cfg.rule_widths, cfg.rules, rng, cfg.bias,
                         inputs=V)
    params = rules.params("rules")
    state = OptimizerState(lr=cfg.lr if cfg.rule_lr is None else cfg.rule_lr)
    V = None
    for epoch in range(cfg.joint_epochs):
        if epoch % cfg.refresh_every == 0:
            fresh = lloyd_kmeans(Z, cfg.clusters, rng)
            centers = _align(fresh, centers)
            V = hard_symbolize(X_train, enc, centers, cfg.symbolizer)
        total = 0.0
        for idx in _batches(len(X_train), cfg.batch_size, rng):
            y_hat, rcache = rulenet_forward(rules, V[idx])
            value, grad_y = loss_eval("bce", y_hat, y_train[idx])
            _check_finite(value, epoch)
            grads, _ = rulenet_backward(rules, rcache, cfg.lambda2 * grad_y)
            optimizer_step(params, {f"rules.{i}": g for i, g in enumerate(grads)}, state)
            total += value * len(idx)
        history.append({"phase": "hard", "epoch": epoch, "rule": total / len(X_train)})
    return TrainedModel(enc, dec, centers, rules, cfg, target=target, num_classes=num_classes,
                        history=history, train_seconds=time.perf_counter() - start, kind="hard")


def run_hard_baseline(ds: Dataset, cfg: TrainConfig, target: int | None = None) -> Report:
    models = fit(ds, cfg, target, hard=True)
    return evaluate(models, ds)


# -- archives --------------------------------------------------------------------------


def _matrices(model: TrainedModel):
    out = []
    for prefix, net in (("encoder", model.encoder), ("decoder", model.decoder)):
        for i, layer in enumerate(net.layers):
            out.append((f"{prefix}.{i}.weight", layer.weight))
            out.append((f"{prefix}.{i}.bias", layer.bias))
    out.append(("centers", model.centers))
    for i, raw in enumerate(model.rulenet.raws):
        out.append((f"rules.{i}", raw))
    return out


def save_model(model: TrainedModel, path) -> None:
    meta = {
        "config": model.config.to_dict(),
        "target": int(model.target),
        "num_classes": int(model.num_classes),
        "majority_class": int(model.majority_class),
        "kind": model.kind,
        "bias": model.rulenet.bias,
        "activations": {
            "encoder": [l.activation for l in model.encoder.layers],
            "decoder": [l.activation for l in model.decoder.layers],
        },
        "history": model.history,
        "train_seconds": model.train_seconds,
    }
    blob = json.dumps(meta, sort_keys=True).encode()
    parts = [ARCHIVE_MAGIC, struct.pack("<II", ARCHIVE_VERSION, len(blob)), blob]
    mats = _matrices(model)
    parts.append(struct.pack("<I", len(mats)))
    for name, arr in mats:
        arr = np.ascontiguousarray(arr, dtype="<f8")
        bname = name.encode()
        parts.append(struct.pack("<H", len(bname)) + bname)
        parts.append(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


class _Reader:
    def __init__(self, raw: bytes):
        self.raw, self.pos = raw, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.raw):
            raise FormatError("model archive is truncated")
        out = self.raw[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_model(path) -> TrainedModel:
    with open(path, "rb") as fh:
        r = _Reader(fh.read())
    if r.take(len(ARCHIVE_MAGIC)) != ARCHIVE_MAGIC:
        raise FormatError(f"{path}: not a model archive")
    version, blob_len = r.unpack("<II")
    if version != ARCHIVE_VERSION:
        raise FormatError(f"{path}: archive version {version}, expected {ARCHIVE_VERSION}")
    blob = r.take(blob_len)
    try:
        meta = json.loads(blob)
    except ValueError as exc:
        raise FormatError(f"{path}: corrupt metadata ({exc})") from None
    (n_mats,) = r.unpack("<I")
    mats = {}
    for _ in range(n_mats):
        (name_len,) = r.unpack("<H")
        name = r.take(name_len).decode()
        (ndim,) = r.unpack("<I")
        shape = r.unpack(f"<{ndim}Q")
        count = int(np.prod(shape))
        mats[name] = np.frombuffer(r.take(8 * count), dtype="<f8").reshape(shape).astype(np.float64)
    if r.pos != len(r.raw):
        raise FormatError(f"{path}: trailing bytes after archive")

    def net(prefix):
        acts = meta["activations"][prefix]
        return DenseNet(Dense(mats[f"{prefix}.{i}.weight"], mats[f"{prefix}.{i}.bias"], a)
                        for i, a in enumerate(acts))

    try:
        n_rule_layers = sum(1 for k in mats if k.startswith("rules."))
        rulenet = RuleNetParams([mats[f"rules.{i}"] for i in range(n_rule_layers)], meta["bias"])
        return TrainedModel(net("encoder"), net("decoder"), mats["centers"], rulenet,
                            TrainConfig.from_dict(meta["config"]), target=meta["target"],
                            num_classes=meta["num_classes"], majority_class=meta["majority_class"],
                            history=meta["history"], train_seconds=meta["train_seconds"],
                            kind=meta["kind"])
    except KeyError as exc:
        raise FormatError(f"{path}: archive missing {exc}") from None

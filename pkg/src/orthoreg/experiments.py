"""Training loops and experiment harnesses: transductive classification,
ablations, cold-start isolation, edge-masking robustness, spectrum
diagnostics during training, and the inference-time benchmark, plus the
propagation (SGC-style) and graph-convolution comparators.

Everything is full batch and deterministic: all randomness flows from the
config seed, per-trial seeds are ``seed + trial_index``, and the reported
test accuracy always comes from the epoch with the best validation
accuracy.
"""

from __future__ import annotations

import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, Divergence, EmptyMask, ShapeMismatch
from .graphio import Dataset, SparseGraph, add_self_loops, mask_edges, normalize, select_isolated
from .net import (
    GradientBundle,
    MlpParams,
    adam_init,
    adam_step,
    backward,
    cross_entropy,
    forward,
    init_mlp,
)
from .reg import RegularizerSpec, regularizer_value_grad
from .tensor import EigenReport, eigen_report, spmm, spmm_t

THREADS_ENV = "ORTHOREG_THREADS"

# per-dataset trade-off defaults (alpha, beta) for the cross-correlation
# regularizer; overridable per run and by the coarse-grid tuner
DEFAULT_HYPERS = {
    "cora": (2e-3, 1e-6),
    "citeseer": (1e-3, 1e-6),
    "pubmed": (2e-6, 2e-6),
}


@dataclass
class TrainConfig:
    """All hyperparameters of one training run."""

    regularizer: RegularizerSpec = field(default_factory=RegularizerSpec)
    lr: float = 0.01
    dropout_p: float = 0.5
    weight_decay: float = 0.0
    epochs: int = 300
    hidden: int = 256
    embedding: int = 512
    dims: list | None = None
    seed: int = 0
    eigens_every: int = 0
    early_stop_patience: int = 100
    trials: int = 10
    comparator_lambdas: tuple = (0.1,)

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if self.eigens_every < 0:
            raise ConfigError("eigens_every must be >= 0")

    def resolve_dims(self, n_features: int, n_classes: int) -> list:
        if self.dims is not None:
            return list(self.dims)
        return [n_features, self.hidden, self.embedding, n_classes]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["comparator_lambdas"] = list(self.comparator_lambdas)
        return d


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    sup_loss: float
    reg_loss: float
    val_acc: float
    test_acc: float
    eigen: EigenReport | None = None


@dataclass
class TrainHistory:
    records: list
    best_epoch: int
    best_val_acc: float
    best_test_acc: float


@dataclass
class RunReport:
    mean_acc: float
    std_acc: float
    per_trial: list
    config: dict
    wall_clock_s: float
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "mean": self.mean_acc,
            "std": self.std_acc,
            "trials": list(self.per_trial),
            "config": self.config,
            "wall_clock_s": self.wall_clock_s,
            **({"extras": self.extras} if self.extras else {}),
        }


def _dropout_seed(seed: int, epoch: int) -> int:
    return (seed * 1_000_003 + epoch) % (2**63)


def _accuracy(logits: np.ndarray, labels: np.ndarray, idx: np.ndarray) -> float:
    if idx.size == 0:
        raise EmptyMask("accuracy over an empty index set")
    pred = np.argmax(logits[idx], axis=1)
    return float(np.mean(pred == labels[idx]))


def _build_operators(graph: SparseGraph, spec: RegularizerSpec) -> dict:
    ops = {}
    if spec.kind == "laplacian":
        ops["laplacian"] = normalize(graph, "laplacian")
    elif spec.kind == "preg":
        ops["sym"] = normalize(graph, "sym")
    elif spec.kind == "orthoreg":
        ops["rw"] = normalize(graph, "rw")
    return ops


def train(config: TrainConfig, graph: SparseGraph, data: Dataset):
    """Full-batch training of the MLP with the configured regularizer
    injected at the embedding layer. Returns (best params, history); the
    returned parameters are from the epoch with the highest validation
    accuracy."""
    dims = config.resolve_dims(data.n_features, data.n_classes)
    params = init_mlp(dims, seed=config.seed)
    state = adam_init(params, lr=config.lr, weight_decay=config.weight_decay)
    operators = _build_operators(graph, config.regularizer)

    records = []
    best_val, best_test, best_epoch = -1.0, 0.0, 0
    best_params = params.copy()
    since_improvement = 0
    for epoch in range(1, config.epochs + 1):
        h, logits, cache = forward(
            params,
            data.features,
            dropout_p=config.dropout_p,
            seed=_dropout_seed(config.seed, epoch),
            train_mode=True,
        )
        if not (np.all(np.isfinite(h)) and np.all(np.isfinite(logits))):
            raise Divergence(f"activations became non-finite at epoch {epoch}")
        sup_loss, grad_logits = cross_entropy(logits, data.labels, data.train_idx)
        reg_loss, grad_h = regularizer_value_grad(h, config.regularizer, operators)
        total = sup_loss + reg_loss
        if not np.isfinite(total):
            raise Divergence(f"loss became non-finite at epoch {epoch}")
        grads = backward(params, cache, grad_logits, grad_h)
        adam_step(params, grads, state)

        h_eval, logits_eval, _ = forward(params, data.features, train_mode=False)
        val_acc = _accuracy(logits_eval, data.labels, data.val_idx)
        test_acc = _accuracy(logits_eval, data.labels, data.test_idx)
        eig = None
        if config.eigens_every > 0 and epoch % config.eigens_every == 0:
            eig = eigen_report(h_eval, epoch=epoch)
        records.append(
            EpochRecord(
                epoch=epoch,
                train_loss=total,
                sup_loss=sup_loss,
                reg_loss=reg_loss,
                val_acc=val_acc,
                test_acc=test_acc,
                eigen=eig,
            )
        )
        if val_acc > best_val:
            best_val, best_test, best_epoch = val_acc, test_acc, epoch
            best_params = params.copy()
            since_improvement = 0
        else:
            since_improvement += 1
            if 0 < config.early_stop_patience <= since_improvement:
                break

    history = TrainHistory(
        records=records,
        best_epoch=best_epoch,
        best_val_acc=best_val,
        best_test_acc=best_test,
    )
    return best_params, history


def evaluate(params: MlpParams, features, labels, idx) -> float:
    """Accuracy of the eval-mode (dropout-free, graph-free) forward pass."""
    idx = np.asarray(idx, dtype=np.int64).ravel()
    _, logits, _ = forward(params, features, train_mode=False)
    return _accuracy(logits, np.asarray(labels), idx)


def _max_workers() -> int:
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_trials(
    config: TrainConfig,
    graph: SparseGraph,
    data: Dataset,
    n_trials: int | None = None,
    eval_idx=None,
    graph_per_trial=None,
) -> RunReport:
    """Repeat training over ``n_trials`` derived seeds and aggregate test
    accuracy (mean, population std). ``eval_idx`` overrides the evaluation
    index set; ``graph_per_trial`` (trial -> SparseGraph) lets sweeps vary
    the structure per trial."""
    n = config.trials if n_trials is None else n_trials
    t0 = time.perf_counter()

    def one(trial: int) -> float:
        cfg = TrainConfig(**{**config.to_dict(), "seed": config.seed + trial,
                             "regularizer": config.regularizer})
        g = graph if graph_per_trial is None else graph_per_trial(trial)
        params, history = train(cfg, g, data)
        if eval_idx is None:
            return history.best_test_acc
        return evaluate(params, data.features, data.labels, eval_idx)

    workers = _max_workers()
    if workers == 1:
        accs = [one(t) for t in range(n)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            accs = list(pool.map(one, range(n)))
    wall = time.perf_counter() - t0
    return RunReport(
        mean_acc=float(np.mean(accs)),
        std_acc=float(np.std(accs)),
        per_trial=[float(a) for a in accs],
        config=config.to_dict(),
        wall_clock_s=wall,
    )


def coldstart_experiment(
    config: TrainConfig,
    graph: SparseGraph,
    data: Dataset,
    percentile: float = 3.0,
) -> RunReport:
    """Strip the low-degree tail from the graph, train on the reduced
    structure with the fixed labeled set, and score on the isolated nodes
    (feature-only inference; the graph is never consulted at eval time)."""
    isolated, reduced = select_isolated(graph, percentile)
    eval_idx = np.setdiff1d(isolated, np.concatenate([data.train_idx, data.val_idx]))
    report = run_trials(config, reduced, data, eval_idx=eval_idx)
    report.extras["n_isolated"] = int(isolated.size)
    report.extras["n_eval"] = int(eval_idx.size)
    report.extras["arcs_left"] = int(reduced.n_arcs)
    return report


def robustness_sweep(
    config: TrainConfig,
    graph: SparseGraph,
    data: Dataset,
    ratios,
    trials: int | None = None,
    gcn_kwargs: dict | None = None,
) -> list:
    """Per masking ratio, train the configured model and the
    graph-convolution comparator on independently masked copies of the
    graph (one mask per trial) and record test accuracy."""
    out = []
    n = config.trials if trials is None else trials
    for ratio in ratios:
        if not 0.0 <= ratio <= 1.0:
            raise ShapeMismatch(f"mask ratio {ratio} outside [0, 1]")
        masker = lambda trial, r=ratio: mask_edges(graph, r, seed=config.seed + trial)
        model_report = run_trials(config, graph, data, n_trials=n, graph_per_trial=masker)
        gcn_report = gcn_comparator(
            graph, data, seed=config.seed, trials=n, graph_per_trial=masker,
            **(gcn_kwargs or {}),
        )
        out.append({"ratio": float(ratio), "model": model_report, "gcn": gcn_report})
    return out


def ablation_suite(graph: SparseGraph, data: Dataset, base_config: TrainConfig) -> dict:
    """Component ablations of the cross-correlation regularizer: drop the
    diagonal reward (alpha=0), drop the off-diagonal penalty (beta=0), and
    vary the pooling depth."""
    base_spec = base_config.regularizer
    if base_spec.kind != "orthoreg":
        raise ShapeMismatch("ablation suite expects an orthoreg base config")

    def variant(**changes) -> TrainConfig:
        spec = RegularizerSpec(**{**asdict(base_spec), **changes})
        cfg_dict = base_config.to_dict()
        cfg_dict["regularizer"] = spec
        return TrainConfig(**cfg_dict)

    rows = {}
    rows["baseline"] = run_trials(base_config, graph, data)
    rows["alpha=0"] = run_trials(variant(alpha=0.0), graph, data)
    rows["beta=0"] = run_trials(variant(beta=0.0), graph, data)
    for t in (1, 2, 3):
        if t == base_spec.hops:
            rows[f"T={t}"] = rows["baseline"]
        else:
            rows[f"T={t}"] = run_trials(variant(hops=t), graph, data)
    return rows


def tune_coarse_grid(
    graph: SparseGraph,
    data: Dataset,
    alphas=(5e-4, 1e-3, 2e-3, 5e-3),
    ratios=(1e2, 1e3, 1e4),
    base_config: TrainConfig | None = None,
) -> dict:
    """Coarse grid over alpha and the alpha/beta ratio, selected on
    validation accuracy with a single short run per cell."""
    cfg = base_config or TrainConfig()
    best = None
    table = []
    for alpha in alphas:
        for ratio in ratios:
            beta = alpha / ratio
            spec = RegularizerSpec(kind="orthoreg", alpha=alpha, beta=beta,
                                   hops=cfg.regularizer.hops or 2)
            cfg_dict = cfg.to_dict()
            cfg_dict["regularizer"] = spec
            trial_cfg = TrainConfig(**cfg_dict)
            _, history = train(trial_cfg, graph, data)
            cell = {"alpha": alpha, "beta": beta, "val_acc": history.best_val_acc,
                    "test_acc": history.best_test_acc}
            table.append(cell)
            if best is None or cell["val_acc"] > best["val_acc"]:
                best = cell
    return {"best": best, "table": table}


# ---------------------------------------------------------------------------
# comparators: k-step propagation + linear classifier, and a two-layer
# graph convolution trained with hand-derived gradients
# ---------------------------------------------------------------------------


def _renormalized_operator(graph: SparseGraph):
    """Self-loop-augmented symmetric normalization, the convention the
    propagation and convolution comparators are defined with."""
    return normalize(add_self_loops(graph), "sym")


def sgc_comparator(
    graph: SparseGraph,
    data: Dataset,
    k: int = 2,
    lr: float = 0.1,
    epochs: int = 150,
    weight_decay: float = 5e-6,
    seed: int = 0,
    trials: int = 10,
) -> RunReport:
    """k-step propagated features + a single linear layer."""
    if k < 0:
        raise ShapeMismatch("propagation depth k must be >= 0")
    op = _renormalized_operator(graph)
    feats = data.features
    for _ in range(k):
        feats = spmm(op, feats)
    propagated = Dataset(
        features=feats,
        labels=data.labels,
        n_classes=data.n_classes,
        train_idx=data.train_idx,
        val_idx=data.val_idx,
        test_idx=data.test_idx,
    )
    config = TrainConfig(
        regularizer=RegularizerSpec(kind="none"),
        lr=lr,
        dropout_p=0.0,
        weight_decay=weight_decay,
        epochs=epochs,
        dims=[data.n_features, data.n_classes],
        seed=seed,
        trials=trials,
    )
    report = run_trials(config, graph, propagated)
    report.extras["k"] = k
    return report


def gcn_forward(op, weights, biases, x, dropout_p=0.0, seed=0, train_mode=False):
    """Two-or-more layer graph convolution: each layer propagates the linear
    transform through the normalized operator; ReLU between layers."""
    rng = np.random.default_rng(seed)
    act = x
    cache = []
    n_layers = len(weights)
    for i, (w, b) in enumerate(zip(weights, biases)):
        inp = act
        mask = None
        if train_mode and dropout_p > 0.0:
            mask = (rng.random(inp.shape) >= dropout_p) / (1.0 - dropout_p)
            inp = inp * mask
        pre = spmm(op, inp @ w) + b
        cache.append({"input": inp, "mask": mask, "pre": pre})
        act = np.maximum(pre, 0.0) if i < n_layers - 1 else pre
    return act, cache


def gcn_backward(op, weights, cache, grad_logits, weight_decay=0.0):
    """Exact gradients for gcn_forward; propagation is undone with the
    transposed operator."""
    grad_ws, grad_bs = [None] * len(weights), [None] * len(weights)
    g = grad_logits
    for i in reversed(range(len(weights))):
        layer = cache[i]
        if i < len(weights) - 1:
            g = g * (layer["pre"] > 0.0)
        back = spmm_t(op, g)
        grad_ws[i] = layer["input"].T @ back
        grad_bs[i] = g.sum(axis=0)
        if weight_decay > 0.0 and i == 0:
            grad_ws[i] = grad_ws[i] + weight_decay * weights[i]
        g = back @ weights[i].T
        if layer["mask"] is not None:
            g = g * layer["mask"]
    return grad_ws, grad_bs


def _gcn_train_once(
    graph: SparseGraph,
    data: Dataset,
    hidden: int,
    lr: float,
    dropout_p: float,
    weight_decay: float,
    epochs: int,
    patience: int,
    seed: int,
    eval_idx=None,
):
    op = _renormalized_operator(graph)
    dims = [data.n_features, hidden, data.n_classes]
    params = init_mlp(dims, seed=seed)
    weights, biases = params.layer_weights, params.layer_biases
    state = adam_init(params, lr=lr, weight_decay=0.0)

    best_val, best_acc, since = -1.0, 0.0, 0
    best_weights = None
    for epoch in range(1, epochs + 1):
        logits, cache = gcn_forward(
            op, weights, biases, data.features,
            dropout_p=dropout_p, seed=_dropout_seed(seed, epoch), train_mode=True,
        )
        loss, grad_logits = cross_entropy(logits, data.labels, data.train_idx)
        if not np.isfinite(loss):
            raise Divergence(f"graph-convolution loss non-finite at epoch {epoch}")
        grad_ws, grad_bs = gcn_backward(op, weights, cache, grad_logits, weight_decay)
        adam_step(params, GradientBundle(grad_ws, grad_bs, grad_logits), state)

        logits_eval, _ = gcn_forward(op, weights, biases, data.features, train_mode=False)
        val_acc = _accuracy(logits_eval, data.labels, data.val_idx)
        idx = data.test_idx if eval_idx is None else eval_idx
        acc = _accuracy(logits_eval, data.labels, idx)
        if val_acc > best_val:
            best_val, best_acc, since = val_acc, acc, 0
            best_weights = [w.copy() for w in weights] + [b.copy() for b in biases]
        else:
            since += 1
            if 0 < patience <= since:
                break
    return best_acc, best_weights


def gcn_comparator(
    graph: SparseGraph,
    data: Dataset,
    hidden: int = 64,
    lr: float = 0.01,
    dropout_p: float = 0.5,
    weight_decay: float = 5e-4,
    epochs: int = 200,
    patience: int = 100,
    seed: int = 0,
    trials: int = 10,
    eval_idx=None,
    graph_per_trial=None,
) -> RunReport:
    """Two-layer graph convolution trained full batch."""
    t0 = time.perf_counter()
    accs = []
    for trial in range(trials):
        g = graph if graph_per_trial is None else graph_per_trial(trial)
        acc, _ = _gcn_train_once(
            g, data, hidden, lr, dropout_p, weight_decay, epochs, patience,
            seed + trial, eval_idx=eval_idx,
        )
        accs.append(acc)
    return RunReport(
        mean_acc=float(np.mean(accs)),
        std_acc=float(np.std(accs)),
        per_trial=[float(a) for a in accs],
        config={
            "model": "gcn", "hidden": hidden, "lr": lr, "dropout_p": dropout_p,
            "weight_decay": weight_decay, "epochs": epochs, "seed": seed,
        },
        wall_clock_s=time.perf_counter() - t0,
    )


def inference_benchmark(
    graph: SparseGraph,
    data: Dataset,
    depths=(2, 3, 4),
    width: int = 256,
    reps: int = 10,
    seed: int = 0,
) -> list:
    """Median wall-clock of feature-only MLP forward vs graph-convolution
    forward at each depth, plus their ratio. Absolute numbers are machine
    specific; the ratio is the meaningful output."""
    op = _renormalized_operator(graph)
    runners = []
    for depth in depths:
        if depth < 1:
            raise ShapeMismatch("depth must be >= 1")
        dims = [data.n_features] + [width] * (depth - 1) + [data.n_classes]
        params = init_mlp(dims, seed=seed)
        weights, biases = params.layer_weights, params.layer_biases

        def mlp_once(params=params):
            forward(params, data.features, train_mode=False)

        def gcn_once(weights=weights, biases=biases):
            gcn_forward(op, weights, biases, data.features, train_mode=False)

        mlp_once()
        gcn_once()
        runners.append({"depth": int(depth), "mlp": mlp_once, "gcn": gcn_once,
                        "mlp_times": [], "gcn_times": []})

    # repetitions interleave across depths so background load bursts do not
    # bias one depth's median against another's
    for _ in range(reps):
        for r in runners:
            t0 = time.perf_counter()
            r["mlp"]()
            r["mlp_times"].append(time.perf_counter() - t0)
            t0 = time.perf_counter()
            r["gcn"]()
            r["gcn_times"].append(time.perf_counter() - t0)

    rows = []
    for r in runners:
        mlp_t = float(np.median(r["mlp_times"]))
        gcn_t = float(np.median(r["gcn_times"]))
        rows.append(
            {
                "depth": r["depth"],
                "mlp_s": mlp_t,
                "gcn_s": gcn_t,
                "gcn_over_mlp": gcn_t / mlp_t,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# output writers (LF endings, '.' decimal, schema documented in the README)
# ---------------------------------------------------------------------------


def write_metrics_jsonl(history: TrainHistory, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in history.records:
            fh.write(
                json.dumps(
                    {
                        "epoch": r.epoch,
                        "sup_loss": r.sup_loss,
                        "reg_loss": r.reg_loss,
                        "val_acc": r.val_acc,
                        "test_acc": r.test_acc,
                    }
                )
                + "\n"
            )


def write_spectrum_csv(history: TrainHistory, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,index,ratio,nesum\n")
        for r in history.records:
            if r.eigen is None:
                continue
            lam = r.eigen.eigenvalues
            top = max(lam[0], 1e-12)
            for i, v in enumerate(lam):
                fh.write(f"{r.epoch},{i + 1},{float(v / top)!r},{float(r.eigen.nesum)!r}\n")


def write_report_json(report: RunReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(report.to_dict(), fh, indent=2)
        fh.write("\n")

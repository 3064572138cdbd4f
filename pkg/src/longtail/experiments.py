"""Desk-scale experiment drivers.

Each driver maps a per-trial function over trial indices and returns row
dicts ready for :func:`longtail.io.write_results`. Trial ``t`` draws all its
randomness from seeds derived from ``(config.seed, t)``, so results do not
depend on how trials are scheduled across worker processes.
"""

from __future__ import annotations

import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields

import numpy as np

from longtail import binary
from longtail.adjust import (
    AdjustmentParams,
    NormalizationSpec,
    nu_from_norms,
    nu_from_priors,
    posthoc_adjust,
    predict,
    weight_normalize_scores,
)
from longtail.dist import (
    GaussianTask,
    LongTailProfile,
    circle_means,
    derive_seeds,
    make_rng,
    priors_from_counts,
    profile_counts,
    sample_class_conditional,
    sample_gaussian,
)
from longtail.loss import build_spec, spec_adaptive, spec_equalised, spec_from_delta
from longtail.metrics import evaluate
from longtail.oracle import (
    bayes_balanced_predict_gaussian,
    consistency_report,
    find_inconsistency_witness,
    random_distribution,
)
from longtail.train import (
    OptimizerConfig,
    OptimizerKind,
    TrainingDiverged,
    forward,
    pearson_correlation,
    train,
    weight_norms,
)

DEFAULT_METHODS = ("erm", "adaptive", "equalised", "logit_adjusted")
DEFAULT_TAU_GRID = tuple(round(0.25 * i, 2) for i in range(11))
POSTHOC_METHODS = ("posthoc_logit_adjustment", "weight_norm_l2", "weight_norm_prior")


@dataclass
class TaskConfig:
    mean_plus: list = field(default_factory=lambda: [1.0, 1.0])
    mean_minus: list = field(default_factory=lambda: [-1.0, -1.0])
    sigma: float = 1.0
    prior_plus: float = 0.05

    def build(self) -> GaussianTask:
        return GaussianTask(np.array(self.mean_plus), np.array(self.mean_minus), self.sigma, self.prior_plus)


@dataclass
class WeightNormConfig:
    num_classes: int = 10
    profile: str = "exp"
    max_count: int = 500
    imbalance_ratio: float = 100.0
    radius: float = 3.0
    sigma: float = 1.0
    n_test_per_class: int = 200
    epochs: int = 100
    sgd_learning_rate: float = 0.1
    adam_learning_rate: float = 0.01


@dataclass
class CurveConfig:
    pi: float = 0.2
    gammas: list = field(default_factory=lambda: [1.0, 8.0])
    n_grid: int = 199
    f_range: float = 5.0


@dataclass
class ConsistencyConfig:
    n_distributions: int = 150
    max_instances: int = 5
    max_classes: int = 4
    n_search: int = 10_000


@dataclass
class ExperimentConfig:
    """Every knob of every command; unknown keys are rejected."""

    seed: int = 0
    trials: int = 100
    n_train: int = 10_000
    n_test: int = 10_000
    task: TaskConfig = field(default_factory=TaskConfig)
    methods: list = field(default_factory=lambda: [{"name": m, "tau": 1.0} for m in DEFAULT_METHODS])
    tau_grid: list = field(default_factory=lambda: list(DEFAULT_TAU_GRID))
    optimizer: dict = field(default_factory=lambda: OptimizerConfig().to_dict())
    weightnorm: WeightNormConfig = field(default_factory=WeightNormConfig)
    curves: CurveConfig = field(default_factory=CurveConfig)
    consistency: ConsistencyConfig = field(default_factory=ConsistencyConfig)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.tau_grid:
            raise ValueError("tau_grid must be non-empty")
        if any(t < 0 for t in self.tau_grid):
            raise ValueError("tau values must be >= 0")
        self.methods = [_normalise_method(m) for m in self.methods]
        self.optimizer = OptimizerConfig(**{**OptimizerConfig().to_dict(), **self.optimizer}).to_dict()

    @classmethod
    def from_dict(cls, data: dict | None) -> ExperimentConfig:
        data = dict(data or {})
        nested = {"task": TaskConfig, "weightnorm": WeightNormConfig, "curves": CurveConfig,
                  "consistency": ConsistencyConfig}
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        for key, sub in nested.items():
            if key in data and isinstance(data[key], dict):
                sub_known = {f.name for f in fields(sub)}
                bad = set(data[key]) - sub_known
                if bad:
                    raise ValueError(f"unknown keys in {key}: {sorted(bad)}")
                data[key] = sub(**data[key])
        return cls(**data)

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    def optimizer_config(self, **overrides) -> OptimizerConfig:
        return OptimizerConfig(**{**self.optimizer, **overrides})


def _normalise_method(m) -> dict:
    if isinstance(m, str):
        name, _, tau = m.partition(":")
        return {"name": name, "tau": float(tau) if tau else 1.0}
    return {"name": m["name"], "tau": float(m.get("tau", 1.0))}


def map_trials(fn, config: ExperimentConfig, jobs: int = 1) -> list:
    """``[fn(config, t) for t in range(config.trials)]``, optionally across processes."""
    trials = range(config.trials)
    if jobs <= 1:
        return [fn(config, t) for t in trials]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, [config] * config.trials, trials))


def trial_data(config: ExperimentConfig, trial: int):
    """Train/test samples and the shuffling seed shared by every method of a trial."""
    task = config.task.build()
    train_seed, test_seed, opt_seed = derive_seeds(config.seed, trial, n=3)
    train_set = sample_gaussian(task, config.n_train, train_seed)
    test_set = sample_gaussian(task, config.n_test, test_seed)
    return task, train_set, test_set, opt_seed


def _ber(scores, test_set) -> float:
    return evaluate(predict(scores), test_set.labels, test_set.num_classes).balanced_error


def synthetic_trial(config: ExperimentConfig, trial: int) -> list[dict]:
    task, train_set, test_set, opt_seed = trial_data(config, trial)
    opt = config.optimizer_config(seed=opt_seed)
    rows = []
    try:
        priors = priors_from_counts(train_set.class_counts)
    except ValueError as err:
        priors, prior_error = None, str(err)
    for method in config.methods:
        row = {"row_type": "trial", "method": method["name"], "trial": trial}
        if priors is None:
            rows.append({**row, "status": f"failed: {prior_error}"})
            continue
        spec = build_spec(method["name"], priors, method["tau"])
        try:
            model = train(train_set, spec, opt)
        except TrainingDiverged as err:
            rows.append({**row, "status": f"failed: {err}"})
            continue
        report = evaluate(predict(forward(model, test_set.features)), test_set.labels, 2)
        rows.append({**row, "status": "ok", "balanced_error": report.balanced_error,
                     "misclassification_error": report.misclassification_error})
    bayes = evaluate(bayes_balanced_predict_gaussian(task, test_set.features), test_set.labels, 2)
    rows.append({"row_type": "trial", "method": "bayes_oracle", "trial": trial, "status": "ok",
                 "balanced_error": bayes.balanced_error,
                 "misclassification_error": bayes.misclassification_error})
    return rows


def tau_sweep_trial(config: ExperimentConfig, trial: int) -> list[dict]:
    """ERM model per trial, then post-hoc corrections for every tau in the grid."""
    task, train_set, test_set, opt_seed = trial_data(config, trial)
    base = {"row_type": "trial", "trial": trial}
    bayes_preds = bayes_balanced_predict_gaussian(task, test_set.features)
    rows = [{**base, "method": "bayes_oracle", "status": "ok",
             "balanced_error": evaluate(bayes_preds, test_set.labels, 2).balanced_error}]
    try:
        priors = priors_from_counts(train_set.class_counts)
        model = train(train_set, build_spec("erm", priors), config.optimizer_config(seed=opt_seed))
    except (ValueError, TrainingDiverged) as err:
        return rows + [{**base, "method": m, "status": f"failed: {err}"} for m in ("erm", *POSTHOC_METHODS)]
    logits = forward(model, test_set.features)
    rows.append({**base, "method": "erm", "status": "ok", "balanced_error": _ber(logits, test_set)})
    norms = nu_from_norms(model)
    for tau in config.tau_grid:
        corrected = {
            "posthoc_logit_adjustment": posthoc_adjust(logits, AdjustmentParams(tau, priors)),
            "weight_norm_prior": weight_normalize_scores(logits, NormalizationSpec(nu_from_priors(priors), tau)),
        }
        if np.all(norms > 0):
            corrected["weight_norm_l2"] = weight_normalize_scores(logits, NormalizationSpec(norms, tau))
        for method in POSTHOC_METHODS:
            row = {**base, "method": method, "tau": tau}
            if method in corrected:
                rows.append({**row, "status": "ok", "balanced_error": _ber(corrected[method], test_set)})
            else:
                rows.append({**row, "status": "failed: zero weight norm"})
    return rows


def aggregate(rows: list[dict], keys=("method",)) -> list[dict]:
    """Mean/std of balanced error over successful trials, grouped by ``keys``."""
    groups: dict[tuple, list[dict]] = {}
    for row in rows:
        groups.setdefault(tuple(row.get(k) for k in keys), []).append(row)
    out = []
    for key, members in groups.items():
        ok = [r for r in members if r["status"] == "ok"]
        bers = np.array([r["balanced_error"] for r in ok])
        agg = {"row_type": "aggregate", **dict(zip(keys, key)),
               "status": "ok" if ok else "failed",
               "n_success": len(ok), "n_failed": len(members) - len(ok)}
        if ok:
            agg["balanced_error"] = float(bers.mean())
            agg["balanced_error_std"] = float(bers.std(ddof=1)) if len(ok) > 1 else 0.0
            mis = [r["misclassification_error"] for r in ok if r.get("misclassification_error") is not None]
            if mis:
                agg["misclassification_error"] = float(np.mean(mis))
        out.append(agg)
    return out


SYNTHETIC_COLUMNS = ["row_type", "method", "trial", "status", "balanced_error",
                     "misclassification_error", "balanced_error_std", "n_success", "n_failed"]
TAU_SWEEP_COLUMNS = ["row_type", "method", "tau", "trial", "status", "balanced_error",
                     "balanced_error_std", "n_success", "n_failed"]


def run_synthetic(config: ExperimentConfig, jobs: int = 1) -> list[dict]:
    trial_rows = [r for rows in map_trials(synthetic_trial, config, jobs) for r in rows]
    return trial_rows + aggregate(trial_rows)


def run_tau_sweep(config: ExperimentConfig, jobs: int = 1) -> list[dict]:
    trial_rows = [r for rows in map_trials(tau_sweep_trial, config, jobs) for r in rows]
    return trial_rows + aggregate(trial_rows, keys=("method", "tau"))


def weightnorm_columns(num_classes: int) -> list[str]:
    return (["row_type", "optimizer", "trial", "status"]
            + [f"norm_{y}" for y in range(num_classes)]
            + ["correlation", "balanced_error"])


def weightnorm_trial(config: ExperimentConfig, trial: int) -> list[dict]:
    wn = config.weightnorm
    counts = profile_counts(LongTailProfile(wn.profile, wn.num_classes, wn.max_count, wn.imbalance_ratio))
    means = circle_means(wn.num_classes, wn.radius)
    train_seed, test_seed, opt_seed = derive_seeds(config.seed, trial, n=3)
    train_set = sample_class_conditional(means, wn.sigma, counts, train_seed)
    test_set = sample_class_conditional(means, wn.sigma, np.full(wn.num_classes, wn.n_test_per_class), test_seed)
    spec = build_spec("erm", priors_from_counts(counts))
    optimizers = {
        OptimizerKind.SGD_MOMENTUM: config.optimizer_config(
            kind=OptimizerKind.SGD_MOMENTUM, learning_rate=wn.sgd_learning_rate, epochs=wn.epochs, seed=opt_seed),
        OptimizerKind.ADAM: config.optimizer_config(
            kind=OptimizerKind.ADAM, learning_rate=wn.adam_learning_rate, epochs=wn.epochs, seed=opt_seed),
    }
    rows = []
    for kind, opt in optimizers.items():
        row = {"row_type": "trial", "optimizer": kind.value, "trial": trial}
        try:
            model = train(train_set, spec, opt)
        except TrainingDiverged as err:
            rows.append({**row, "status": f"failed: {err}"})
            continue
        norms = weight_norms(model)
        try:
            corr = pearson_correlation(norms, counts)
        except ValueError:
            corr = float("nan")
        row.update({f"norm_{y}": float(v) for y, v in enumerate(norms)})
        row.update(status="ok", correlation=corr,
                   balanced_error=_ber(forward(model, test_set.features), test_set))
        rows.append(row)
    return rows


def run_weightnorm_study(config: ExperimentConfig, jobs: int = 1) -> list[dict]:
    trial_rows = [r for rows in map_trials(weightnorm_trial, config, jobs) for r in rows]
    if config.trials == 1:
        return trial_rows
    columns = weightnorm_columns(config.weightnorm.num_classes)[4:]
    out = list(trial_rows)
    for kind in OptimizerKind:
        ok = [r for r in trial_rows if r["optimizer"] == kind.value and r["status"] == "ok"]
        agg = {"row_type": "aggregate", "optimizer": kind.value, "status": "ok" if ok else "failed"}
        if ok:
            agg.update({c: float(np.mean([r[c] for r in ok])) for c in columns})
        out.append(agg)
    return out


CURVE_COLUMNS = ["curve", "gamma", "p", "psi", "f", "psi_inv", "bayes_risk"]


def run_binary_curves(config: ExperimentConfig) -> list[dict]:
    cc = config.curves
    n = cc.n_grid
    p_grid = np.arange(1, n + 1) / (n + 1)
    f_grid = np.linspace(-cc.f_range, cc.f_range, n if n % 2 else n + 1)[:n]
    rows = []
    for name, make in binary.NAMED_CURVES.items():
        for gamma in cc.gammas:
            table = binary.curve_table(make(cc.pi, gamma), p_grid, f_grid)
            for i in range(n):
                rows.append({"curve": name, "gamma": float(gamma),
                             **{k: float(v[i]) for k, v in table.items()}})
    return rows


CONSISTENCY_COLUMNS = ["row_type", "spec", "index", "delta_choice", "num_instances", "num_classes",
                       "distribution", "consistent", "n_witnesses", "detail"]


def _delta_choices(priors, rng):
    pi = priors.probs
    return {"prior": pi, "uniform": np.ones_like(pi), "random": rng.uniform(0.1, 10.0, size=pi.size)}


def run_consistency(config: ExperimentConfig) -> list[dict]:
    """Sweep of consistent losses plus witness searches for inconsistent ones."""
    cc = config.consistency
    rows = []
    for i in range(cc.n_distributions):
        rng = make_rng([config.seed, i])
        m = int(rng.integers(1, cc.max_instances + 1))
        L = int(rng.integers(2, cc.max_classes + 1))
        dist = random_distribution(rng, m, L)
        for choice, delta in _delta_choices(dist.priors, rng).items():
            report = consistency_report(dist, spec_from_delta(dist.priors, delta))
            rows.append({"row_type": "check", "spec": "from_delta", "index": i, "delta_choice": choice,
                         "num_instances": m, "num_classes": L, "distribution": report.dist_digest,
                         "consistent": report.consistent, "n_witnesses": len(report.witnesses),
                         "detail": json.dumps(report.witnesses) if report.witnesses else ""})
    for name, factory in (("adaptive", spec_adaptive), ("equalised", spec_equalised)):
        found = find_inconsistency_witness(factory, seed=config.seed, n_search=cc.n_search)
        row = {"row_type": "witness_search", "spec": name, "num_classes": 2}
        if found is None:
            rows.append({**row, "consistent": True, "n_witnesses": 0})
            continue
        dist, report = found
        rows.append({**row, "num_instances": dist.num_instances, "distribution": report.dist_digest,
                     "consistent": False, "n_witnesses": len(report.witnesses),
                     "detail": json.dumps({"distribution": dist.to_dict(), "witnesses": report.witnesses})})
    return rows

"""Command-line entry point: ``longtail <command> [options]``."""

from __future__ import annotations

import functools
import json
import sys
from pathlib import Path

import click
import yaml

from longtail import experiments
from longtail import io as lio
from longtail.adjust import AdjustmentParams, NormalizationSpec, posthoc_adjust, predict, weight_normalize_scores
from longtail.dist import priors_from_counts
from longtail.experiments import ExperimentConfig
from longtail.metrics import evaluate


def _coerce_numbers(value):
    """YAML 1.1 reads ``1e-3`` as a string; turn such strings into floats."""
    if isinstance(value, dict):
        return {k: _coerce_numbers(v) for k, v in value.items()}
    if isinstance(value, list):
        return [_coerce_numbers(v) for v in value]
    if isinstance(value, str):
        try:
            return float(value)
        except ValueError:
            return value
    return value


def load_config(path) -> dict:
    """Read a YAML/JSON config, or the config embedded in a results CSV."""
    path = Path(path)
    if path.suffix == ".csv":
        config, _ = lio.read_results(path)
        if config is None:
            raise click.BadParameter(f"{path} has no embedded config")
        return config
    data = yaml.safe_load(path.read_text()) or {}
    if not isinstance(data, dict):
        raise click.BadParameter(f"{path}: config must be a mapping")
    return _coerce_numbers(data)


def _parse_tau_grid(text: str) -> list[float]:
    try:
        return [float(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise click.BadParameter(f"cannot parse tau grid {text!r}") from None


def common_options(fn):
    @click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False),
                  help="YAML/JSON config file, or a previous results CSV to re-run.")
    @click.option("--seed", type=int, help="Base seed for all trials.")
    @click.option("--trials", type=int, help="Number of independent trials.")
    @click.option("--tau-grid", help="Comma-separated tau values, e.g. 0,0.5,1.")
    @click.option("--out", type=click.Path(dir_okay=False), default="-", show_default=True,
                  help="Output CSV path ('-' for stdout).")
    @click.option("--jobs", type=int, default=1, show_default=True, help="Worker processes for trials.")
    @click.option("--no-timestamp", is_flag=True, help="Omit the timestamp header line.")
    @click.option("--set", "overrides", multiple=True, metavar="KEY=VALUE",
                  help="Override any config key, dotted for nesting (value parsed as YAML).")
    @functools.wraps(fn)
    def wrapper(config_path, seed, trials, tau_grid, out, jobs, no_timestamp, overrides, **kwargs):
        data = load_config(config_path) if config_path else {}
        for item in overrides:
            key, sep, value = item.partition("=")
            if not sep:
                raise click.BadParameter(f"--set expects KEY=VALUE, got {item!r}")
            target = data
            *parents, leaf = key.split(".")
            for p in parents:
                target = target.setdefault(p, {})
            target[leaf] = _coerce_numbers(yaml.safe_load(value))
        if seed is not None:
            data["seed"] = seed
        if trials is not None:
            data["trials"] = trials
        if tau_grid is not None:
            data["tau_grid"] = _parse_tau_grid(tau_grid)
        try:
            config = ExperimentConfig.from_dict(data)
        except (TypeError, ValueError) as err:
            raise click.UsageError(f"invalid config: {err}") from None
        return fn(config=config, out=out, jobs=jobs, timestamp=not no_timestamp, **kwargs)

    return wrapper


@click.group()
@click.version_option(package_name="artifact")
def main():
    """Logit adjustment experiments for long-tailed classification."""


@main.command()
@common_options
@click.option("--methods", help="Comma-separated losses, optionally name:tau (e.g. erm,logit_adjusted:1.5).")
def synthetic(config, out, jobs, timestamp, methods):
    """Train each loss on the binary Gaussian task and compare balanced errors with the Bayes oracle."""
    if methods:
        config.methods = [experiments._normalise_method(m) for m in methods.split(",") if m]
    rows = experiments.run_synthetic(config, jobs)
    lio.write_results(out, "synthetic", config.to_dict(), experiments.SYNTHETIC_COLUMNS, rows, timestamp)


@main.command("tau-sweep")
@common_options
def tau_sweep(config, out, jobs, timestamp):
    """Balanced error of post-hoc logit adjustment and weight normalisation across tau."""
    rows = experiments.run_tau_sweep(config, jobs)
    lio.write_results(out, "tau-sweep", config.to_dict(), experiments.TAU_SWEEP_COLUMNS, rows, timestamp)


@main.command("weightnorm-study")
@common_options
def weightnorm_study(config, out, jobs, timestamp):
    """Per-class weight norms under SGD with momentum and Adam on a long-tailed Gaussian mixture."""
    rows = experiments.run_weightnorm_study(config, jobs)
    columns = experiments.weightnorm_columns(config.weightnorm.num_classes)
    lio.write_results(out, "weightnorm-study", config.to_dict(), columns, rows, timestamp)


@main.command("binary-curves")
@common_options
def binary_curves(config, out, jobs, timestamp):
    """Link, inverse link and normalised conditional Bayes risk of the binary margin losses."""
    rows = experiments.run_binary_curves(config)
    lio.write_results(out, "binary-curves", config.to_dict(), experiments.CURVE_COLUMNS, rows, timestamp)


@main.command()
@common_options
def consistency(config, out, jobs, timestamp):
    """Check Fisher consistency of margin losses on random discrete distributions."""
    rows = experiments.run_consistency(config)
    lio.write_results(out, "consistency", config.to_dict(), experiments.CONSISTENCY_COLUMNS, rows, timestamp)
    if any(r["row_type"] == "check" and not r["consistent"] for r in rows):
        click.echo("warning: a from_delta loss failed the consistency check", err=True)
        sys.exit(1)


@main.command()
@click.argument("logits_csv", type=click.Path(exists=True, dir_okay=False))
@click.argument("counts_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--tau", type=float, default=1.0, show_default=True)
@click.option("--mode", type=click.Choice(["logit-adjustment", "weight-norm"]), default="logit-adjustment",
              show_default=True, help="Additive logit adjustment or division by prior**tau.")
@click.option("--out", type=click.Path(dir_okay=False), default="-", show_default=True)
@click.option("--report", "report_path", type=click.Path(dir_okay=False),
              help="Write the evaluation report (JSON) here; needs a label column.")
def posthoc(logits_csv, counts_file, tau, mode, out, report_path):
    """Correct stored logits with training-set class counts and predict."""
    logits, labels = lio.read_logits_csv(logits_csv)
    try:
        priors = priors_from_counts(lio.read_counts(counts_file))
        if priors.num_classes != logits.shape[1]:
            raise ValueError(f"{priors.num_classes} counts for {logits.shape[1]} logit columns")
        if mode == "logit-adjustment":
            scores = posthoc_adjust(logits, AdjustmentParams(tau, priors))
        else:
            scores = weight_normalize_scores(logits, NormalizationSpec(priors.probs, tau))
    except ValueError as err:
        raise click.UsageError(str(err)) from None
    preds = predict(scores)
    L = logits.shape[1]
    columns = [f"g{i}" for i in range(L)] + ["pred"] + (["label"] if labels is not None else [])
    rows = []
    for i in range(len(preds)):
        row = {f"g{j}": float(scores[i, j]) for j in range(L)}
        row["pred"] = int(preds[i])
        if labels is not None:
            row["label"] = int(labels[i])
        rows.append(row)
    config = {"logits": str(logits_csv), "counts": str(counts_file), "tau": tau, "mode": mode}
    lio.write_results(out, "posthoc", config, columns, rows, timestamp=False)
    if report_path:
        if labels is None:
            raise click.UsageError("--report needs a 'label' column in the logits CSV")
        report = evaluate(preds, labels, L)
        Path(report_path).write_text(json.dumps(report.to_dict(), indent=2) + "\n")


if __name__ == "__main__":
    main()

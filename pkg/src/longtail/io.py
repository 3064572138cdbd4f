"""Plain-text file formats: datasets, counts, logits, checkpoints, result tables.

Result tables are CSV preceded by ``#`` comment lines. One of them is
``# config: {json}`` holding the fully resolved run configuration, so a
results file can be fed back to the CLI to reproduce itself.
"""

from __future__ import annotations

import csv
import datetime
import io
import json
from pathlib import Path

import numpy as np

from longtail.dist import LabeledDataset
from longtail.loss import MarginSpec
from longtail.train import LinearModel

CONFIG_PREFIX = "# config: "


def write_dataset_csv(path, dataset: LabeledDataset):
    D = dataset.features.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(D)] + ["label"])
        for x, y in zip(dataset.features, dataset.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


def read_dataset_csv(path, num_classes: int | None = None) -> LabeledDataset:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    if header[-1] != "label":
        raise ValueError(f"{path}: last column must be 'label'")
    data = np.array(body, dtype=np.float64).reshape(len(body), len(header))
    labels = data[:, -1].astype(np.int64)
    L = num_classes if num_classes is not None else int(labels.max()) + 1
    return LabeledDataset(data[:, :-1], labels, L)


def write_counts(path, counts):
    Path(path).write_text("".join(f"{int(c)}\n" for c in counts))


def read_counts(path) -> np.ndarray:
    lines = [ln.strip() for ln in Path(path).read_text().splitlines()]
    counts = np.array([int(ln) for ln in lines if ln], dtype=np.int64)
    if counts.size == 0:
        raise ValueError(f"{path}: no counts found")
    return counts


def read_logits_csv(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Scores ``f0..f{L-1}`` and the optional trailing ``label`` column."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    header, body = rows[0], rows[1:]
    has_label = header[-1] == "label"
    ncols = len(header) - has_label
    if [h for h in header[:ncols]] != [f"f{i}" for i in range(ncols)]:
        raise ValueError(f"{path}: expected columns f0..f{ncols - 1}")
    data = np.array(body, dtype=np.float64).reshape(len(body), len(header))
    labels = data[:, -1].astype(np.int64) if has_label else None
    return data[:, :ncols], labels


def write_logits_csv(path, logits, labels=None):
    logits = np.atleast_2d(logits)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"f{i}" for i in range(logits.shape[1])] + (["label"] if labels is not None else []))
        for i, row in enumerate(logits):
            w.writerow([repr(float(v)) for v in row] + ([int(labels[i])] if labels is not None else []))


def save_model(path, model: LinearModel):
    """First line ``L D``; then one row per class: ``D`` weights followed by the bias."""
    L, D = model.weights.shape
    lines = [f"{L} {D}"]
    for w, b in zip(model.weights, model.biases):
        lines.append(" ".join(repr(float(v)) for v in [*w, b]))
    Path(path).write_text("\n".join(lines) + "\n")


def load_model(path) -> LinearModel:
    lines = Path(path).read_text().split("\n")
    L, D = (int(t) for t in lines[0].split())
    rows = np.array([[float(t) for t in ln.split()] for ln in lines[1 : L + 1]])
    if rows.shape != (L, D + 1):
        raise ValueError(f"{path}: expected {L} rows of {D + 1} numbers")
    return LinearModel(rows[:, :D], rows[:, D])


def write_loss_curve(path, history):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "mean_loss"])
        for epoch, value in enumerate(history):
            w.writerow([epoch, repr(float(value))])


def spec_to_json(spec: MarginSpec) -> str:
    return json.dumps(spec.to_dict(), sort_keys=True)


def spec_from_json(text: str) -> MarginSpec:
    return MarginSpec.from_dict(json.loads(text))


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return "" if np.isnan(value) else repr(float(value))
    if value is None:
        return ""
    return value


def format_results(command: str, config: dict, columns: list[str], rows: list[dict],
                   timestamp: bool = True) -> str:
    buf = io.StringIO()
    buf.write(f"# longtail {command}\n")
    if timestamp:
        buf.write(f"# generated: {datetime.datetime.now(datetime.timezone.utc).isoformat()}\n")
    buf.write(CONFIG_PREFIX + json.dumps(config, sort_keys=True) + "\n")
    w = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n", extrasaction="raise")
    w.writeheader()
    for row in rows:
        w.writerow({k: _fmt(row.get(k)) for k in columns})
    return buf.getvalue()


def write_results(path, command: str, config: dict, columns: list[str], rows: list[dict],
                  timestamp: bool = True):
    text = format_results(command, config, columns, rows, timestamp)
    if path is None or str(path) == "-":
        print(text, end="")
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text)


def read_results(path) -> tuple[dict | None, list[dict]]:
    """Embedded config (if any) and the data rows of a results file."""
    config = None
    body = []
    for line in Path(path).read_text().splitlines():
        if line.startswith(CONFIG_PREFIX):
            config = json.loads(line[len(CONFIG_PREFIX):])
        elif not line.startswith("#"):
            body.append(line)
    return config, list(csv.DictReader(body))

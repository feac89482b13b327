"""Fit KRR with an adaptively chosen lambda on user data."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .kernel import Dataset, KernelSpec, TrigMercerKernel, format_kernel, gram_matrix, parse_kernel
from .select import SelectionResult
from .spectral import build_cache

__all__ = ["InputError", "FitOptions", "read_csv_dataset", "write_csv_dataset", "fit_dataset", "fit_on_csv"]


class InputError(ValueError):
    """Malformed or insufficient user input."""


@dataclass(frozen=True)
class FitOptions:
    selector: str = "asus"
    delta: float = 0.05
    b: int = 1
    q: float = 0.5
    mode: str = "practical"
    cap: int = 400
    c_scale: Optional[float] = None
    c_lp: Optional[float] = None
    noise: object = "auto"
    split_fraction: float = 0.2
    seed: int = 0
    center: bool = True
    threshold_lambda_factor: bool = True

    def resolved(self) -> "FitOptions":
        """Fill unset threshold scales: calibrated values in practical mode, 1.0 in paper mode."""
        from .bench import CALIBRATED_C_LP, CALIBRATED_C_SCALE

        paper = self.mode == "paper"
        c_scale = self.c_scale if self.c_scale is not None else (1.0 if paper else CALIBRATED_C_SCALE)
        c_lp = self.c_lp if self.c_lp is not None else (1.0 if paper else CALIBRATED_C_LP)
        return FitOptions(**{**asdict(self), "c_scale": c_scale, "c_lp": c_lp})


def read_csv_dataset(path) -> Dataset:
    """Read a CSV with header ``x1,...,xd,y``.

    Raises :class:`InputError` naming the offending line on any defect.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise InputError(f"{path}: cannot read file: {exc}") from None
    reader = csv.reader(text.splitlines())
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise InputError(f"{path}: line 1: empty file") from None
    d = len(header) - 1
    expected = [f"x{i}" for i in range(1, d + 1)] + ["y"]
    # a lone covariate may be called plain "x"
    if d < 1 or (header != expected and header != ["x", "y"]):
        raise InputError(f"{path}: line 1: header must be {','.join(expected) if d >= 1 else 'x1,...,xd,y'}, got {','.join(header)}")
    rows = []
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != d + 1:
            raise InputError(f"{path}: line {lineno}: expected {d + 1} fields, got {len(row)}")
        try:
            values = [float(cell) for cell in row]
        except ValueError:
            raise InputError(f"{path}: line {lineno}: non-numeric field in {row}") from None
        if not all(math.isfinite(v) for v in values):
            raise InputError(f"{path}: line {lineno}: non-finite value")
        rows.append(values)
    if not rows:
        raise InputError(f"{path}: no data rows")
    arr = np.asarray(rows, dtype=float)
    xs = arr[:, 0] if d == 1 else arr[:, :d]
    return Dataset(xs, arr[:, d])


def write_csv_dataset(dataset: Dataset, path) -> None:
    """Write ``dataset`` so that :func:`read_csv_dataset` reproduces it bit for bit."""
    xs = dataset.xs.reshape(dataset.n, -1)
    d = xs.shape[1]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow([f"x{i}" for i in range(1, d + 1)] + ["y"])
        for x, y in zip(xs, dataset.ys):
            writer.writerow([repr(float(v)) for v in x] + [repr(float(y))])


def _json_number(v):
    return None if isinstance(v, float) and not math.isfinite(v) else v


def _options_digest(spec: KernelSpec, opts: FitOptions) -> str:
    doc = {"kernel": format_kernel(spec), **asdict(opts)}
    return hashlib.sha256(json.dumps(doc, sort_keys=True, default=list).encode()).hexdigest()[:16]


def fit_dataset(dataset: Dataset, spec: KernelSpec, options: FitOptions = FitOptions()) -> tuple[SelectionResult, dict]:
    """Run one selector on ``dataset``; returns the selection and a JSON-ready summary."""
    from .bench import make_selector_inputs, run_selector

    opts = options.resolved()
    if opts.selector not in ("asus", "lp", "holdout"):
        raise InputError(f"unknown selector {opts.selector!r}")
    if dataset.n < 2:
        raise InputError("need at least 2 data rows")
    if isinstance(spec, TrigMercerKernel) and dataset.xs.ndim == 2 and dataset.xs.shape[1] != 1:
        raise InputError("trig kernel needs exactly one covariate column")
    if opts.selector == "holdout":
        n_val = math.floor(dataset.n * opts.split_fraction)
        if n_val < 1 or dataset.n - n_val < 1:
            raise InputError(f"hold-out needs n * split_fraction >= 1 validation points (n={dataset.n})")
    if opts.noise == "auto" and dataset.n < 3:
        raise InputError("noise estimation needs at least 3 rows; pass --noise M,gamma")

    intercept = float(np.mean(dataset.ys)) if opts.center else 0.0
    work = Dataset(dataset.xs, dataset.ys - intercept)
    try:
        gram = gram_matrix(spec, work.xs)
    except ValueError as exc:
        raise InputError(str(exc)) from None
    cache = build_cache(gram, work.ys, kernel=spec)
    inputs = make_selector_inputs(cache, work.ys, spec, opts)
    result = run_selector(opts.selector, cache, work, spec, inputs, opts, opts.seed)

    fitted = gram @ result.alpha_hat + intercept
    residual = float(np.sqrt(np.mean((dataset.ys - fitted) ** 2)))
    summary = {
        "rule": result.rule,
        "lambda": result.chosen_lambda,
        "k_hat": result.chosen_index,
        "fallback": result.fallback_used,
        "n": dataset.n,
        "config_digest": _options_digest(spec, opts),
        "seed": opts.seed,
        "kernel": format_kernel(spec),
        "intercept": intercept,
        "coefficients_digest": hashlib.sha256(np.ascontiguousarray(result.alpha_hat).tobytes()).hexdigest(),
        "training_rmse": residual,
        "comparisons": result.comparison_count,
        "grid_size": len(result.grid),
        "noise": {"M": inputs.noise.M, "gamma": inputs.noise.gamma, "source": inputs.noise.source},
        "c_scale": opts.c_scale,
        "c_lp": opts.c_lp,
        "steps": [{k: _json_number(v) for k, v in asdict(s).items()} for s in result.steps],
    }
    return result, summary


def fit_on_csv(path, kernel: str | KernelSpec, options: FitOptions = FitOptions()) -> dict:
    spec = parse_kernel(kernel) if isinstance(kernel, str) else kernel
    dataset = read_csv_dataset(path)
    _, summary = fit_dataset(dataset, spec, options)
    return summary

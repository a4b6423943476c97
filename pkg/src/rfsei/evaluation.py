"""Estimator quality metrics: NMSE, scatter correlation, bias and sample
variance over evaluation grids, SNR sweeps, and input-size comparisons.

Reports are plain dataclasses; CSV emitters reproduce the documented
schemas so figures can be rendered by any external plotting tool:

  bias_curve.csv   truth, bias, sample_variance
  snr_sweep.csv    snr_db, mean_err, std_err
  scatter.csv      truth, estimate
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .dataset import Dataset, DatasetSpec, build_dataset
from .errors import ConfigurationError, UndefinedMetricError
from .network import NetworkModel, model_digest, predict
from .utils import atomic_write_text, derive_seed


def nmse(estimates, truths) -> float:
    """Normalized mean squared error: mean((P - M)^2) / (mean(P) * mean(M)).

    Undefined when the product of the means is zero; offsets spanning
    negative values can also make the denominator negative, which callers
    should treat with care (the metric is reported as-is).
    """
    p = np.asarray(estimates, dtype=np.float64)
    m = np.asarray(truths, dtype=np.float64)
    if p.shape != m.shape or p.size == 0:
        raise ConfigurationError("nmse needs equal-length non-empty vectors")
    denom = p.mean() * m.mean()
    if denom == 0.0:
        raise UndefinedMetricError("nmse undefined: product of means is zero")
    return float(np.mean((p - m) ** 2) / denom)


def pearson_r(truths, estimates) -> float:
    """Scalar summary of the truth-vs-estimate scatter."""
    t = np.asarray(truths, dtype=np.float64)
    e = np.asarray(estimates, dtype=np.float64)
    if t.size < 2:
        raise ConfigurationError("pearson_r needs at least two points")
    return float(np.corrcoef(t, e)[0, 1])


@dataclass
class BiasCurve:
    truths: np.ndarray            # grid offsets
    bias: np.ndarray              # mean(estimate) - truth per offset
    sample_variance: np.ndarray   # Bessel-corrected, per offset
    cma: list                     # cumulative moving average trace per offset
    estimates: np.ndarray         # raw estimates, grid-major order

    @property
    def avg_abs_bias(self) -> float:
        return float(np.mean(np.abs(self.bias)))

    @property
    def avg_sample_variance(self) -> float:
        return float(np.mean(self.sample_variance))


def _estimate(model, dataset: Dataset) -> np.ndarray:
    """Run the estimator over a dataset's frames.

    ``model`` is normally a :class:`NetworkModel`; a callable taking the
    dataset and returning per-frame estimates is accepted as a testing hook
    (e.g. oracle estimators).
    """
    if callable(model) and not isinstance(model, NetworkModel):
        return np.asarray(model(dataset), dtype=np.float64)
    return predict(model, dataset.frames)


def bias_curve_from_estimates(grid_values, frames_per_value: int,
                              estimates) -> BiasCurve:
    """Bias/variance statistics for grid-major estimates (see bias_curve)."""
    if frames_per_value < 2:
        raise ConfigurationError("bias_curve needs >= 2 estimates per value")
    values = np.asarray(grid_values, dtype=np.float64)
    estimates = np.asarray(estimates, dtype=np.float64)
    per_value = estimates.reshape(values.size, frames_per_value)
    bias = per_value.mean(axis=1) - values
    sample_var = per_value.var(axis=1, ddof=1)
    cma = [np.cumsum(row) / np.arange(1, frames_per_value + 1)
           for row in per_value]
    return BiasCurve(truths=values, bias=bias, sample_variance=sample_var,
                     cma=cma, estimates=estimates)


def bias_curve(model, grid_dataset: Dataset) -> BiasCurve:
    """Per-grid-value bias, sample variance, and CMA convergence traces.

    The CMA trace of each offset ends exactly at that offset's mean
    estimate; an estimator is unbiased where the trace converges to the
    true value.
    """
    if grid_dataset.grid is None:
        raise ConfigurationError("bias_curve needs an evaluation-grid dataset")
    return bias_curve_from_estimates(grid_dataset.grid.grid_values,
                                     grid_dataset.grid.frames_per_value,
                                     _estimate(model, grid_dataset))


@dataclass
class SnrSweep:
    snr_db: np.ndarray
    mean_err: np.ndarray
    std_err: np.ndarray


def snr_sweep(model: NetworkModel, spec: DatasetSpec, snr_list,
              frames_per_snr: int = 1000, seed: int = 0) -> SnrSweep:
    """Error mean/stddev per SNR with uniformly random true offsets.

    ``spec`` provides the impairment ranges; its SNR range is overridden to
    a single value per sweep point.
    """
    means, stds = [], []
    for k, snr in enumerate(snr_list):
        point_spec = DatasetSpec(**{**spec.to_dict(),
                                    "n_train": frames_per_snr, "n_val": 0,
                                    "n_test": 0,
                                    "snr_db_range": (float(snr), float(snr)),
                                    "master_seed": derive_seed(seed, k)})
        ds = build_dataset(point_spec)
        err = _estimate(model, ds) - ds.labels
        means.append(err.mean())
        stds.append(err.std(ddof=1))
    return SnrSweep(snr_db=np.asarray(list(snr_list), dtype=np.float64),
                    mean_err=np.asarray(means), std_err=np.asarray(stds))


def input_size_study(models: dict, grids: dict) -> list[dict]:
    """Average bias and sample variance per input size per SNR.

    ``models`` maps input size -> model; ``grids`` maps
    (input_size, snr_db) -> evaluation-grid dataset.
    """
    rows = []
    for (size, snr), ds in sorted(grids.items()):
        if size not in models:
            raise ConfigurationError(f"no model for input size {size}")
        curve = bias_curve(models[size], ds)
        rows.append({"input_size": size, "snr_db": snr,
                     "avg_abs_bias": curve.avg_abs_bias,
                     "avg_sample_variance": curve.avg_sample_variance})
    return rows


@dataclass
class EvalReport:
    nmse: float | None
    pearson_r: float
    curve: BiasCurve
    sweep: SnrSweep | None
    metadata: dict = field(default_factory=dict)

    def summary_dict(self) -> dict:
        out = {"nmse": self.nmse, "pearson_r": self.pearson_r,
               "avg_abs_bias": self.curve.avg_abs_bias,
               "avg_sample_variance": self.curve.avg_sample_variance,
               "metadata": self.metadata}
        if self.sweep is not None:
            out["snr_sweep"] = {"snr_db": self.sweep.snr_db.tolist(),
                                "mean_err": self.sweep.mean_err.tolist(),
                                "std_err": self.sweep.std_err.tolist()}
        return out


def evaluate_on_grid(model: NetworkModel, grid_dataset: Dataset,
                     sweep: SnrSweep | None = None) -> EvalReport:
    """Assemble the full report for one model over one evaluation grid.

    NMSE is reported as None when Eq.-style normalization is undefined
    (offset grids spanning zero make the mean product vanish); the scatter
    correlation and bias curve do not share that failure mode.
    """
    curve = bias_curve(model, grid_dataset)
    truths = np.repeat(curve.truths, grid_dataset.grid.frames_per_value)
    try:
        metric = nmse(curve.estimates, truths)
    except UndefinedMetricError:
        metric = None
    meta = {"model_sha256": model_digest(model),
            "grid": {"target": grid_dataset.grid.target,
                     "frames_per_value": grid_dataset.grid.frames_per_value,
                     "values": list(grid_dataset.grid.grid_values)},
            "nmse_defined": metric is not None}
    return EvalReport(nmse=metric, pearson_r=pearson_r(truths, curve.estimates),
                      curve=curve, sweep=sweep, metadata=meta)


def _write_csv(path, header, rows):
    lines = [",".join(header)]
    lines += [",".join(f"{v:.10g}" for v in row) for row in rows]
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_bias_curve_csv(path, curve: BiasCurve) -> None:
    _write_csv(path, ("truth", "bias", "sample_variance"),
               zip(curve.truths, curve.bias, curve.sample_variance))


def write_snr_sweep_csv(path, sweep: SnrSweep) -> None:
    _write_csv(path, ("snr_db", "mean_err", "std_err"),
               zip(sweep.snr_db, sweep.mean_err, sweep.std_err))


def write_scatter_csv(path, truths, estimates) -> None:
    _write_csv(path, ("truth", "estimate"), zip(truths, estimates))


def write_report_json(path, report: EvalReport) -> None:
    atomic_write_text(path, json.dumps(report.summary_dict(), indent=2))

"""Statistical decision layer over estimator outputs.

Per offset value, estimator outputs are fitted with a Gaussian validated by
a chi-squared goodness-of-fit test.  Emitters are identified by comparing a
point estimate against Bayes-optimal boundaries between neighbouring fitted
densities (equal priors assumed throughout: every offset value is treated
as equally likely).  Mis-identification probabilities are Gaussian tail
masses beyond the operative boundary.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, asdict, replace

import numpy as np

from .errors import (ConfigurationError, DegenerateFitError, NoBoundaryError,
                     NumericError)
from .special import chi2_sf, normal_cdf, normal_ppf, normal_q
from .utils import atomic_write_text


@dataclass(frozen=True)
class GaussianFit:
    """Sample-moment Gaussian fit to estimator outputs at one offset value."""

    mu: float
    sigma2: float
    offset: float | None = None       # true offset the samples came from
    n_samples: int = 0
    gof_p_value: float | None = None

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def logpdf(self, x: float) -> float:
        return (-0.5 * math.log(2.0 * math.pi * self.sigma2)
                - (x - self.mu) ** 2 / (2.0 * self.sigma2))


def _gof_bin_count(n: int) -> int:
    # Equal-probability binning with expected count >= 5 per bin; the
    # 2*n^0.4 growth keeps the k-3 dof approximation calibrated for the
    # sample sizes used here.
    return max(4, min(int(2 * n ** 0.4), n // 5))


def chi2_gof(samples, fit: GaussianFit, n_bins: int | None = None) -> float:
    """Pearson chi-squared goodness-of-fit p-value against ``fit``.

    Bins are equal-probability under the fitted Gaussian, so every bin has
    expected count n / n_bins (>= 5 by construction).  Degrees of freedom
    are n_bins - 1 - 2, accounting for the two fitted moments.
    """
    x = np.asarray(samples, dtype=np.float64)
    if x.size < 30:
        raise ConfigurationError("chi-squared GoF needs at least 30 samples")
    if fit.sigma2 <= 0.0:
        raise DegenerateFitError("fit has non-positive variance")
    if n_bins is None:
        n_bins = _gof_bin_count(x.size)
    if n_bins < 4:
        raise ConfigurationError(f"too few usable bins ({n_bins} < 4)")
    inner = np.array([normal_ppf(k / n_bins) for k in range(1, n_bins)])
    edges = fit.mu + fit.sigma * inner
    observed = np.bincount(np.searchsorted(edges, x), minlength=n_bins)
    expected = x.size / n_bins
    stat = float(np.sum((observed - expected) ** 2) / expected)
    dof = n_bins - 3
    return chi2_sf(stat, dof)


def fit_gaussian(estimates, offset: float | None = None) -> GaussianFit:
    """Moment fit (mean, Bessel-corrected variance) with attached GoF p-value.

    Raises :class:`DegenerateFitError` when the samples carry no spread.
    """
    x = np.asarray(estimates, dtype=np.float64)
    if x.size < 30:
        raise ConfigurationError("fit_gaussian needs at least 30 samples")
    mu = float(x.mean())
    sigma2 = float(x.var(ddof=1))
    if sigma2 <= 0.0:
        raise DegenerateFitError("zero-variance sample: no usable fit")
    fit = GaussianFit(mu=mu, sigma2=sigma2, offset=offset, n_samples=x.size)
    return replace(fit, gof_p_value=chi2_gof(x, fit))


@dataclass(frozen=True)
class Boundary:
    """Density-equality points between two Gaussian fits.

    ``roots`` holds every solution of p(x|i) = p(x|j) (one for equal
    variances, two otherwise).  ``operative`` is the crossing strictly
    between the means, which is the threshold the decision rule uses;
    it is None when the means coincide.
    """

    roots: tuple[float, ...]
    operative: float | None


def bayes_boundary(fit_i: GaussianFit, fit_j: GaussianFit) -> Boundary:
    """Solve p(x|i) = p(x|j) for two Gaussian class densities.

    Equal variances give the exact midpoint of the means.  Unequal
    variances give the two roots of the log-density quadratic; the
    operative boundary is the one between the means.
    """
    mu_i, s2_i = fit_i.mu, fit_i.sigma2
    mu_j, s2_j = fit_j.mu, fit_j.sigma2
    if mu_i == mu_j and s2_i == s2_j:
        raise NoBoundaryError("identical fits admit no decision boundary")
    if s2_i == s2_j:
        mid = (mu_i + mu_j) / 2.0
        return Boundary(roots=(mid,), operative=mid)
    # sigma_j^2 (x - mu_i)^2 - sigma_i^2 (x - mu_j)^2
    #   + sigma_i^2 sigma_j^2 log(sigma_i^2 / sigma_j^2) = 0
    a = s2_j - s2_i
    b = 2.0 * (mu_j * s2_i - mu_i * s2_j)
    c = (s2_j * mu_i ** 2 - s2_i * mu_j ** 2
         + s2_i * s2_j * math.log(s2_i / s2_j))
    disc = b * b - 4.0 * a * c
    if disc < 0.0:
        raise NumericError("boundary quadratic has no real roots")
    sq = math.sqrt(disc)
    roots = tuple(sorted(((-b - sq) / (2.0 * a), (-b + sq) / (2.0 * a))))
    lo, hi = sorted((mu_i, mu_j))
    between = [r for r in roots if lo < r < hi]
    operative = between[0] if len(between) >= 1 else None
    return Boundary(roots=roots, operative=operative)


def misid_probability(fit: GaussianFit, boundary: float,
                      side: str = "above") -> float:
    """Tail mass of ``fit`` beyond ``boundary`` on the given side.

    ``side="above"`` integrates from the boundary to +inf (an emitter whose
    estimates should fall left of the boundary is mis-identified with this
    probability); ``side="below"`` integrates the lower tail.
    """
    if side not in ("above", "below"):
        raise ConfigurationError(f"side must be 'above' or 'below', got {side!r}")
    z = (boundary - fit.mu) / fit.sigma
    return normal_q(z) if side == "above" else normal_cdf(z)


def pairwise_misid(fit_i: GaussianFit, fit_j: GaussianFit) -> float:
    """Equal-prior error probability of the two-class decision between the
    fits, using the operative boundary: the average of the two wrong-side
    tail masses."""
    boundary = bayes_boundary(fit_i, fit_j)
    if boundary.operative is None:
        raise NoBoundaryError("no operative boundary between equal means")
    d = boundary.operative
    if fit_i.mu < fit_j.mu:
        p_i = misid_probability(fit_i, d, "above")
        p_j = misid_probability(fit_j, d, "below")
    else:
        p_i = misid_probability(fit_i, d, "below")
        p_j = misid_probability(fit_j, d, "above")
    return 0.5 * (p_i + p_j)


def min_separation(fits, target_err: float) -> float | None:
    """Smallest grid separation whose average pairwise mis-ID probability is
    below ``target_err``.

    ``fits`` must come from an evenly spaced offset grid (sorted).  The scan
    walks multiples of the grid step; for each candidate separation the
    pairwise error is averaged over every fit pair at that spacing.  Returns
    None when no separation within the grid span reaches the target.
    """
    if not 0.0 < target_err < 0.5:
        raise ConfigurationError("target_err must be in (0, 0.5)")
    fits = list(fits)
    if len(fits) < 2:
        raise ConfigurationError("min_separation needs at least two fits")
    offsets = np.array([f.offset for f in fits], dtype=np.float64)
    if np.any(np.isnan(offsets)):
        raise ConfigurationError("fits must carry their source offsets")
    steps = np.diff(offsets)
    if np.any(steps <= 0) or not np.allclose(steps, steps[0], rtol=1e-9):
        raise ConfigurationError("fits must lie on an increasing even grid")
    step = float(steps[0])
    for k in range(1, len(fits)):
        errs = [pairwise_misid(fits[i], fits[i + k])
                for i in range(len(fits) - k)]
        if float(np.mean(errs)) < target_err:
            return k * step
    return None


@dataclass
class DecisionModel:
    """Ordered Gaussian fits with the operative boundaries between
    neighbours and the analytic confusion matrix of the decision rule.

    ``misid_matrix[i][j]`` is the probability that an estimate drawn from
    fit i lands in bin j's decision region; off-diagonal mass is
    mis-identification.
    """

    fits: list
    boundaries: np.ndarray       # len(fits) - 1 operative thresholds
    misid_matrix: np.ndarray     # row-stochastic
    significance: float = 0.05

    def classify(self, estimate: float) -> int:
        return int(np.searchsorted(self.boundaries, estimate, side="left"))

    def accepted(self) -> list[bool]:
        """Per-fit GoF acceptance at the model's significance level."""
        return [f.gof_p_value is not None and f.gof_p_value >= self.significance
                for f in self.fits]

    def to_json(self) -> str:
        return json.dumps({
            "significance": self.significance,
            "fits": [asdict(f) for f in self.fits],
            "boundaries": self.boundaries.tolist(),
            "misid_matrix": self.misid_matrix.tolist(),
        }, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DecisionModel":
        doc = json.loads(text)
        fits = [GaussianFit(**f) for f in doc["fits"]]
        return cls(fits=fits,
                   boundaries=np.asarray(doc["boundaries"], dtype=np.float64),
                   misid_matrix=np.asarray(doc["misid_matrix"],
                                           dtype=np.float64),
                   significance=doc["significance"])

    def save(self, path: str | os.PathLike) -> None:
        atomic_write_text(path, self.to_json())

    @classmethod
    def load(cls, path: str | os.PathLike) -> "DecisionModel":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())


def build_decision_model(fits, significance: float = 0.05) -> DecisionModel:
    """Assemble a decision model from per-offset fits sorted by mean.

    Boundaries are the operative Bayes thresholds between adjacent fits;
    each must lie between its two means (guaranteed by construction, checked
    anyway).  The confusion matrix integrates every fit over every decision
    region.
    """
    fits = sorted(fits, key=lambda f: f.mu)
    mus = np.array([f.mu for f in fits])
    if len(fits) < 2:
        raise ConfigurationError("decision model needs at least two fits")
    if np.any(np.diff(mus) <= 0):
        raise ConfigurationError("fit means must be strictly increasing")
    boundaries = []
    for lo, hi in zip(fits[:-1], fits[1:]):
        b = bayes_boundary(lo, hi)
        if b.operative is None or not (lo.mu < b.operative < hi.mu):
            raise NoBoundaryError(
                f"no operative boundary between mu={lo.mu} and mu={hi.mu}")
        boundaries.append(b.operative)
    boundaries = np.asarray(boundaries)

    edges = np.concatenate(([-np.inf], boundaries, [np.inf]))
    matrix = np.empty((len(fits), len(fits)))
    for i, f in enumerate(fits):
        upper = (edges[1:] - f.mu) / f.sigma
        lower = (edges[:-1] - f.mu) / f.sigma
        matrix[i] = [normal_cdf(u) - normal_cdf(l)
                     for u, l in zip(upper, lower)]
    return DecisionModel(fits=fits, boundaries=boundaries,
                         misid_matrix=matrix, significance=significance)


def classify(estimate: float, model: DecisionModel) -> int:
    """Index of the decision region containing ``estimate``.

    An estimate exactly on a boundary goes to the lower bin.
    """
    return model.classify(estimate)

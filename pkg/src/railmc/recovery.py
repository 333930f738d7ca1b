"""Transition-matrix recovery from sparse counts.

Four strategies build fully-defined row-stochastic matrices:

* empirical counts + diagonal filling of unobserved rows
* empirical counts + uniform filling
* Gaussian-regression filling (per-row Gaussians with linearly regressed
  mean and standard deviation)
* bivariate Gaussian kernel density estimation over (previous, current)
  delay pairs, normalized row-wise into a transition matrix

The KDE strategy replaces *every* row with the kernel estimate; the other
three pass observed rows through untouched.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .core import CountTensor, RowStatus, StateSpace, TransitionMatrix

__all__ = [
    "KdeModel",
    "RegressionFit",
    "empirical_matrix",
    "diagonal_fill",
    "uniform_fill",
    "gaussian_regression_fill",
    "kde_fit",
    "kde_density",
    "kde_matrix",
    "write_matrix_csv",
    "format_matrix_text",
]

_SINGULAR_DET = 1e-12
_RIDGE = 1e-6
LOG_2PI = np.log(2.0 * np.pi)


def empirical_matrix(counts: CountTensor, space: StateSpace) -> TransitionMatrix:
    """Count-ratio rows; rows with no observations stay undefined."""
    if counts.station_index < 2:
        raise ValueError("transition counts need station index t >= 2")
    k = space.cardinality
    probs = np.zeros((k, k))
    status = [RowStatus.UNDEFINED] * k
    row_tot = counts.row_counts()
    for (i, j), c in counts.n2.items():
        probs[space.index(i), space.index(j)] = c / row_tot[i]
    for i, tot in row_tot.items():
        if tot > 0:
            status[space.index(i)] = RowStatus.OBSERVED
    return TransitionMatrix(counts.station_index, probs, tuple(status))


def _fill(partial: TransitionMatrix, make_row) -> TransitionMatrix:
    probs = partial.probs.copy()
    status = list(partial.row_status)
    for r in partial.undefined_rows():
        probs[r] = make_row(r)
        status[r] = RowStatus.RECOVERED
    return TransitionMatrix(partial.station_index, probs, tuple(status))


def diagonal_fill(partial: TransitionMatrix) -> TransitionMatrix:
    """Unobserved rows become unit mass on the diagonal (delay unchanged)."""
    k = partial.probs.shape[0]

    def unit_row(r: int) -> np.ndarray:
        row = np.zeros(k)
        row[r] = 1.0
        return row

    return _fill(partial, unit_row)


def uniform_fill(partial: TransitionMatrix) -> TransitionMatrix:
    """Unobserved rows become uniform over the whole state space."""
    k = partial.probs.shape[0]
    return _fill(partial, lambda r: np.full(k, 1.0 / k))


@dataclass(frozen=True)
class RegressionFit:
    """Least-squares lines through per-row fitted means and spreads."""

    mean_intercept: float
    mean_slope: float
    std_intercept: float
    std_slope: float
    fitted_mean: dict[int, float]
    fitted_std: dict[int, float]

    def mean_at(self, i: int) -> float:
        return self.mean_intercept + self.mean_slope * i

    def std_at(self, i: int) -> float:
        return self.std_intercept + self.std_slope * i


def _discretized_gaussian(mu: float, sigma: float, states: np.ndarray) -> np.ndarray:
    dens = np.exp(-0.5 * ((states - mu) / sigma) ** 2)
    total = dens.sum()
    if total <= 0.0 or not np.isfinite(total):
        # far-tail underflow: put mass on the nearest state to mu
        row = np.zeros(len(states))
        row[int(np.argmin(np.abs(states - mu)))] = 1.0
        return row
    return dens / total


def gaussian_regression_fill(
    partial: TransitionMatrix,
    counts: CountTensor,
    space: StateSpace,
    std_form: str = "printed",
) -> TransitionMatrix:
    """Fill unobserved rows with Gaussians whose mean/spread follow fitted lines.

    Per observed row i the count-weighted mean is fitted; the spread uses the
    count-weighted sum of squared deviations divided by (count - 1), which is
    a variance-form expression (`std_form="printed"`), or its square root
    (`std_form="sqrt"`). Rows whose fitted spread is <= 0 become unit diagonal
    rows. With fewer than two observed rows regression is impossible and the
    fill falls back to the diagonal strategy.
    """
    if std_form not in ("printed", "sqrt"):
        raise ValueError(f"unknown std_form {std_form!r}")
    row_tot = counts.row_counts()
    observed = sorted(i for i, tot in row_tot.items() if tot > 0)
    if len(observed) < 2:
        warnings.warn("fewer than two observed rows; falling back to diagonal fill")
        return diagonal_fill(partial)

    fitted_mean: dict[int, float] = {}
    fitted_std: dict[int, float] = {}
    for i in observed:
        tot = row_tot[i]
        mu = sum(c * j for (ii, j), c in counts.n2.items() if ii == i) / tot
        fitted_mean[i] = mu
        if tot > 1:
            ss = sum(c * (j - mu) ** 2 for (ii, j), c in counts.n2.items() if ii == i)
            s = ss / (tot - 1)
            fitted_std[i] = np.sqrt(s) if std_form == "sqrt" else s

    mi, ms = np.polynomial.polynomial.polyfit(
        observed, [fitted_mean[i] for i in observed], 1
    )
    std_rows = sorted(fitted_std)
    if len(std_rows) >= 2:
        si, ss_ = np.polynomial.polynomial.polyfit(
            std_rows, [fitted_std[i] for i in std_rows], 1
        )
    elif len(std_rows) == 1:
        si, ss_ = fitted_std[std_rows[0]], 0.0
    else:
        warnings.warn("no rows support a spread estimate; falling back to diagonal fill")
        return diagonal_fill(partial)
    fit = RegressionFit(float(mi), float(ms), float(si), float(ss_), fitted_mean, fitted_std)

    states = space.states()
    k = space.cardinality

    def regressed_row(r: int) -> np.ndarray:
        i = space.state(r)
        sigma = fit.std_at(i)
        if sigma <= 0.0:
            row = np.zeros(k)
            row[r] = 1.0
            return row
        return _discretized_gaussian(fit.mean_at(i), sigma, states)

    return _fill(partial, regressed_row)


@dataclass(frozen=True)
class KdeModel:
    """Fitted bivariate Gaussian kernel density over (d(t-1), d(t)) pairs."""

    station_index: int
    points: np.ndarray          # jittered observations, shape (m, 2)
    mean: np.ndarray
    cov: np.ndarray
    cov_inv: np.ndarray
    log_det: float
    bandwidth: float            # h = m^(-1/6)
    epsilon: float
    seed: object                # anything np.random.default_rng accepts

    @property
    def m(self) -> int:
        return len(self.points)


def kde_fit(
    observations: np.ndarray,
    epsilon: float = 0.1,
    seed: int = 0,
    station_index: int = 0,
) -> KdeModel:
    """Jitter observations, estimate the sample covariance, fix the bandwidth.

    Each observation gets independent uniform noise on [-epsilon, epsilon]^2
    (seeded) so perfectly correlated delay pairs yield an invertible
    covariance. If the covariance stays near-singular a ridge is added. With a
    single observation the covariance is undefined and the identity is used.
    """
    obs = np.asarray(observations, dtype=float)
    if obs.ndim != 2 or obs.shape[1] != 2:
        raise ValueError(f"observations must have shape (m, 2), got {obs.shape}")
    m = len(obs)
    if m == 0:
        raise ValueError("no observations to fit")

    rng = np.random.default_rng(seed)
    pts = obs + rng.uniform(-epsilon, epsilon, size=obs.shape)
    mean = pts.mean(axis=0)
    if m == 1:
        warnings.warn("single observation: substituting identity covariance")
        cov = np.eye(2)
    else:
        centered = pts - mean
        cov = centered.T @ centered / (m - 1)
        ridge = _RIDGE
        while np.linalg.det(cov) <= _SINGULAR_DET:
            cov = cov + ridge * np.eye(2)
            ridge *= 10.0

    det = float(np.linalg.det(cov))
    return KdeModel(
        station_index=station_index,
        points=pts,
        mean=mean,
        cov=cov,
        cov_inv=np.linalg.inv(cov),
        log_det=float(np.log(det)),
        bandwidth=float(m ** (-1.0 / 6.0)),
        epsilon=epsilon,
        seed=seed,
    )


def _log_density_at(model: KdeModel, xs: np.ndarray) -> np.ndarray:
    """log f-hat at each row of xs, shape (n, 2), evaluated in log-space."""
    h2 = model.bandwidth**2
    a = model.cov_inv
    # quadratic form via the expansion x'Ax - 2 x'Ap + p'Ap
    ap = model.points @ a                      # (m, 2)
    cp = np.einsum("ij,ij->i", model.points, ap)  # (m,)
    xa = xs @ a                                # (n, 2)
    q = (
        np.einsum("ij,ij->i", xs, xa)[:, None]
        - 2.0 * (xs @ ap.T)
        + cp[None, :]
    )                                           # (n, m)
    log_terms = -q / (2.0 * h2)
    log_norm = -(np.log(model.m) + 2.0 * np.log(model.bandwidth) + 0.5 * model.log_det + LOG_2PI)
    return logsumexp(log_terms, axis=1) + log_norm


def kde_density(model: KdeModel, x) -> float:
    """Evaluate the fitted density at one point; strictly positive for finite x."""
    xs = np.asarray(x, dtype=float).reshape(1, 2)
    return float(np.exp(_log_density_at(model, xs)[0]))


def kde_matrix(model: KdeModel, space: StateSpace) -> TransitionMatrix:
    """Evaluate the density on the full state grid and normalize each row.

    Row i holds f((i, j)) / sum_k f((i, k)); every row is defined. Rows are
    normalized in log-space so far-tail underflow never produces NaN.
    """
    states = space.states().astype(float)
    k = space.cardinality
    probs = np.empty((k, k))
    for r, i in enumerate(states):
        grid = np.column_stack((np.full(k, i), states))
        logf = _log_density_at(model, grid)
        probs[r] = np.exp(logf - logsumexp(logf))
        probs[r] /= probs[r].sum()
    return TransitionMatrix(
        model.station_index, probs, tuple([RowStatus.RECOVERED] * k)
    )


def write_matrix_csv(matrix: TransitionMatrix, space: StateSpace, path) -> None:
    """Dump a matrix as a CSV grid with state values as header and row labels."""
    import csv

    states = space.states()
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([""] + [str(s) for s in states])
        for r, row in enumerate(matrix.probs):
            w.writerow([str(states[r])] + [f"{p:.6g}" for p in row])


def format_matrix_text(matrix: TransitionMatrix, space: StateSpace) -> str:
    """Render a matrix as an aligned text grid (a poor man's heatmap table)."""
    states = space.states()
    width = 6
    header = " " * 4 + "".join(f"{s:>{width}}" for s in states)
    lines = [header]
    for r, row in enumerate(matrix.probs):
        cells = "".join(f"{p:>{width}.2f}" if p >= 0.005 else " " * (width - 1) + "." for p in row)
        lines.append(f"{states[r]:>4}" + cells)
    return "\n".join(lines)

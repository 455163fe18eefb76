"""Operator decoherence renormalization and bootstrap statistics."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .pauli import PauliString
from .simulator import ShotTable

DEFAULT_B = 1000
DEFAULT_LEVEL = 0.70
REFUSAL_THRESHOLD = 0.05
_FAST_UNIQUE = 256


class MitigationRefused(RuntimeError):
    """Calibration factor too small: the signal is too noisy to mitigate."""

    def __init__(self, factor: float, threshold: float, what: str = ""):
        self.factor = factor
        self.threshold = threshold
        super().__init__(f"too noisy to mitigate{' ' + what if what else ''}: factor {factor:.4g} <= {threshold}")


@dataclass
class Estimate:
    mean: float
    ci_low: float
    ci_high: float
    level: float
    n_used: int
    se: float = 0.0
    mitigation: dict | None = None

    def __post_init__(self):
        if not (self.ci_low <= self.mean <= self.ci_high) and not math.isnan(self.mean):
            raise ValueError("confidence interval must contain the estimate")

    def to_dict(self) -> dict:
        return {
            "mean": self.mean,
            "ci": [self.ci_low, self.ci_high],
            "level": self.level,
            "n_used": self.n_used,
            "se": self.se,
            "mitigation": self.mitigation,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Estimate":
        return cls(float(d["mean"]), float(d["ci"][0]), float(d["ci"][1]), float(d["level"]), int(d["n_used"]), float(d.get("se", 0.0)), d.get("mitigation"))

    @classmethod
    def exact(cls, value: float, n_used: int = 0, level: float = DEFAULT_LEVEL) -> "Estimate":
        return cls(float(value), float(value), float(value), level, n_used, 0.0, None)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _check_b_level(B: int, level: float) -> None:
    if B < 100:
        raise ValueError("B must be at least 100")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")


def _interval(point: float, dist: np.ndarray, level: float) -> tuple[float, float]:
    lo, hi = np.percentile(dist, [50 * (1 - level), 50 * (1 + level)])
    # the percentile interval can miss the point estimate for skewed statistics
    return float(min(lo, point)), float(max(hi, point))


def resampled_means(values: np.ndarray, B: int, rng: np.random.Generator) -> np.ndarray:
    """Means of ``B`` with-replacement resamples of the rows of ``values``.

    Rows are grouped by distinct value and resampled through multinomial
    counts, which has the same law as resampling row indices.
    """
    values = np.asarray(values, dtype=float)
    if values.ndim == 1:
        values = values[:, None]
    n = values.shape[0]
    uniq, counts = np.unique(values, axis=0, return_counts=True)
    if uniq.shape[0] <= _FAST_UNIQUE:
        draws = rng.multinomial(n, counts / n, size=B)
        return draws @ uniq / n
    out = np.empty((B, values.shape[1]))
    for lo in range(0, B, 64):
        hi = min(B, lo + 64)
        idx = rng.integers(0, n, size=(hi - lo, n))
        out[lo:hi] = values[idx].mean(axis=1)
    return out


def bootstrap(
    samples,
    B: int = DEFAULT_B,
    level: float = DEFAULT_LEVEL,
    statistic: Callable[[np.ndarray], float] | None = None,
    seed=None,
) -> Estimate:
    """Percentile bootstrap of a statistic (default: the mean)."""
    _check_b_level(B, level)
    x = np.asarray(samples, dtype=float).reshape(-1)
    if x.shape[0] == 0:
        raise ValueError("cannot bootstrap an empty sample")
    rng = _rng(seed)
    if statistic is None:
        point = float(x.mean())
        dist = resampled_means(x, B, rng)[:, 0]
    else:
        point = float(statistic(x))
        dist = np.empty(B)
        for b in range(B):
            dist[b] = statistic(x[rng.integers(0, x.shape[0], size=x.shape[0])])
    lo, hi = _interval(point, dist, level)
    return Estimate(point, lo, hi, level, int(x.shape[0]), float(dist.std(ddof=1)))


@dataclass
class CalibrationRecord:
    """Decay factor of one Pauli observable measured on a calibration circuit."""

    observable: str
    ideal: float
    measured: float
    factor: float = field(init=False)
    clamped: bool = field(init=False, default=False)

    def __post_init__(self):
        if self.ideal == 0:
            self.factor = float("nan")
            return
        f = self.measured / self.ideal
        if f > 1:
            f, self.clamped = 1.0, True
        self.factor = float(f)

    def to_dict(self) -> dict:
        return {"observable": self.observable, "ideal": self.ideal, "measured": self.measured, "factor": self.factor, "clamped": self.clamped}


def _check_factor(factor: float, threshold: float, what: str = "") -> None:
    if not factor > threshold:
        raise MitigationRefused(factor, threshold, what)


def odr_mitigate(noisy, calib: CalibrationRecord, threshold: float = REFUSAL_THRESHOLD):
    """Divide a noisy expectation (float or Estimate) by the calibration factor."""
    _check_factor(calib.factor, threshold, calib.observable)
    f = calib.factor
    if isinstance(noisy, Estimate):
        lo, hi = sorted((noisy.ci_low / f, noisy.ci_high / f))
        return Estimate(noisy.mean / f, lo, hi, noisy.level, noisy.n_used, noisy.se / f, {"factor": f, "refused": False, "clamped": calib.clamped})
    return noisy / f


def projector_expansion(qubits: Sequence[int]) -> list[tuple[float, PauliString]]:
    """``prod_q (1 - Z_q)/2`` as a sum of Z strings."""
    k = len(qubits)
    out = []
    for r in range(k + 1):
        for sub in itertools.combinations(sorted(qubits), r):
            out.append(((-1) ** r / 2**k, PauliString.from_letters({q: "Z" for q in sub})))
    return out


def combine_terms(coeffs: np.ndarray, means: np.ndarray) -> np.ndarray:
    return means @ coeffs


def odr_estimate(
    sim: np.ndarray,
    coeffs: np.ndarray,
    cal: np.ndarray | None = None,
    ideals: np.ndarray | None = None,
    B: int = DEFAULT_B,
    level: float = DEFAULT_LEVEL,
    seed=None,
    threshold: float = REFUSAL_THRESHOLD,
) -> Estimate:
    """Estimate ``sum_j c_j <P_j>`` from per-shot parities, optionally mitigated term by term.

    ``sim`` is ``(shots, J)`` with one column per Pauli term (identity columns
    are all ones). With ``cal`` and ``ideals`` every non-identity term is
    divided by its own factor ``<P_j>_cal / ideal_j``; simulation and
    calibration shots are resampled independently, so both uncertainties
    propagate into the interval.
    """
    _check_b_level(B, level)
    sim = np.asarray(sim, dtype=float)
    coeffs = np.asarray(coeffs, dtype=float)
    if sim.ndim != 2 or sim.shape[1] != coeffs.shape[0]:
        raise ValueError("one parity column per coefficient is required")
    if sim.shape[0] == 0:
        raise ValueError("no shots to estimate from")
    rng = _rng(seed)
    m_sim = sim.mean(axis=0)
    boot_sim = resampled_means(sim, B, rng)
    if cal is None:
        point = float(m_sim @ coeffs)
        dist = boot_sim @ coeffs
        lo, hi = _interval(point, dist, level)
        return Estimate(point, lo, hi, level, sim.shape[0], float(dist.std(ddof=1)))
    cal = np.asarray(cal, dtype=float)
    ideals = np.asarray(ideals, dtype=float)
    ident = np.all(sim == 1, axis=0) & np.all(cal == 1, axis=0) & (ideals == 1)
    factors = np.ones_like(coeffs)
    clamped = []
    for j in np.nonzero(~ident)[0]:
        rec = CalibrationRecord(str(j), float(ideals[j]), float(cal[:, j].mean()))
        if coeffs[j] != 0:
            _check_factor(rec.factor, threshold, f"term {j}")
        factors[j] = rec.factor if coeffs[j] != 0 else 1.0
        clamped.append(rec.clamped)
    point = float((m_sim / factors) @ coeffs)
    boot_cal = resampled_means(cal, B, rng)
    with np.errstate(divide="ignore", invalid="ignore"):
        bf = np.where(ident, 1.0, boot_cal / np.where(ideals == 0, np.nan, ideals))
        bf = np.minimum(bf, 1.0)
        bf = np.where(coeffs == 0, 1.0, bf)
        # resamples where a factor collapses are dropped from the interval
        dist = (boot_sim / bf) @ coeffs
    ok = np.all(bf > threshold, axis=1) & np.isfinite(dist)
    dist = dist[ok]
    if dist.shape[0] < 2:
        raise MitigationRefused(float(np.min(factors)), threshold, "in bootstrap resamples")
    lo, hi = _interval(point, dist, level)
    info = {
        "factor": float(np.min(factors[~ident])) if np.any(~ident) else 1.0,
        "factors": factors.tolist(),
        "refused": False,
        "clamped": bool(any(clamped)),
        "dropped_resamples": int(B - dist.shape[0]),
    }
    return Estimate(point, lo, hi, level, sim.shape[0], float(dist.std(ddof=1)), info)


def estimate_pauli_expectation(table: ShotTable, obs: PauliString, B: int = DEFAULT_B, level: float = DEFAULT_LEVEL, seed=None) -> Estimate:
    if not obs.is_diagonal:
        raise ValueError("only diagonal (Z-type) observables can be estimated from Z-basis shots")
    return bootstrap(table.parities(obs), B=B, level=level, seed=seed)


def estimate_expansion(table: ShotTable, terms: Sequence[tuple[float, PauliString]], B: int = DEFAULT_B, level: float = DEFAULT_LEVEL, seed=None) -> Estimate:
    cols = np.stack([table.parities(p) for _, p in terms], axis=1)
    return odr_estimate(cols, np.array([c for c, _ in terms]), B=B, level=level, seed=seed)


# estimators


class ParityTransformer(TransformerMixin, BaseEstimator):
    """Map bit rows to ``+-1`` parities of a list of diagonal Pauli labels."""

    def __init__(self, observables: Sequence[str] = ()):
        self.observables = observables

    def fit(self, X, y=None):
        X = check_array(X, dtype=np.uint8)
        self.paulis_ = [PauliString.from_label(o) for o in self.observables]
        for p in self.paulis_:
            if not p.is_diagonal:
                raise ValueError(f"{p.to_label()} is not diagonal")
            if p.max_qubit >= X.shape[1]:
                raise ValueError(f"{p.to_label()} acts outside the register")
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "paulis_")
        X = check_array(X, dtype=np.uint8)
        table = ShotTable(X, np.zeros(len(X)), np.zeros(len(X)), np.full(len(X), -1))
        return np.stack([table.parities(p) for p in self.paulis_], axis=1).astype(float)


class ODRMitigator(TransformerMixin, BaseEstimator):
    """Rescale per-shot parities by calibration decay factors.

    ``fit(X_cal, ideals)`` stores ``factors_ = mean(X_cal) / ideals``
    (clamped to at most 1); ``transform(X)`` divides each column by its
    factor, so column means of the output are the mitigated expectations.
    """

    def __init__(self, threshold: float = REFUSAL_THRESHOLD):
        self.threshold = threshold

    def fit(self, X, y):
        X = check_array(X, dtype=float)
        ideals = np.asarray(y, dtype=float).reshape(-1)
        if ideals.shape[0] != X.shape[1]:
            raise ValueError("one ideal value per calibration column is required")
        recs = [CalibrationRecord(str(j), float(ideals[j]), float(X[:, j].mean())) for j in range(X.shape[1])]
        self.records_ = recs
        self.factors_ = np.array([r.factor for r in recs])
        self.clamped_ = np.array([r.clamped for r in recs])
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "factors_")
        X = check_array(X, dtype=float)
        for j, f in enumerate(self.factors_):
            _check_factor(f, self.threshold, f"column {j}")
        return X / self.factors_

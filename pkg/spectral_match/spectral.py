"""Singular value decomposition, principal direction and deployment diagnostics."""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field
from enum import Enum
from typing import List

import numpy as np
from scipy.linalg import null_space

from .errors import (
    AllZeroSpectrum,
    ConvergenceFailure,
    DegenerateSpectrum,
    DimensionMismatch,
    NonFiniteEntry,
    TieWarning,
)

LOGGER = logging.getLogger(__name__)

JACOBI_TOLERANCE = 1e-12
JACOBI_MAX_SWEEPS = 60
TIE_TOLERANCE = 1e-9
PROCEED_THRESHOLD = 0.5
COMPARE_THRESHOLD = 0.3
BAND_TOLERANCE = 1e-12


@dataclass(frozen=True, eq=False)
class SpectralSummary:
    """Thin SVD ``F = left @ diag(singular_values) @ right.T``.

    Every right vector is sign-normalized: its largest-magnitude entry is
    positive (lowest index wins ties), and the matching left vector follows.
    """

    singular_values: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    sweeps: int = 0

    @property
    def num_features(self) -> int:
        return int(self.right_vectors.shape[0])

    def reconstruct(self) -> np.ndarray:
        return (self.left_vectors * self.singular_values) @ self.right_vectors.T


class Band(str, Enum):
    PROCEED = "Proceed"
    COMPARE_2D = "Compare2D"
    USE_ALTERNATIVE = "UseAlternative"

    @property
    def rho_range(self) -> str:
        return _BAND_TABLE[self][0]

    @property
    def effective_rank_range(self) -> str:
        return _BAND_TABLE[self][1]

    @property
    def approx_ratio_note(self) -> str:
        return _BAND_TABLE[self][2]

    @property
    def recommendation(self) -> str:
        return _BAND_TABLE[self][3]


_BAND_TABLE = {
    Band.PROCEED: (
        ">= 0.5",
        "<~ 2",
        ">= 50% guarantee; typically > 95% in experiments",
        "Proceed with the rank-1 spectral matching",
    ),
    Band.COMPARE_2D: (
        "0.3 - 0.5",
        "2 - 3",
        "40-50% worst case; check empirically",
        "Run the rank-1 matching and the 2-D variant; compare",
    ),
    Band.USE_ALTERNATIVE: (
        "< 0.3",
        "> 3",
        "below 40%; not reliable",
        "Use a pseudo-market or a direct NSW solver",
    ),
}


@dataclass(frozen=True)
class DiagnosticReport:
    rho1: float
    effective_rank: float
    band: Band
    approx_ratio_note: str
    singular_values: List[float] = field(default_factory=list)
    explained_ratios: List[float] = field(default_factory=list)
    cumulative_ratios: List[float] = field(default_factory=list)
    tie_warning: bool = False

    def to_dict(self) -> dict:
        return {
            "rho1": self.rho1,
            "effective_rank": self.effective_rank,
            "band": self.band.value,
            "approx_ratio_note": self.approx_ratio_note,
            "singular_values": list(self.singular_values),
            "explained_ratios": list(self.explained_ratios),
            "cumulative_ratios": list(self.cumulative_ratios),
            "tie_warning": self.tie_warning,
        }

    @classmethod
    def from_dict(cls, payload: dict) -> "DiagnosticReport":
        return cls(
            rho1=float(payload["rho1"]),
            effective_rank=float(payload["effective_rank"]),
            band=Band(payload["band"]),
            approx_ratio_note=payload["approx_ratio_note"],
            singular_values=[float(v) for v in payload.get("singular_values", [])],
            explained_ratios=[float(v) for v in payload.get("explained_ratios", [])],
            cumulative_ratios=[float(v) for v in payload.get("cumulative_ratios", [])],
            tie_warning=bool(payload.get("tie_warning", False)),
        )


def _sign_normalize(right: np.ndarray, left: np.ndarray) -> None:
    for col in range(right.shape[1]):
        pivot = int(np.argmax(np.abs(right[:, col])))
        if right[pivot, col] < 0:
            right[:, col] *= -1.0
            left[:, col] *= -1.0


def svd(
    features,
    *,
    tolerance: float = JACOBI_TOLERANCE,
    max_sweeps: int = JACOBI_MAX_SWEEPS,
) -> SpectralSummary:
    """One-sided (Hestenes) Jacobi SVD with cyclic sweeps over column pairs."""

    work = np.array(features, dtype=float, ndmin=2)
    if work.ndim != 2 or work.shape[0] == 0 or work.shape[1] == 0:
        raise DimensionMismatch(f"feature matrix must be non-empty 2-D, got shape {work.shape}")
    if not np.isfinite(work).all():
        raise NonFiniteEntry("feature matrix contains NaN or infinite entries")

    num_rows, num_cols = work.shape
    right = np.eye(num_cols)
    # Columns below this squared norm are rounding noise and are left alone.
    negligible = (np.finfo(float).eps * max(np.linalg.norm(work), np.finfo(float).tiny)) ** 2

    sweeps = 0
    converged = num_cols == 1
    while not converged:
        if sweeps >= max_sweeps:
            raise ConvergenceFailure(
                f"Jacobi SVD did not converge in {max_sweeps} sweeps; check feature scaling"
            )
        sweeps += 1
        rotated = False
        for p in range(num_cols - 1):
            for q in range(p + 1, num_cols):
                col_p = work[:, p]
                col_q = work[:, q]
                alpha = float(col_p @ col_p)
                beta = float(col_q @ col_q)
                gamma = float(col_p @ col_q)
                if alpha <= negligible or beta <= negligible:
                    continue
                if abs(gamma) <= tolerance * np.sqrt(alpha * beta):
                    continue
                rotated = True
                zeta = (beta - alpha) / (2.0 * gamma)
                tangent = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                cosine = 1.0 / np.sqrt(1.0 + tangent * tangent)
                sine = cosine * tangent
                new_p = cosine * col_p - sine * col_q
                work[:, q] = sine * col_p + cosine * col_q
                work[:, p] = new_p
                v_p = right[:, p].copy()
                right[:, p] = cosine * v_p - sine * right[:, q]
                right[:, q] = sine * v_p + cosine * right[:, q]
        converged = not rotated
    LOGGER.debug("Jacobi SVD of %sx%s converged after %s sweeps", num_rows, num_cols, sweeps)

    norms = np.linalg.norm(work, axis=0)
    order = np.lexsort((np.arange(num_cols), -norms))
    singular_values = norms[order]
    right = right[:, order]
    work = work[:, order]

    left = np.zeros((num_rows, num_cols))
    nonzero = singular_values > negligible ** 0.5
    left[:, nonzero] = work[:, nonzero] / singular_values[nonzero]
    singular_values = np.where(nonzero, singular_values, 0.0)
    rank = int(nonzero.sum())
    missing = min(num_rows, num_cols) - rank
    if missing > 0:
        basis = null_space(left[:, :rank].T) if rank else np.eye(num_rows)
        left[:, rank:rank + missing] = basis[:, :missing]

    _sign_normalize(right, left)
    for values in (singular_values, right, left):
        values.setflags(write=False)
    return SpectralSummary(singular_values, right, left, sweeps)


def leading_tie(summary: SpectralSummary) -> bool:
    values = summary.singular_values
    if values.size < 2 or values[0] == 0:
        return False
    return bool(values[0] - values[1] < TIE_TOLERANCE * values[0])


def principal_direction(summary: SpectralSummary) -> np.ndarray:
    if summary.singular_values[0] <= 0:
        raise DegenerateSpectrum(
            "sigma_1 is zero (all-zero feature matrix); fall back to random priority"
        )
    if leading_tie(summary):
        LOGGER.warning(
            "sigma_1=%.6g and sigma_2=%.6g are nearly tied; v_1 is ill-determined",
            summary.singular_values[0],
            summary.singular_values[1],
        )
        warnings.warn("leading singular values are tied", TieWarning, stacklevel=2)
    return summary.right_vectors[:, 0].copy()


def project(rows, direction) -> np.ndarray:
    rows = np.array(rows, dtype=float, ndmin=2)
    direction = np.asarray(direction, dtype=float)
    if direction.ndim != 1 or rows.shape[1] != direction.shape[0]:
        raise DimensionMismatch(
            f"rows have {rows.shape[1]} columns, direction has length {direction.size}"
        )
    # Row-wise reduction so identical rows give bit-identical scores.
    return (rows * direction).sum(axis=1)


def _checked_squares(singular_values) -> np.ndarray:
    values = np.asarray(singular_values, dtype=float)
    squares = values * values
    if values.ndim != 1 or values.size == 0 or squares.sum() <= 0:
        raise AllZeroSpectrum("all singular values are zero")
    return squares


def explained_variance_ratio(singular_values, k: int) -> float:
    squares = _checked_squares(singular_values)
    if not 1 <= k <= squares.size:
        raise DimensionMismatch(f"k must lie in 1..{squares.size}, got {k}")
    return float(squares[:k].sum() / squares.sum())


def explained_variance_ratios(singular_values) -> tuple[np.ndarray, np.ndarray]:
    """Per-component rho_k and cumulative ratios for k = 1..X."""

    squares = _checked_squares(singular_values)
    total = squares.sum()
    cumulative = np.cumsum(squares) / total
    cumulative[-1] = 1.0
    return squares / total, cumulative


def effective_rank(singular_values) -> float:
    squares = _checked_squares(singular_values)
    values = np.abs(np.asarray(singular_values, dtype=float))
    ratio = float(values.sum() ** 2 / squares.sum())
    return min(max(ratio, 1.0), float(values.size))


def classify(rho1: float) -> Band:
    # Boundaries are inclusive up to rounding in rho1.
    if rho1 >= PROCEED_THRESHOLD - BAND_TOLERANCE:
        return Band.PROCEED
    if rho1 >= COMPARE_THRESHOLD - BAND_TOLERANCE:
        return Band.COMPARE_2D
    return Band.USE_ALTERNATIVE


def diagnose_summary(summary: SpectralSummary) -> DiagnosticReport:
    ratios, cumulative = explained_variance_ratios(summary.singular_values)
    rho1 = float(ratios[0])
    band = classify(rho1)
    return DiagnosticReport(
        rho1=rho1,
        effective_rank=effective_rank(summary.singular_values),
        band=band,
        approx_ratio_note=band.approx_ratio_note,
        singular_values=[float(v) for v in summary.singular_values],
        explained_ratios=[float(v) for v in ratios],
        cumulative_ratios=[float(v) for v in cumulative],
        tie_warning=leading_tie(summary),
    )


def diagnose(features) -> DiagnosticReport:
    return diagnose_summary(svd(features))


def rank1_residual(features, summary: SpectralSummary) -> float:
    """Squared Frobenius error of the best rank-1 approximation."""

    features = np.asarray(features, dtype=float)
    rank1 = summary.singular_values[0] * np.outer(
        summary.left_vectors[:, 0], summary.right_vectors[:, 0]
    )
    return float(np.sum((features - rank1) ** 2))

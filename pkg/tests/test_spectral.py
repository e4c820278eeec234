import numpy as np
import pytest
from hypothesis import given, seed, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spectral_match.errors import (
    AllZeroSpectrum,
    ConvergenceFailure,
    DegenerateSpectrum,
    DimensionMismatch,
    NonFiniteEntry,
    TieWarning,
)
from spectral_match.spectral import (
    Band,
    DiagnosticReport,
    classify,
    diagnose,
    effective_rank,
    explained_variance_ratio,
    explained_variance_ratios,
    principal_direction,
    project,
    rank1_residual,
    svd,
)

# tenths keep hypothesis away from subnormal magnitudes
entries = st.integers(min_value=-1000, max_value=1000).map(lambda value: value / 10.0)


@st.composite
def feature_matrices(draw):
    rows = draw(st.integers(min_value=1, max_value=8))
    cols = draw(st.integers(min_value=1, max_value=5))
    return draw(arrays(np.float64, (rows, cols), elements=entries))


def test_worked_example_spectrum(pedagogical_market):
    summary = svd(pedagogical_market.features)
    assert np.allclose(summary.singular_values, [19.017, 7.003, 0.250], atol=5e-3)
    assert np.allclose(summary.right_vectors[:, 0], [0.4751, 0.4668, 0.7459], atol=5e-4)


def test_singular_values_agree_with_eigenvalues(rng):
    features = rng.normal(size=(6, 4))
    summary = svd(features)
    expected = np.sqrt(np.sort(np.linalg.eigvalsh(features.T @ features))[::-1])
    assert np.allclose(summary.singular_values, expected, rtol=1e-6)


def test_rank_one_input_has_one_nonzero_value(rng):
    features = np.outer(rng.uniform(1, 5, size=7), [0.3, 0.5, 0.2, 0.8])
    values = svd(features).singular_values
    assert values[0] > 1.0
    assert np.all(values[1:] <= 1e-9 * values[0])


def test_single_nonzero_column_gives_positive_basis_vector():
    features = np.array([[0.0, 3.0], [0.0, -4.0]])
    summary = svd(features)
    assert summary.singular_values[0] == pytest.approx(5.0)
    assert np.allclose(principal_direction(summary), [0.0, 1.0])


def test_principal_direction_norm_matches_sigma(rng):
    features = rng.normal(size=(9, 3))
    summary = svd(features)
    direction = principal_direction(summary)
    assert np.linalg.norm(features @ direction) == pytest.approx(summary.singular_values[0])


def test_all_zero_features_have_no_direction():
    summary = svd(np.zeros((3, 2)))
    assert np.all(summary.singular_values == 0)
    with pytest.raises(DegenerateSpectrum):
        principal_direction(summary)
    with pytest.raises(AllZeroSpectrum):
        explained_variance_ratio(summary.singular_values, 1)


def test_tied_leading_values_warn():
    with pytest.warns(TieWarning):
        principal_direction(svd(np.eye(3)))


def test_sweep_limit_raises(rng):
    with pytest.raises(ConvergenceFailure):
        svd(rng.normal(size=(6, 4)), max_sweeps=1)


def test_row_permutation_keeps_spectrum(rng):
    features = rng.normal(size=(8, 4))
    base = svd(features)
    shuffled = svd(features[rng.permutation(8)])
    assert np.allclose(base.singular_values, shuffled.singular_values)
    assert np.allclose(base.right_vectors[:, 0], shuffled.right_vectors[:, 0], atol=1e-9)


def test_project_uses_the_given_direction():
    scores = project([[1.0, 2.0], [3.0, 4.0]], [1.0, -1.0])
    assert scores.tolist() == [-1.0, -1.0]
    with pytest.raises(DimensionMismatch):
        project([[1.0, 2.0]], [1.0, 0.0, 0.0])


def test_explained_variance_examples(pedagogical_market):
    sigma = svd(pedagogical_market.features).singular_values
    assert explained_variance_ratio(sigma, 1) == pytest.approx(0.880, abs=1e-3)
    assert explained_variance_ratio(sigma, 3) == pytest.approx(1.0)
    assert effective_rank(sigma) == pytest.approx(1.680, abs=1e-3)
    assert explained_variance_ratio([38.2, 25.1, 18.4, 12.7, 7.9], 1) == pytest.approx(0.5503, abs=1e-3)


def test_cumulative_ratios_end_at_one():
    ratios, cumulative = explained_variance_ratios([3.0, 2.0, 1.0])
    assert ratios.sum() == pytest.approx(1.0)
    assert cumulative[-1] == 1.0
    assert np.all(np.diff(cumulative) >= 0)


def test_effective_rank_extremes():
    assert effective_rank([2.0, 2.0, 2.0, 2.0]) == pytest.approx(4.0)
    assert effective_rank([5.0, 0.0, 0.0]) == pytest.approx(1.0)


@pytest.mark.parametrize(
    "rho, band",
    [(0.9, Band.PROCEED), (0.5, Band.PROCEED), (0.3, Band.COMPARE_2D), (0.49, Band.COMPARE_2D), (0.1, Band.USE_ALTERNATIVE)],
)
def test_band_thresholds(rho, band):
    assert classify(rho) is band


@pytest.mark.parametrize(
    "energies, band",
    [([3.0, 2.5, 2.5, 2.0], Band.COMPARE_2D), ([5.0, 3.0, 2.0], Band.PROCEED)],
)
def test_band_boundaries_survive_rounding(energies, band):
    # sigma_k = sqrt(energy), so rho1 lands on the threshold up to rounding
    assert diagnose(np.diag(np.sqrt(energies))).band is band


def test_non_finite_features_are_rejected():
    with pytest.raises(NonFiniteEntry):
        svd([[1.0, np.nan], [0.0, 1.0]])
    with pytest.raises(NonFiniteEntry):
        svd([[np.inf, 1.0]])


def test_worked_example_diagnosis(pedagogical_market):
    report = diagnose(pedagogical_market.features)
    assert report.band is Band.PROCEED
    assert report.rho1 == pytest.approx(0.880, abs=1e-3)
    assert not report.tie_warning
    assert DiagnosticReport.from_dict(report.to_dict()) == report


def test_identity_features_need_an_alternative():
    report = diagnose(np.eye(5))
    assert report.rho1 == pytest.approx(0.2)
    assert report.band is Band.USE_ALTERNATIVE
    assert report.tie_warning


@seed(7)
@settings(max_examples=60, deadline=None)
@given(feature_matrices())
def test_decomposition_reconstructs_input(features):
    summary = svd(features)
    scale = max(np.linalg.norm(features), 1.0)
    assert np.allclose(summary.reconstruct(), features, atol=1e-9 * scale)


@seed(7)
@settings(max_examples=60, deadline=None)
@given(feature_matrices())
def test_right_vectors_are_orthonormal_and_sign_normalized(features):
    summary = svd(features)
    right = summary.right_vectors
    assert np.allclose(right.T @ right, np.eye(right.shape[1]), atol=1e-9)
    pivots = np.argmax(np.abs(right), axis=0)
    assert np.all(right[pivots, np.arange(right.shape[1])] > 0)
    assert np.all(np.diff(summary.singular_values) <= 1e-12 * max(summary.singular_values[0], 1.0))


@seed(7)
@settings(max_examples=60, deadline=None)
@given(feature_matrices())
def test_rank_one_residual_is_the_tail_energy(features):
    summary = svd(features)
    tail = float(np.sum(summary.singular_values[1:] ** 2))
    scale = max(float(np.sum(features**2)), 1.0)
    assert rank1_residual(features, summary) == pytest.approx(tail, abs=1e-8 * scale)


def test_rank_one_features_are_fully_explained():
    report = diagnose(np.outer([1.0, 2.0, 3.0, 4.0], [0.6, 0.0, 0.8]))
    assert report.rho1 == pytest.approx(1.0)
    assert report.effective_rank == pytest.approx(1.0)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdmd.errors import DimensionMismatchError, ValidationError
from pdmd.pod import GRAM_RATIO, assemble_global_matrix, fit_pod, lift, project, rank_for_energy
from pdmd.snapshots import ParametricSnapshotSet, TimeAxis


def random_matrix(rng, m, k, complex_=True):
    a = rng.standard_normal((m, k))
    return a + 1j * rng.standard_normal((m, k)) if complex_ else a


def span_error(a, b):
    """Distance between the column spans of two orthonormal blocks."""
    return np.linalg.norm(a - b @ (b.conj().T @ a))


class TestAssemble:
    def test_two_members(self):
        axis = TimeAxis(0.0, 1.0, 2)
        data = ParametricSnapshotSet.from_arrays(axis, [(0.0,), (1.0,)], [[[1, 2]], [[3, 4]]])
        np.testing.assert_array_equal(assemble_global_matrix(data), [[1, 2, 3, 4]])

    def test_single_member_unchanged(self, small_set):
        one = small_set.subset([1])
        np.testing.assert_array_equal(assemble_global_matrix(one), one.members[0].values)

    def test_toy_shape(self, toy_set):
        assert assemble_global_matrix(toy_set).shape == (1000, 1290)

    def test_invalid_set(self):
        axis = TimeAxis(0.0, 1.0, 2)
        data = ParametricSnapshotSet.from_arrays(axis, [(0.0,), (0.0,)], [[[1, 2]], [[3, 4]]])
        with pytest.raises(ValidationError):
            assemble_global_matrix(data)


class TestFitPod:
    def test_rank_one(self):
        u = np.array([3.0, 4.0, 0.0]) / 5
        v = np.array([1.0, 0.0, 0.0, 0.0])
        basis = fit_pod(np.outer(u, v), 1)
        np.testing.assert_allclose(basis.singular_values[0], 1.0, atol=1e-14)
        assert np.all(basis.singular_values[1:] < 1e-14)
        assert span_error(u[:, None], basis.modes) < 1e-12

    def test_diagonal(self):
        basis = fit_pod(np.diag([3.0, 2.0, 1.0]), 2)
        np.testing.assert_allclose(basis.singular_values, [3, 2, 1], atol=1e-14)
        np.testing.assert_allclose(basis.modes, np.eye(3)[:, :2], atol=1e-14)

    def test_phase_convention(self):
        rng = np.random.default_rng(3)
        basis = fit_pod(random_matrix(rng, 12, 5), 3)
        for col in basis.modes.T:
            pivot = col[np.argmax(np.abs(col))]
            assert pivot.imag == 0 and pivot.real > 0

    def test_real_input_gives_real_modes(self):
        rng = np.random.default_rng(4)
        data = random_matrix(rng, 10, 6, complex_=False).astype(complex)
        basis = fit_pod(data, 3)
        assert not np.iscomplexobj(basis.modes)

    def test_gram_path_matches_direct_svd(self):
        rng = np.random.default_rng(5)
        data = random_matrix(rng, 200, 8)
        assert data.shape[0] > GRAM_RATIO * data.shape[1]
        basis = fit_pod(data, 4)
        u, s, _ = np.linalg.svd(data, full_matrices=False)
        np.testing.assert_allclose(basis.singular_values, s, rtol=1e-10)
        assert span_error(u[:, :4], basis.modes) < 1e-8

    def test_toy_rank_two(self, toy_set):
        basis = fit_pod(assemble_global_matrix(toy_set), 2)
        sv = basis.singular_values
        assert sv[2] / sv[0] < 1e-10
        glob = assemble_global_matrix(toy_set)
        rec = lift(basis, project(basis, glob))
        assert np.linalg.norm(rec - glob) / np.linalg.norm(glob) < 1e-8

    @pytest.mark.parametrize("n", [0, 7])
    def test_rank_bounds(self, n):
        with pytest.raises(ValidationError):
            fit_pod(np.ones((3, 6)), n)

    def test_dimension_checks(self):
        basis = fit_pod(np.eye(4), 2)
        with pytest.raises(DimensionMismatchError):
            project(basis, np.ones((3, 2)))
        with pytest.raises(DimensionMismatchError):
            lift(basis, np.ones((3, 2)))


class TestProjection:
    def setup_method(self):
        rng = np.random.default_rng(6)
        self.basis = fit_pod(random_matrix(rng, 15, 9), 4)
        self.rng = rng

    def test_project_modes_is_identity(self):
        np.testing.assert_allclose(project(self.basis, self.basis.modes), np.eye(4), atol=1e-12)

    def test_lift_identity_is_modes(self):
        np.testing.assert_array_equal(lift(self.basis, np.eye(4)), self.basis.modes)

    def test_orthogonal_complement_projects_to_zero(self):
        x = random_matrix(self.rng, 15, 3)
        x = x - self.basis.modes @ project(self.basis, x)
        assert np.abs(project(self.basis, x)).max() < 1e-12

    def test_in_span_round_trip(self):
        x = self.basis.modes @ random_matrix(self.rng, 4, 2)
        rec = lift(self.basis, project(self.basis, x))
        assert np.linalg.norm(rec - x) / np.linalg.norm(x) < 1e-10

    def test_pythagoras(self):
        x = random_matrix(self.rng, 15, 1)[:, 0]
        coeff = project(self.basis, x)
        err = np.linalg.norm(x - lift(self.basis, coeff))
        np.testing.assert_allclose(err ** 2 + np.linalg.norm(coeff) ** 2, np.linalg.norm(x) ** 2, rtol=1e-8)


def test_rank_for_energy():
    sv = np.array([3.0, 2.0, 1.0, 0.0])
    assert rank_for_energy(sv, 9 / 14) == 1
    assert rank_for_energy(sv, 0.9) == 2
    assert rank_for_energy(sv, 1.0) == 3


@st.composite
def pod_problems(draw):
    m = draw(st.integers(2, 40))
    k = draw(st.integers(1, 12))
    n = draw(st.integers(1, min(m, k)))
    seed = draw(st.integers(0, 2 ** 32 - 1))
    real = draw(st.booleans())
    rng = np.random.default_rng(seed)
    data = random_matrix(rng, m, k, complex_=not real)
    # occasional rank deficiency
    if draw(st.booleans()) and k > 1:
        data[:, -1] = data[:, 0] * 2.0
    return data, n


@settings(max_examples=60, deadline=None)
@given(pod_problems())
def test_pod_properties(problem):
    data, n = problem
    basis = fit_pod(data, n)
    modes = basis.modes
    # orthonormality
    assert np.abs(modes.conj().T @ modes - np.eye(n)).max() < 1e-10
    # singular values non-increasing, non-negative
    sv = basis.singular_values
    assert np.all(sv >= 0) and np.all(np.diff(sv) <= 1e-12 * sv[0])
    # energy identity
    residual = np.linalg.norm(data - lift(basis, project(basis, data))) ** 2
    tail = np.sum(sv[n:] ** 2)
    assert abs(residual - tail) <= 1e-8 * max(np.sum(sv ** 2), 1e-300) + 1e-12
    # idempotence of project after lift
    r = np.random.default_rng(0).standard_normal((n, 3))
    np.testing.assert_allclose(project(basis, lift(basis, r)), r, atol=1e-10)
    # real-input closure
    if not np.iscomplexobj(data):
        out = lift(basis, project(basis, data))
        assert np.abs(np.imag(out)).max() < 1e-10 * np.abs(data).max()

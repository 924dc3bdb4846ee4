import numpy as np
import pytest

from pdmd.benchmarks import (
    TOY_FREQUENCIES,
    HeatSpec,
    SyntheticUnstableSpec,
    ToySpec,
    evaluate_toy_truth,
    generate_heat_set,
    generate_synthetic_unstable,
    generate_toy,
    laplacian,
    sample_heat_parameters,
    sin_2pi,
    solve_heat,
    spec_from_dict,
    synthetic_truth,
    toy_profiles,
)
from pdmd.dmd import DIVERGENT, fit_dmd, stabilize
from pdmd.errors import SolverDivergenceError, ValidationError
from pdmd.regression import Triangulation


class TestToy:
    def test_default_set(self, toy_set):
        assert (toy_set.p, toy_set.m, toy_set.n_times) == (10, 1000, 129)
        axis = toy_set.time_axis
        assert axis.time(axis.last_label) == pytest.approx(4 * np.pi, rel=1e-15)
        assert toy_set.members[0].values.dtype == np.complex128

    def test_endpoint_parameters(self):
        spec = ToySpec(m=50, N=9, parameters=(0.0, 1.0))
        g1, g2 = toy_profiles(spec)
        t = np.arange(9) * spec.dt
        data = generate_toy(spec)
        np.testing.assert_allclose(data.members[0].values, np.outer(g2, np.exp(2.8j * t)), atol=1e-15)
        np.testing.assert_allclose(data.members[1].values, np.outer(g1, np.exp(2.3j * t)), atol=1e-15)

    def test_each_member_rank_two(self, toy_set):
        for mem in toy_set.members:
            sv = np.linalg.svd(mem.values, compute_uv=False)
            assert sv[2] / sv[0] < 1e-10

    def test_affine_in_mu(self):
        spec = ToySpec(m=64, N=5, parameters=(0.0, 0.5, 1.0))
        v = [m.values for m in generate_toy(spec).members]
        np.testing.assert_array_equal(v[1], (v[0] + v[2]) / 2)

    def test_truth_at_time_zero(self, toy_spec):
        g1, g2 = toy_profiles(toy_spec)
        np.testing.assert_allclose(evaluate_toy_truth(toy_spec, 0.5, 0), 0.5 * g1 + 0.5 * g2, atol=1e-15)

    def test_truth_periodicity(self, toy_spec):
        g1, _ = toy_profiles(toy_spec)
        assert toy_spec.dt * 256 == pytest.approx(8 * np.pi, rel=1e-15)
        np.testing.assert_allclose(evaluate_toy_truth(toy_spec, 1.0, 256),
                                   g1 * np.exp(1j * 18.4 * np.pi), atol=1e-12)

    def test_truth_matches_generated_columns(self, toy_set, toy_spec):
        np.testing.assert_allclose(evaluate_toy_truth(toy_spec, 0.3, np.arange(129)),
                                   toy_set.members[3].values, atol=1e-15)

    def test_frequencies(self):
        assert TOY_FREQUENCIES == (2.3, 2.8)

    def test_invalid(self):
        with pytest.raises(ValidationError):
            ToySpec(m=1)

    def test_deterministic(self):
        a = generate_toy(ToySpec(m=20, N=5))
        b = generate_toy(ToySpec(m=20, N=5))
        assert all(x.values.tobytes() == y.values.tobytes() for x, y in zip(a.members, b.members))


class TestHeat:
    def test_zero_source_gives_zero(self):
        snaps = solve_heat(HeatSpec(grid=6, n_labels=11, source_scale=0.0), (3.0, 2.0))
        assert not np.any(snaps.values)

    def test_forcing_zero_at_half_integers(self):
        for t in (0.0, 0.5, 1.0, 1.5, 2.0):
            assert sin_2pi(t) == 0.0
        assert sin_2pi(0.25) == 1.0

    def test_discrete_times_hit_half_integers(self):
        from pdmd.benchmarks import _HeatStepper
        stepper = _HeatStepper(HeatSpec(grid=4), (1.0, 1.0))
        for label, t in ((0, 0.0), (25, 0.5), (50, 1.0), (75, 1.5)):
            assert stepper.time(label, 0, 10) == t
            assert not np.any(stepper.forcing(stepper.time(label, 0, 10)))

    def test_laplacian_eigenvalue(self):
        g = 9
        h = 1 / (g + 1)
        x = np.arange(1, g + 1) * h
        mode = np.outer(np.sin(np.pi * x), np.sin(np.pi * x)).ravel()
        lam = 2 * (2 * np.cos(np.pi * h) - 2) / h ** 2
        np.testing.assert_allclose(laplacian(g, h) @ mode, lam * mode, atol=1e-10)

    def test_grid_refinement(self):
        coarse = solve_heat(HeatSpec(grid=31), (1.0, 1.0)).values[:, 50].real
        fine = solve_heat(HeatSpec(grid=63), (1.0, 1.0)).values[:, 50].real
        fine_on_coarse = fine.reshape(63, 63)[1::2, 1::2].ravel()
        assert np.linalg.norm(coarse - fine_on_coarse) / np.linalg.norm(fine_on_coarse) < 2e-2

    def test_step_halving_recovers(self):
        snaps = solve_heat(HeatSpec(grid=8, substeps=1, max_halvings=3), (5.0, 5.0))
        assert np.all(np.isfinite(snaps.values))

    def test_divergence_after_retries(self):
        with pytest.raises(SolverDivergenceError):
            solve_heat(HeatSpec(grid=8, substeps=1, max_halvings=1), (5.0, 5.0))

    def test_set_layout(self):
        data = generate_heat_set(HeatSpec(grid=5), [(1.0, 1.0)])
        assert (data.p, data.m, data.n_times) == (1, 25, 101)
        axis = data.time_axis
        assert axis.label_origin == 0 and axis.time(100) == pytest.approx(2.0)
        assert axis.time(85) == pytest.approx(1.7)
        assert data.is_real

    def test_invalid_spec(self):
        with pytest.raises(ValidationError):
            HeatSpec(grid=3)
        with pytest.raises(ValidationError):
            HeatSpec(parameters=((1.0, 0.0),))

    def test_parameter_sampling(self):
        train, held = sample_heat_parameters(20, 3, seed=0)
        assert (len(train), len(held)) == (20, 3)
        pts = np.array(train)
        assert np.all((pts >= 0.01) & (pts <= 10))
        # one point per stratum along each axis
        for axis in range(2):
            strata = np.floor((pts[:, axis] - 0.01) / (9.99 / 20)).astype(int)
            assert len(set(np.clip(strata, 0, 19))) == 20
        tri = Triangulation(pts)
        assert all(tri.locate(q)[0] >= 0 for q in held)
        assert not set(train) & set(held)
        assert sample_heat_parameters(20, 3, seed=0) == (train, held)
        assert sample_heat_parameters(20, 3, seed=1) != (train, held)

    def test_deterministic_solves(self):
        a = solve_heat(HeatSpec(grid=6), (2.0, 3.0))
        b = solve_heat(HeatSpec(grid=6), (2.0, 3.0))
        assert a.values.tobytes() == b.values.tobytes()


class TestSynthetic:
    def test_layout_and_oracle(self):
        spec = SyntheticUnstableSpec(parameters=(0.0, 0.5))
        data = generate_synthetic_unstable(spec)
        assert (data.p, data.m, data.n_times) == (2, 16, 100)
        full = synthetic_truth(spec, 0.5, np.arange(100), include_unstable=True)
        np.testing.assert_array_equal(data.members[1].values, full)

    def test_stable_when_fraction_zero(self):
        spec = SyntheticUnstableSpec(fraction=0.0)
        model = fit_dmd(generate_synthetic_unstable(spec).members[0].values, label_origin=0)
        assert np.abs(np.abs(model.eigenvalues) - 1).max() < 1e-8

    def test_stable_when_rho_one(self):
        spec = SyntheticUnstableSpec(rho=1.0)
        model = fit_dmd(generate_synthetic_unstable(spec).members[0].values, label_origin=0)
        assert np.abs(np.abs(model.eigenvalues) - 1).max() < 1e-8

    def test_one_divergent_mode_removed(self):
        spec = SyntheticUnstableSpec()
        model = fit_dmd(generate_synthetic_unstable(spec).members[0].values, label_origin=0)
        fixed = stabilize(model, 1e-3)
        assert [d for _, d in fixed.stabilization_record].count(DIVERGENT) == 1
        assert fixed.rank == model.rank - 1

    def test_stabilized_forecast_beats_raw(self):
        spec = SyntheticUnstableSpec()
        data = generate_synthetic_unstable(spec).members[0].values
        raw = fit_dmd(data, label_origin=0)
        fixed = stabilize(raw, 1e-3)
        truth = synthetic_truth(spec, 0.0, 300)
        err = lambda m: np.linalg.norm(m.reconstruct([300])[:, 0] - truth) / np.linalg.norm(truth)
        assert err(raw) > 10 * err(fixed)

    @pytest.mark.parametrize("kwargs", [{"rho": 0.9}, {"fraction": 1.0}, {"fraction": -0.1}, {"s": 3}])
    def test_invalid(self, kwargs):
        with pytest.raises(ValidationError):
            SyntheticUnstableSpec(**kwargs)

    def test_seeded_basis(self):
        a = SyntheticUnstableSpec(seed=3).basis()
        assert a.tobytes() == SyntheticUnstableSpec(seed=3).basis().tobytes()
        assert a.tobytes() != SyntheticUnstableSpec(seed=4).basis().tobytes()
        np.testing.assert_allclose(a.conj().T @ a, np.eye(a.shape[1]), atol=1e-12)


def test_spec_from_dict():
    spec = spec_from_dict("toy", {"m": 10, "N": 4, "parameters": [0.1, 0.2], "unused": 1})
    assert spec == ToySpec(m=10, N=4, parameters=(0.1, 0.2))
    heat = spec_from_dict("heat", {"grid": 5, "parameters": [[1, 2]]})
    assert heat.parameters == ((1.0, 2.0),)

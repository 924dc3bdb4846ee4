import numpy as np
import pytest

from pdmd.benchmarks import SyntheticUnstableSpec, ToySpec, evaluate_toy_truth, generate_synthetic_unstable, generate_toy
from pdmd.dmd import DmdConfig
from pdmd.errors import DimensionMismatchError, ValidationError
from pdmd.modelfile import is_model_dir, load_model, save_model
from pdmd.parametric import (
    MONOLITHIC,
    PARTITIONED,
    ForecastRequest,
    compute_error_report,
    fit_model,
    forecast_full,
    predict_reduced,
    predict_reduced_many,
    relative_errors,
    thread_count,
)
from pdmd.sensitivity import (
    median_smooth,
    nested_parameter_schedule,
    run_parameter_sensitivity,
    run_time_sensitivity,
)
from pdmd.snapshots import ParametricSnapshotSet, TimeAxis


@pytest.fixture(scope="module")
def toy_small():
    spec = ToySpec(m=200, N=129, parameters=tuple(i / 9 for i in range(10)))
    return spec, generate_toy(spec)


@pytest.fixture(scope="module")
def toy_holdout(toy_small):
    spec, _ = toy_small
    hold = ToySpec(m=spec.m, N=257, parameters=(0.25, 0.55), t_end=8 * np.pi)
    return generate_toy(hold)


@pytest.fixture(scope="module")
def toy_models(toy_small):
    _, data = toy_small
    return {v: fit_model(data, 2, variant=v) for v in (MONOLITHIC, PARTITIONED)}


def test_single_parameter_variants_agree(small_set):
    one = small_set.subset([0])
    a = fit_model(one, 3, variant=MONOLITHIC)
    b = fit_model(one, 3, variant=PARTITIONED)
    labels = list(range(1, 10))
    np.testing.assert_allclose(predict_reduced_many(a, labels), predict_reduced_many(b, labels), atol=1e-10)


def test_identical_members_identical_spectra(small_set):
    base = small_set.members[0].values
    data = ParametricSnapshotSet.from_arrays(small_set.time_axis, [(0.1,), (0.2,)], [base, base])
    model = fit_model(data, 3, variant=PARTITIONED)
    a, b = model.operators
    np.testing.assert_array_equal(a.eigenvalues, b.eigenvalues)
    np.testing.assert_array_equal(a.amplitudes, b.amplitudes)


def test_pod_basis_shared_across_variants(toy_models):
    a, b = toy_models[MONOLITHIC].pod, toy_models[PARTITIONED].pod
    assert a.modes.tobytes() == b.modes.tobytes()
    assert a.singular_values.tobytes() == b.singular_values.tobytes()


def test_stabilized_synthetic_on_unit_circle():
    spec = SyntheticUnstableSpec(parameters=((0.0,), (0.5,), (1.0,)))
    data = generate_synthetic_unstable(spec)
    config = DmdConfig(hodmd_depth=2, stabilization=1e-3)
    for variant in (MONOLITHIC, PARTITIONED):
        model = fit_model(data, 8, config, variant)
        for op in model.operators:
            assert np.all(np.abs(op.eigenvalues) == 1.0)


def test_predict_at_label_origin_reproduces_projection(small_set):
    model = fit_model(small_set, 3, DmdConfig(amplitude_strategy="first-snapshot"), PARTITIONED)
    block = predict_reduced(model, small_set.time_axis.label_origin)
    expected = np.column_stack([model.pod.modes.conj().T @ mem.values[:, 0] for mem in small_set.members])
    np.testing.assert_allclose(block, expected, atol=1e-12)


@pytest.mark.parametrize("variant", [MONOLITHIC, PARTITIONED])
def test_toy_reduced_forecast_beyond_window(toy_small, toy_models, variant):
    spec, data = toy_small
    model = toy_models[variant]
    block = predict_reduced(model, 192)
    truth = np.column_stack([evaluate_toy_truth(spec, mu[0], 192) for mu in data.parameters])
    np.testing.assert_allclose(block, model.pod.modes.conj().T @ truth, atol=1e-9)


def test_forecast_at_training_parameter(toy_small, toy_models):
    spec, _ = toy_small
    model = toy_models[PARTITIONED]
    mu = float(model.parameters[4, 0])
    for kind in ("linear", "nearest", "cubic-1d", "rbf"):
        out = forecast_full(model, ForecastRequest((mu,), (150,), kind))
        np.testing.assert_allclose(out[:, 0], evaluate_toy_truth(spec, mu, 150), atol=1e-9)


def test_permutation_invariance(toy_small):
    _, data = toy_small
    order = [3, 7, 0, 9, 1, 5, 2, 8, 6, 4]
    a = fit_model(data, 2, variant=PARTITIONED)
    b = fit_model(data.subset(order), 2, variant=PARTITIONED)
    req = ForecastRequest((0.37,), (140, 200))
    np.testing.assert_allclose(forecast_full(a, req), forecast_full(b, req), atol=1e-10)


def test_forecast_request_validation():
    with pytest.raises(ValidationError):
        ForecastRequest((0.1,), ())
    with pytest.raises(ValidationError):
        ForecastRequest((0.1,), (1.5,))


def test_query_dimension_mismatch(toy_models):
    with pytest.raises(DimensionMismatchError):
        forecast_full(toy_models[PARTITIONED], ForecastRequest((0.1, 0.2), (3,)))


def test_toy_error_report(toy_models, toy_holdout):
    for model in toy_models.values():
        report = compute_error_report(model, toy_holdout, list(range(130, 257)))
        assert np.nanmax(report.e_I) < 1e-6
        assert report.metadata["regressor"] == "linear"
        assert not report.excluded.any()


def test_error_metric_brute_force():
    rng = np.random.default_rng(3)
    pred = rng.standard_normal((3, 7, 4)) + 1j * rng.standard_normal((3, 7, 4))
    truth = rng.standard_normal((3, 7, 4)) + 1j * rng.standard_normal((3, 7, 4))
    e_i, per, excluded = relative_errors(pred, truth)
    for l in range(4):
        vals = [np.sqrt(sum(abs(pred[q, j, l] - truth[q, j, l]) ** 2 for j in range(7)))
                / np.sqrt(sum(abs(truth[q, j, l]) ** 2 for j in range(7))) for q in range(3)]
        assert abs(e_i[l] - sum(vals) / 3) < 1e-14
    assert not excluded.any()


def test_error_metric_exact_values():
    truth = np.arange(1.0, 13.0).reshape(2, 3, 2)
    assert np.all(relative_errors(truth, truth)[0] == 0.0)
    assert np.all(relative_errors(2 * truth, truth)[0] == 1.0)


def test_zero_norm_terms_excluded():
    truth = np.ones((2, 3, 2))
    truth[0, :, 1] = 0
    pred = truth * 1.5
    e_i, per, excluded = relative_errors(pred, truth)
    assert np.isnan(per[0, 1])
    assert list(excluded) == [0, 1]
    assert e_i[1] == 0.5
    e_i, _, excluded = relative_errors(np.zeros((1, 2, 1)), np.zeros((1, 2, 1)))
    assert np.isnan(e_i[0]) and excluded[0] == 1


def test_error_report_checks_coverage(toy_models, toy_small):
    _, data = toy_small
    with pytest.raises(DimensionMismatchError):
        compute_error_report(toy_models[PARTITIONED], data, [500])


def test_model_round_trip(tmp_path, toy_models):
    for variant, model in toy_models.items():
        path = tmp_path / variant
        save_model(model, path)
        assert is_model_dir(path)
        back = load_model(path)
        assert back.variant == variant and back.time_axis == model.time_axis
        req = ForecastRequest((0.42,), (10, 200))
        assert forecast_full(back, req).tobytes() == forecast_full(model, req).tobytes()


def test_thread_count(monkeypatch):
    monkeypatch.delenv("PDMD_THREADS", raising=False)
    assert thread_count() == 1
    monkeypatch.setenv("PDMD_THREADS", "0")
    assert thread_count() >= 1
    monkeypatch.setenv("PDMD_THREADS", "-1")
    with pytest.raises(ValidationError):
        thread_count()


def test_threaded_results_identical(monkeypatch, toy_small, toy_models):
    _, data = toy_small
    monkeypatch.setenv("PDMD_THREADS", "3")
    threaded = fit_model(data, 2, variant=PARTITIONED)
    req = ForecastRequest((0.3,), (130, 131))
    assert forecast_full(threaded, req).tobytes() == forecast_full(toy_models[PARTITIONED], req).tobytes()


# -- sensitivity -------------------------------------------------------------------


def test_median_smooth():
    np.testing.assert_array_equal(median_smooth([1, 9, 2, 3, 8]), [5, 2, 3, 3, 5.5])
    np.testing.assert_array_equal(median_smooth([4.0, 4.0, 4.0]), [4.0, 4.0, 4.0])


def test_schedule_nested_and_deterministic():
    a = nested_parameter_schedule(10, 4, 3, seed=1)
    assert [len(s) for s in a] == [4, 7, 10]
    assert all(set(x) <= set(y) for x, y in zip(a, a[1:]))
    assert a == nested_parameter_schedule(10, 4, 3, seed=1)
    with pytest.raises(ValidationError):
        nested_parameter_schedule(10, 0, 3, seed=1)


def test_schedule_encloses_queries():
    rng = np.random.default_rng(0)
    pool = rng.uniform(0, 1, (20, 2))
    sched = nested_parameter_schedule(20, 5, 5, seed=2, enclose=[(0.5, 0.5)], pool_parameters=pool)
    from pdmd.regression import Triangulation
    assert Triangulation(pool[sched[0]]).locate((0.5, 0.5))[0] >= 0


def test_parameter_sensitivity_toy(toy_small, toy_holdout):
    _, data = toy_small
    sched = nested_parameter_schedule(10, 4, 3, seed=0, enclose=[(0.25,), (0.55,)],
                                      pool_parameters=data.parameters)
    table = run_parameter_sensitivity(data, toy_holdout, sched, 2, 200, kinds=("linear", "nearest"), seed=0)
    assert list(table.sizes("linear")) == [4, 7, 10]
    assert np.all(table.column("linear") < 1e-6)
    assert np.all(table.column("nearest") > 1e-3)
    text = table.to_csv()
    assert text.startswith("# mode=parameter probe_label=200 seed=0\n")
    assert "k,set_size,regressor,e_I" in text


def test_parameter_sensitivity_rejects_overlap(toy_small):
    _, data = toy_small
    with pytest.raises(ValidationError):
        run_parameter_sensitivity(data, data.subset([2]), [[0, 1, 2]], 2, 50)
    with pytest.raises(ValidationError):
        run_parameter_sensitivity(data, data.subset([9]), [[0, 1], [1, 2]], 2, 50)


def test_time_sensitivity_toy(toy_small, toy_holdout):
    _, data = toy_small
    table = run_time_sensitivity(data, toy_holdout, [20, 60, 129], 2, 200)
    assert np.all(table.column("linear") < 1e-6)
    assert list(table.sizes("linear")) == [20, 60, 129]


def test_time_sensitivity_constant_rows(small_set):
    base = small_set.members[0].values[:, :1] * np.ones((1, 6))
    data = ParametricSnapshotSet.from_arrays(small_set.time_axis, [(0.1,), (0.3,)], [base, base])
    truth = ParametricSnapshotSet.from_arrays(small_set.time_axis, [(0.2,)], [base])
    table = run_time_sensitivity(data, truth, [3, 4, 6], 1, 4)
    np.testing.assert_allclose(table.column("linear"), 0.0, atol=1e-12)


def test_time_sensitivity_validation(toy_small, toy_holdout):
    _, data = toy_small
    config = DmdConfig(hodmd_depth=3)
    with pytest.raises(ValidationError):
        run_time_sensitivity(data, toy_holdout, [3, 10], 2, 200, config=config)
    with pytest.raises(ValidationError):
        run_time_sensitivity(data, toy_holdout, [20, 20], 2, 200)
    with pytest.raises(ValidationError):
        run_time_sensitivity(data, toy_holdout, [20, 500], 2, 200)
    with pytest.raises(ValidationError):
        run_time_sensitivity(data, data.subset([0]), [20, 30], 2, 50)


def test_extrapolating_regressor_recorded_as_nan(toy_small):
    _, data = toy_small
    outside = generate_toy(ToySpec(m=data.m, N=129, parameters=(1.5,)))
    table = run_time_sensitivity(data, outside, [40], 2, 100, kinds=("linear",))
    assert np.isnan(table.column("linear")[0])
    assert table.notes

import numpy as np
import pytest
from scipy import integrate, stats

from nsvrglm.design import (DesignMatrix, StimulusCourse, block_schedule, build_design,
                            canonical_hrf, convolve_design, read_stimulus_file,
                            standardize_columns)
from nsvrglm.harness.files import write_stimulus_file


def test_hrf_starts_at_zero():
    assert canonical_hrf(0.0) == 0.0
    assert canonical_hrf(-3.0) == 0.0


def test_hrf_peak_and_tail():
    t = np.linspace(0, 30, 30001)
    h = canonical_hrf(t)
    assert 4.0 <= t[np.argmax(h)] <= 6.0
    assert h.max() == pytest.approx(1.0, abs=1e-6)
    assert canonical_hrf(30.0) / h.max() < 0.01


def test_hrf_is_double_gamma_shape():
    # gamma densities with modes at 5 s and 12 s, undershoot one sixth of the response
    t = np.linspace(0.01, 32, 4000)
    ref = stats.gamma.pdf(t, 6) - stats.gamma.pdf(t, 13) / 6
    ref /= ref.max()
    np.testing.assert_allclose(canonical_hrf(t), ref, atol=2e-3)


def test_zero_stimulus_gives_zero_regressor():
    x = convolve_design(StimulusCourse([], 1.0, 100))
    np.testing.assert_array_equal(x, 0.0)


def test_constant_stimulus_reaches_hrf_integral():
    x = convolve_design(StimulusCourse([(0.0, 200.0)], 1.0, 100))
    area, _ = integrate.quad(canonical_hrf, 0, 32, limit=200)
    assert x[-1] == pytest.approx(area, rel=1e-3)
    assert x[-1] == pytest.approx(x[-10], rel=1e-6)


def test_block_response_rises_and_decays():
    x = convolve_design(StimulusCourse([(10.0, 20.0)], 1.0, 80))
    assert np.all(x[:10] == 0)
    assert np.all(np.diff(x[10:18]) > 0)
    assert x[29] > 0.9 * x.max()
    assert np.all(np.diff(x[30:41]) < 0)
    assert x[41] < 0  # undershoot


def test_event_response_peak_lag():
    x = convolve_design(StimulusCourse([(10.0, 1.0)], 1.0, 60))
    assert 4 <= np.argmax(x) - 10 <= 8


def test_standardize_identity_on_standard_columns(rng):
    z = rng.standard_normal((50, 2))
    z = (z - z.mean(0)) / z.std(0, ddof=1)
    out = standardize_columns(DesignMatrix(z))
    np.testing.assert_allclose(out.tasks, z, atol=1e-12)


def test_standardize_small_column():
    out = standardize_columns(DesignMatrix(np.array([[1.0], [2.0], [3.0]])))
    np.testing.assert_allclose(out.tasks[:, 0], [-1.0, 0.0, 1.0], atol=1e-15)


def test_standardize_arbitrary_columns(rng):
    x = rng.exponential(5.0, (200, 3)) + 40.0
    out = standardize_columns(DesignMatrix(x, task_names=["a", "b", "c"]))
    assert np.abs(out.tasks.mean(0)).max() < 1e-12
    assert np.abs(out.tasks.std(0, ddof=1) - 1).max() < 1e-12
    assert out.task_names == ["a", "b", "c"]


def test_standardize_rejects_constant_column():
    with pytest.raises(ValueError):
        standardize_columns(DesignMatrix(np.ones((10, 1))))


def test_design_matrix_bookkeeping():
    d = DesignMatrix(np.zeros((5, 2)) + [[1, 2]])
    assert (d.n_tasks, d.n_scans, d.n_nuisance) == (2, 5, 0)
    assert d.task_names == ["task1", "task2"]
    w = d.with_intercept()
    assert w.n_nuisance == 1
    assert w.full().shape == (5, 3)
    with pytest.raises(ValueError):
        DesignMatrix(np.array([[np.nan]]))


def test_block_schedule_tasks_do_not_overlap():
    courses = block_schedule(3, 300, on=20, rest=10)
    ind = np.array([c.indicator() for c in courses])
    assert ind.sum(axis=0).max() == 1
    for c in courses:
        assert all(dur == 20 for _, dur in c.intervals)
    # every block is preceded by rest
    assert ind[:, :10].sum() == 0


def test_stimulus_file_round_trip(tmp_path):
    courses = block_schedule(2, 120, tr=2.0, on=12, rest=6)
    path = tmp_path / "stim.txt"
    write_stimulus_file(path, courses)
    back, keys = read_stimulus_file(path, 2.0, 120)
    assert keys == ["1", "2"]
    for a, b in zip(courses, back):
        assert a.intervals == b.intervals
    np.testing.assert_allclose(build_design(back).tasks, build_design(courses).tasks)


def test_stimulus_file_rejects_bad_rows(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("0 10\n")
    with pytest.raises(ValueError):
        read_stimulus_file(p, 1.0, 50)


def test_stimulus_course_validation():
    with pytest.raises(ValueError):
        StimulusCourse([(0, -1)], 1.0, 10)
    with pytest.raises(ValueError):
        StimulusCourse([], 0.0, 10)

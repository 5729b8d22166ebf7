import dataclasses
import os

import numpy as np
import pytest

from saacontrol import persist, study
from saacontrol.errors import InvalidArgument
from saacontrol.study import (
    StudyConfig,
    build_reference,
    consistency_trend_ok,
    regenerate_report,
    run_replication,
    run_study,
    score,
    solve_nominal,
    summarize,
)

SMALL = dict(n=16, M=10, N_ref=64, N_grid=(2, 4, 8), replications=3, beta=0.002)


@pytest.fixture(scope="module")
def cfg():
    return StudyConfig(kind="affine-linear", **SMALL)


@pytest.fixture(scope="module")
def reference(cfg):
    return build_reference(cfg)


@pytest.fixture(scope="module")
def study_dir(cfg, reference, tmp_path_factory):
    out = tmp_path_factory.mktemp("study")
    report = run_study(cfg, reference=reference, persist_dir=str(out))
    return out, report


class TestConfig:
    @pytest.mark.parametrize("kw", [
        {"N_grid": (4, 2, 8)}, {"N_grid": (2, 2)}, {"N_grid": ()}, {"replications": 0},
        {"N_ref": 8}, {"kind": "parabolic"}, {"beta": -1.0},
    ])
    def test_invalid(self, kw):
        with pytest.raises(InvalidArgument):
            StudyConfig(**{**SMALL, **kw})

    def test_published_defaults(self):
        c = StudyConfig()
        assert (c.n, c.M, c.N_ref, c.replications) == (64, 100, 8192, 40)
        assert c.solver.gap_tol == 1e-10 and c.solver.max_iters == 100
        assert c.problem_data().beta == 0.0075

    def test_to_dict_round_trip(self):
        d = StudyConfig(kind="bilinear", **SMALL).to_dict()
        assert d["kind"] == "bilinear" and d["N_grid"] == [2, 4, 8]


class TestReference:
    def test_converged_and_deterministic(self, cfg, reference):
        assert reference.trace.status == "GapMet"
        again = build_reference(cfg)
        np.testing.assert_array_equal(again.u, reference.u)
        assert again.value == reference.value

    def test_self_score(self, cfg, reference):
        obj_gap, l1, rg = score(reference, reference.u)
        assert obj_gap == 0.0 and l1 == 0.0
        assert rg <= cfg.reference_solver.gap_tol

    def test_bang_bang_off(self, reference):
        d = reference.problem.data
        u = reference.u
        near = np.min(np.abs(u[:, None] - np.array([d.lower, 0.0, d.upper])[None]), axis=1) <= 1e-6
        assert near.mean() >= 0.8


class TestReplication:
    def test_bitwise_repeatable(self, cfg, reference):
        a = run_replication(cfg, 4, 1, reference)
        b = run_replication(cfg, 4, 1, reference)
        assert a.raw_row() == b.raw_row()
        np.testing.assert_array_equal(a.u, b.u)

    def test_distinct_reps(self, cfg, reference):
        a = run_replication(cfg, 4, 0, reference)
        b = run_replication(cfg, 4, 1, reference)
        assert a.saa_value != b.saa_value

    def test_nonnegative_metrics(self, study_dir):
        _, report = study_dir
        for r in report.results:
            assert r.ok
            assert r.obj_gap >= -1e-9 and r.ref_gap >= -1e-9 and r.l1_dist >= 0

    def test_failure_recorded(self, cfg, reference, monkeypatch):
        def boom(*a, **k):
            raise FloatingPointError("synthetic")

        monkeypatch.setattr(study, "solve", boom)
        r = run_replication(cfg, 2, 0, reference)
        assert r.status == "failed:FloatingPointError"
        assert np.isnan(r.obj_gap)


class TestSummary:
    def test_invalid_when_many_failures(self):
        R = study.ReplicationResult
        results = [R(2, i, 1.0, 1.0, 1.0, 1.0, "ok") for i in range(4)]
        results.append(R(2, 4, np.nan, np.nan, np.nan, np.nan, "failed:X"))
        assert summarize(results, 0.0)[3]  # 1 of 5 is exactly 20%
        results.append(R(2, 5, np.nan, np.nan, np.nan, np.nan, "failed:X"))
        assert not summarize(results, 0.0)[3]

    def test_means_and_rates(self):
        R = study.ReplicationResult
        results = [R(N, i, 1.0 / N + 0.01 * i, 1.0, 2.0 / N, 5.0, "ok") for N in (2, 8, 32) for i in range(3)]
        summary, rates, _, valid = summarize(results, 5.0)
        assert valid
        assert summary[0]["obj_gap"][0] == pytest.approx(0.5 + 0.01)
        assert rates["ref_gap"].slope == pytest.approx(-1.0)
        assert rates["l1_dist"].slope == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("seq,ok", [
        ([(2, 1.0, 0.1), (8, 0.5, 0.1), (32, 0.2, 0.1)], True),
        ([(2, 1.0, 0.1), (8, 1.05, 0.1), (32, 0.2, 0.1)], True),
        ([(2, 1.0, 0.1), (8, 1.5, 0.1), (32, 0.2, 0.1)], False),
        ([(2, 1.0, 0.1), (8, 1.05, 0.1), (32, 1.06, 0.1)], False),
    ])
    def test_consistency_trend(self, seq, ok):
        assert consistency_trend_ok(seq) is ok


class TestPersistence:
    def test_files(self, study_dir):
        out, _ = study_dir
        for name in ("raw.csv", "summary.csv", "rates.csv", "saa_values.csv", "consistency.csv",
                     "manifest.json", "reference.json", "reference_trace.csv", "reference_control.csv",
                     "reference_control.svg", "rate_obj_gap.svg"):
            assert (out / name).exists(), name
        assert (out / "raw.csv").read_text().splitlines()[0] == "N,rep,obj_gap,l1_dist,ref_gap,status"
        assert (out / "summary.csv").read_text().splitlines()[0] == \
            "N,mean_obj_gap,se_obj_gap,mean_l1,se_l1,mean_gap,se_gap"
        assert (out / "rates.csv").read_text().splitlines()[0] == "metric,slope,intercept,r2"

    def test_regenerate_is_identical(self, study_dir):
        out, report = study_dir
        before = {n: (out / n).read_bytes() for n in ("summary.csv", "rates.csv", "consistency.csv",
                                                      "rate_obj_gap.svg")}
        again = regenerate_report(str(out))
        for n, data in before.items():
            assert (out / n).read_bytes() == data, n
        assert again.valid == report.valid

    def test_control_round_trip(self, reference, tmp_path):
        path = tmp_path / "u.csv"
        persist.write_control(str(path), reference.problem.mesh, reference.u)
        np.testing.assert_array_equal(persist.read_control(str(path)), reference.u)

    def test_threads_do_not_change_results(self, cfg, reference, study_dir):
        _, report = study_dir
        par = run_study(dataclasses.replace(cfg, threads=3), reference=reference)
        assert [r.raw_row() for r in par.results] == [r.raw_row() for r in report.results]


def test_nominal_solve(tmp_path):
    cfg = StudyConfig(kind="bilinear", **SMALL)
    problem, trace = solve_nominal(cfg, str(tmp_path))
    assert problem.N == 1
    assert trace.status == "GapMet"
    assert os.path.exists(tmp_path / "nominal_control.svg")
    assert (tmp_path / "nominal_trace.csv").read_text().startswith("iteration,objective,gap")

import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cwbottleneck import exact, sampler
from cwbottleneck.cli import main
from cwbottleneck.exact import Budget, BudgetExceeded, WellSpec
from cwbottleneck.harness import (
    ExperimentConfig,
    WellMismatch,
    law_on_wells,
    run_experiment,
    tv_distance,
)
from cwbottleneck.predictions import LimitLaw, ScheduleSpec
from cwbottleneck.svgplot import line_plot
from cwbottleneck.verify import check_detailed_balance, check_oracle, verify_suite


def test_tv_examples():
    assert tv_distance([0.5, 0.5], 0.0, [0.5, 0.5]) == 0.0
    assert tv_distance([0, 0, 1.0], 0.0, [0.5, 0.5, 0]) == 1.0
    assert tv_distance([0.25] * 4, 0.0, [0.5, 0.5, 0, 0]) == pytest.approx(0.5)
    assert tv_distance([0.4, 0.4], 0.2, [0.5, 0.5]) == pytest.approx(0.2)
    with pytest.raises(WellMismatch):
        tv_distance([0.5, 0.5], 0.0, [1.0])


masses = st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4).filter(lambda v: sum(v) > 0)


@settings(max_examples=200, deadline=None)
@given(masses, masses, masses)
def test_tv_symmetry_and_triangle(a, b, c):
    a, b, c = (np.array(v) / sum(v) for v in (a, b, c))
    ab = tv_distance(a, 0.0, b)
    assert ab == pytest.approx(tv_distance(b, 0.0, a), abs=1e-15)
    assert ab <= tv_distance(a, 0.0, c) + tv_distance(c, 0.0, b) + 1e-12
    assert 0.0 <= ab <= 1.0 + 1e-12


def test_law_on_wells():
    law = LimitLaw([[0.9, 0.9], [-0.9, -0.9]], [0.5, 0.5])
    w = WellSpec([[0.9, 0.9], [0.9, -0.9], [-0.9, 0.9], [-0.9, -0.9]], 0.1)
    np.testing.assert_allclose(law_on_wells(law, w), [0.5, 0, 0, 0.5])
    with pytest.raises(WellMismatch):
        law_on_wells(law, WellSpec([[0.9, 0.9]], 0.1))


def test_config_validation():
    sched = ScheduleSpec("two_block", 4.0)
    with pytest.raises(ValueError):
        ExperimentConfig(sched, [400, 200])
    with pytest.raises(ValueError):
        ExperimentConfig(sched, [200], method="guess")
    cfg = ExperimentConfig(sched, [100, 200], seeds=[1])
    assert ExperimentConfig.from_dict(cfg.to_dict()).to_dict() == cfg.to_dict()


def test_aligned_tv_strictly_decreasing():
    cfg = ExperimentConfig(ScheduleSpec("two_block", 4.0, rho=0.5), [200, 400, 800, 1600], "exact")
    res = run_experiment(cfg)
    tvs = [r.tv for r in res.rows]
    assert all(x > y for x, y in zip(tvs, tvs[1:]))


def test_decoupled_masses():
    cfg = ExperimentConfig(ScheduleSpec("two_block", 4.0, rho=1.5), [200, 400, 800, 1600], "exact")
    res = run_experiment(cfg)
    assert np.all(np.abs(res.rows[-1].masses - 0.25) <= 0.05)


def test_outputs_byte_identical(tmp_path, monkeypatch):
    sched = ScheduleSpec("diluted", 4.0, rho=0.3, pi=0.4)
    outs = []
    for threads, name in (("1", "a"), ("2", "b")):
        monkeypatch.setenv("CWB_THREADS", threads)
        d = tmp_path / name
        run_experiment(ExperimentConfig(sched, [40, 60], "exact", output_dir=str(d), seeds=[0, 1, 2]))
        outs.append(d)
    names = sorted(os.listdir(outs[0]))
    assert {"convergence.csv", "report.json", "config.json", "tv_vs_N.svg",
            "masses_vs_N.svg", "timings.csv"} <= set(names)
    for f in names:
        if f != "timings.csv":
            assert (outs[0] / f).read_bytes() == (outs[1] / f).read_bytes(), f


def test_csv_mass_conservation(tmp_path):
    sched = ScheduleSpec("three_block", 1.5, A=1.0, rho=0.75, B=1.4, gamma=0.5)
    run_experiment(ExperimentConfig(sched, [100, 200], "exact", output_dir=str(tmp_path)))
    lines = (tmp_path / "convergence.csv").read_text().splitlines()
    header = lines[0].split(",")
    assert header[:4] == ["N", "seed", "M", "method"] and header[-2:] == ["residual", "tv"]
    for line in lines[1:]:
        vals = line.split(",")
        assert abs(sum(float(v) for v in vals[4:-1]) - 1.0) <= 1e-9


def test_uncovered_regime_reports_empty_tv(tmp_path):
    sched = ScheduleSpec("two_block", 4.0, A=3.0, rho=1.0)
    res = run_experiment(ExperimentConfig(sched, [100], "exact", output_dir=str(tmp_path)))
    assert res.law is None and res.rows[0].tv is None
    assert (tmp_path / "convergence.csv").read_text().splitlines()[1].endswith(",")
    report = json.loads((tmp_path / "report.json").read_text())
    assert report["classification"]["case"] == "uncovered"


def test_budget_exceeded_in_exact_mode():
    cfg = ExperimentConfig(ScheduleSpec("two_block", 4.0), [400], "exact",
                           budget=Budget(two_block_max_N=100))
    with pytest.raises(BudgetExceeded):
        run_experiment(cfg)


def test_mcmc_mode_close_to_exact():
    sched = ScheduleSpec("two_block", 4.0, rho=0.5)
    ex = run_experiment(ExperimentConfig(sched, [40], "exact"))
    with pytest.warns(RuntimeWarning):
        mc = run_experiment(ExperimentConfig(sched, [40], "mcmc", sweeps=20_000, seeds=[0, 1]))
    assert np.max(np.abs(mc.mean_masses(40) - ex.mean_masses(40))) < 0.05


def test_auto_uses_exact_within_budget():
    res = run_experiment(ExperimentConfig(ScheduleSpec("two_block", 4.0), [100], "auto"))
    assert res.rows[0].method == "exact"


def test_svg_is_deterministic():
    a = line_plot({"x": ([1, 2, 4], [0.3, 0.2, float("nan")])}, "t", logx=True)
    assert a == line_plot({"x": ([1, 2, 4], [0.3, 0.2, float("nan")])}, "t", logx=True)
    assert a.startswith("<svg") and a.rstrip().endswith("</svg>")


# --- CLI -----------------------------------------------------------------------

def test_cli_predict(capsys):
    assert main(["predict", "--model", "two_block", "--beta", "4", "--rho", "0.5"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["case"] == "theorem1.1" and out["limit_constants"]["N_alpha"] == "inf"


def test_cli_exact_and_mcmc(tmp_path, capsys):
    assert main(["exact", "--N", "8", "--alpha", "0.5", "--out", str(tmp_path / "t.csv")]) == 0
    assert (tmp_path / "t.csv").read_text().startswith("k1,k2,m1,m2")
    assert main(["exact", "--model", "three_block", "--N", "10", "--b", "2", "--beta", "1.5",
                 "--alpha", "0.3", "--format", "json", "--wells-eps", "0.2"]) == 0
    out = json.loads(capsys.readouterr().out)
    assert len(out["wells"]["masses"]) == 8
    assert main(["mcmc", "--N", "8", "--sweeps", "50", "--seed", "3",
                 "--out", str(tmp_path / "c.csv")]) == 0
    assert len((tmp_path / "c.csv").read_text().splitlines()) == 51


def test_cli_config_wins(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"schedule": {"model": "two_block", "beta": 4.0, "rho": 1.5},
                               "N_list": [40, 80], "method": "exact"}))
    out = tmp_path / "run"
    assert main(["sweep", "--rho", "0.5", "--N", "20", "--config", str(cfg), "--out", str(out)]) == 0
    eff = json.loads((out / "effective_config.json").read_text())
    assert eff["rho"] == 1.5 and eff["N"] == [40, 80]
    report = json.loads((out / "report.json").read_text())
    assert report["classification"]["case"] == "theorem1.2"
    assert [r["N"] for r in report["rows"]] == [40, 80]


def test_cli_verify_exit_codes(monkeypatch):
    assert main(["verify", "--level", "fast", "--criteria", "3", "12"]) == 0
    orig = exact.cross_term
    monkeypatch.setattr(exact, "cross_term", lambda n, a, b, L: -orig(n, a, b, L))
    assert main(["verify", "--level", "fast", "--criteria", "1"]) == 1


# --- suite and mutation checks ---------------------------------------------------

def test_fast_suite_passes():
    results = verify_suite("fast")
    assert len(results) == 12
    assert all(r.passed for r in results), [r.line() for r in results if not r.passed]


def test_corrupted_cross_term_is_detected(monkeypatch):
    assert check_oracle(max_N=8).passed
    assert check_detailed_balance(pairs=200).passed
    orig_cross = exact.cross_term
    orig_w = sampler._pair_weights
    monkeypatch.setattr(exact, "cross_term", lambda n, a, b, L: -orig_cross(n, a, b, L))
    monkeypatch.setattr(sampler, "_pair_weights", lambda alpha, mask: -orig_w(alpha, mask))
    assert not check_oracle(max_N=8).passed
    assert not check_detailed_balance(pairs=200).passed

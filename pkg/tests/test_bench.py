import csv
import io

import numpy as np
import pytest

from gridinject import bench
from gridinject import elementwise as ew
from gridinject.cli import main
from gridinject.errors import DomainError, VerificationError


def run_cli(capsys, *args):
    code = main(list(args))
    out, err = capsys.readouterr()
    return code, out, err


def flip_one_partial(monkeypatch, name="dQk_dvk"):
    original = ew.eval_jacobian_elements
    k = ew.PARTIAL_NAMES.index(name)

    def broken(soa, ws, vm, va):
        original(soa, ws, vm, va)
        ws.partials[k] *= -1.0

    monkeypatch.setattr(ew, "eval_jacobian_elements", broken)


def test_cli_csv_case14(capsys):
    code, out, err = run_cli(capsys, "--case", "case14", "--verify", "--out", "csv", "--reps", "3")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert tuple(rows[0]) == bench.CSV_HEADER
    assert len(rows) == 2 and len(rows[1]) == 11
    assert rows[1][:3] == ["case14", "14", "20"]
    assert all(int(v) > 0 for v in rows[1][3:])
    assert "agree" in err and "minimum" in err


def test_cli_fault_injection_fails(capsys, monkeypatch):
    flip_one_partial(monkeypatch)
    code, out, err = run_cli(capsys, "--case", "case14", "--verify", "--reps", "1")
    assert code != 0
    assert out == ""
    assert "verification failed" in err


def test_cli_bad_path(capsys, tmp_path):
    code, _, err = run_cli(capsys, "--case", str(tmp_path / "nope.m"))
    assert code == 2 and "error" in err


def test_cli_ybus_only_markdown(capsys):
    code, out, _ = run_cli(capsys, "--case", "case14", "--methods", "ybus", "--out", "md",
                           "--reps", "2")
    assert code == 0
    row = next(line for line in out.splitlines() if line.startswith("| case14"))
    cells = [c.strip() for c in row.strip("|").split("|")]
    assert cells[5:] == ["-"] * 4
    assert all(c != "-" for c in cells[1:5])


def test_cli_ratio_ref(capsys):
    code, out, _ = run_cli(capsys, "--case", "case14", "--case", "case118", "--reps", "2",
                           "--ratio-ref", "case118")
    assert code == 0
    ratio_rows = list(csv.DictReader(io.StringIO(out.split("\n\n")[1])))
    ref = next(r for r in ratio_rows if r["case"] == "case118")
    assert all(float(ref[k]) == 1.0 for k in bench.CSV_HEADER[3:])


def test_run_bench_fixture():
    t = bench.run_bench(bench.BenchConfig("case14", reps=3, verify=True))
    assert t.verified
    assert len(t.ybus) == len(t.elementwise) == 4
    assert all(v > 0 for v in (*t.ybus.values(), *t.elementwise.values()))


def test_run_bench_replicated():
    t = bench.run_bench(bench.BenchConfig("case14", replicate_k=5, reps=1, warmup=0))
    assert (t.n_b, t.n_l) == (70, 100)
    assert t.case == "case14x5"


def test_run_bench_ybus_only_csv():
    t = bench.run_bench(bench.BenchConfig("case14", reps=1, methods=("ybus",)))
    assert t.elementwise is None
    row = list(csv.reader(io.StringIO(bench.emit_report([t]))))[1]
    assert row[7:] == ["", "", "", ""]


@pytest.mark.parametrize("variant", [
    {"storage_mode": "separate"},
    {"reduction_variant": "copy_add"},
    {"reduction_variant": "new_matrix"},
    {"derivative_variant": "matmul"},
    {"assembly_variant": "concat"},
])
def test_variants_verify(variant):
    cfg = bench.BenchConfig("case118", reps=1, warmup=0, verify=True, perturb=0.05, **variant)
    assert bench.run_bench(cfg).verified


def test_verify_raises_with_mismatch(monkeypatch):
    flip_one_partial(monkeypatch, "dPh_dth")
    with pytest.raises(VerificationError) as err:
        bench.run_bench(bench.BenchConfig("case14", reps=1, verify=True))
    assert err.value.mismatch > 1e-9


@pytest.mark.parametrize("kwargs", [
    {"reps": 0}, {"warmup": -1}, {"replicate_k": 0}, {"methods": ()},
    {"methods": ("gpu",)}, {"storage_mode": "aos"}, {"output": "html"},
])
def test_config_rejects(kwargs):
    with pytest.raises(DomainError):
        bench.BenchConfig("case14", **kwargs)


def test_perturbed_state_deterministic(case14):
    a = bench.perturbed_state(case14, 0.01)
    b = bench.perturbed_state(case14, 0.01)
    np.testing.assert_array_equal(a[0], b[0])
    assert np.abs(a[1] - case14.va0).max() <= 0.01
    np.testing.assert_array_equal(bench.perturbed_state(case14, 0.0)[1], case14.va0)


def fake(case, n_b, scale):
    steps = dict.fromkeys(bench.YBUS_STEPS, 100 * scale * n_b)
    steps_ew = dict.fromkeys(bench.EW_STEPS, 50 * scale * n_b)
    return bench.StepTimings(case, n_b, n_b, ybus=steps, elementwise=steps_ew)


def test_time_cost_ratio():
    rows = bench.time_cost_ratio([fake("a", 10, 1), fake("b", 40, 2)], "a")
    assert all(rows[0][k] == 1.0 for k in bench.CSV_HEADER[3:])
    assert all(rows[1][k] == 2.0 for k in bench.CSV_HEADER[3:])


def test_time_cost_ratio_missing_reference():
    with pytest.raises(DomainError):
        bench.time_cost_ratio([fake("a", 10, 1)], "case118")


def test_csv_parse_back():
    timings = [fake("a", 10, 1), fake("b", 40, 2)]
    text = bench.emit_report(timings)
    rows = list(csv.DictReader(io.StringIO(text)))
    assert [r["case"] for r in rows] == ["a", "b"]
    for t, r in zip(timings, rows):
        assert [int(r[k]) for k in bench.CSV_HEADER[1:]] == t.row()[1:]


def test_emit_report_empty():
    with pytest.raises(DomainError):
        bench.emit_report([])


def test_minimum_over_prefix_is_monotone():
    t = bench.run_bench(bench.BenchConfig("case14", reps=8, warmup=1))
    for samples in t.samples.values():
        assert len(samples) == 8 and min(samples) > 0
        assert min(samples[:8]) <= min(samples[:4])


def test_simd_note_only_for_large_cases():
    small = fake("a", 14, 1)
    assert bench.simd_note(small) is None
    big = fake("big", 3000, 1)
    assert "holds" in bench.simd_note(big)

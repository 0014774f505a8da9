"""Per-step timing harness for the two methods.

One-time setup (Ybus, plans, branch constants, workspaces) happens before
timing. Each repetition runs the steps of a method in order and times each
step separately with ``time.perf_counter_ns``; the reported figure per step
is the minimum over the timed repetitions.
"""

from __future__ import annotations

import csv
import gc
import io
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import elementwise as ew
from . import ybus as yb
from .errors import DomainError, VerificationError
from .netcase import IndexedNetwork, load_case, replicate_case

YBUS, ELEMENTWISE = "ybus", "elementwise"
YBUS_STEPS = ("phasor_calc", "power_calc", "j_calc", "j_red")
EW_STEPS = ("power_calc", "power_red", "j_calc", "j_red")
CSV_HEADER = ("case", "n_b", "n_l", "ybus_phasor", "ybus_power", "ybus_jcalc", "ybus_jred",
              "ew_power", "ew_pred", "ew_jcalc", "ew_jred")
VERIFY_TOL = 1e-9
PERTURB_SEED = 42
AGGREGATION = "minimum over timed repetitions"
PHASOR_NOTE = ("ybus phasor_calc covers U/V update (incl. separate->interleaved copy in "
               "separate mode); ybus power_calc covers mat-vec and V*conj(I)")
PROFILER_HINT = "hardware counters are not collected; run under an external profiler (e.g. perf stat)"
SIMD_CROSSOVER_BUSES = 2736


@dataclass
class BenchConfig:
    case_path: str | Path
    replicate_k: int = 1
    reps: int = 20
    warmup: int = 3
    methods: tuple[str, ...] = (YBUS, ELEMENTWISE)
    storage_mode: str = yb.INTERLEAVED
    reduction_variant: str = "two_step"
    derivative_variant: str = "two_pass"
    assembly_variant: str = "inplace"
    output: str = "csv"
    verify: bool = False
    perturb: float = 0.0

    def __post_init__(self):
        if self.reps < 1:
            raise DomainError("reps must be >= 1")
        if self.warmup < 0:
            raise DomainError("warmup must be >= 0")
        if self.replicate_k < 1:
            raise DomainError("replicate_k must be >= 1")
        self.methods = tuple(self.methods)
        unknown = set(self.methods) - {YBUS, ELEMENTWISE}
        if unknown or not self.methods:
            raise DomainError(f"methods must be a non-empty subset of ybus, elementwise: {unknown}")
        for value, allowed in (
            (self.storage_mode, (yb.INTERLEAVED, yb.SEPARATE)),
            (self.reduction_variant, ("two_step", "copy_add", "new_matrix")),
            (self.derivative_variant, ("two_pass", "matmul")),
            (self.assembly_variant, ("inplace", "concat")),
            (self.output, ("csv", "md")),
        ):
            if value not in allowed:
                raise DomainError(f"{value!r} is not one of {allowed}")


@dataclass
class StepTimings:
    """Per-step nanoseconds for one case; ``None`` for a method not run."""

    case: str
    n_b: int
    n_l: int
    ybus: dict[str, int] | None = None
    elementwise: dict[str, int] | None = None
    samples: dict[str, list[int]] = field(default_factory=dict, repr=False)
    verified: bool | None = None

    def row(self) -> list:
        y = self.ybus or {}
        e = self.elementwise or {}
        return [self.case, self.n_b, self.n_l,
                *(y.get(s) for s in YBUS_STEPS), *(e.get(s) for s in EW_STEPS)]

    def ew_power_faster(self) -> bool | None:
        """Element-wise power (eval + reduction) vs Ybus power (phasor + mat-vec)."""
        if self.ybus is None or self.elementwise is None:
            return None
        ew_total = self.elementwise["power_calc"] + self.elementwise["power_red"]
        return ew_total < self.ybus["phasor_calc"] + self.ybus["power_calc"]


def perturbed_state(net: IndexedNetwork, eps: float):
    """Case-file voltages, optionally jittered by a fixed-seed uniform(-eps, eps)."""
    vm, va = net.vm0.copy(), net.va0.copy()
    if eps:
        rng = np.random.default_rng(PERTURB_SEED)
        va += rng.uniform(-eps, eps, net.n_b)
        vm += rng.uniform(-eps, eps, net.n_b)
    return vm, va


class _YbusRunner:
    def __init__(self, net, cfg: BenchConfig, vm, va):
        self.model = yb.YbusModel.from_network(net, cfg.storage_mode, vm=vm, va=va)
        self.plan = yb.build_jacobian_plan(self.model.ybus)
        self.cfg = cfg
        self.ds = None

    def phasor_calc(self):
        yb.update_phasors(self.model)

    def power_calc(self):
        return yb.power_injection_ybus(self.model)

    def j_calc(self):
        if self.cfg.derivative_variant == "matmul":
            self.ds = yb.derivatives_matmul(self.model)
        else:
            dsa, dsv, _ = yb.derivatives_two_pass(self.model, self.plan)
            self.ds = (dsa, dsv)

    def j_red(self):
        if self.cfg.assembly_variant == "concat":
            return yb.assemble_jacobian_concat(*self.ds)
        return yb.assemble_jacobian_inplace(self.plan, *self.ds)


class _ElementwiseRunner:
    def __init__(self, net, cfg: BenchConfig, vm, va):
        self.net = net
        self.soa = ew.build_branch_soa(net)
        self.ws = ew.ElemWorkspace.for_soa(self.soa)
        self.plan = ew.build_scatter_plan(net)
        self.cfg = cfg
        self.vm, self.va = vm, va

    def power_calc(self):
        ew.eval_powers(self.soa, self.ws, self.vm, self.va)

    def power_red(self):
        return ew.reduce_powers(self.ws, self.soa, self.vm)

    def j_calc(self):
        ew.eval_jacobian_elements(self.soa, self.ws, self.vm, self.va)

    def j_red(self):
        variant = self.cfg.reduction_variant
        if variant == "new_matrix":
            return ew.reduce_jacobian_new_matrix(self.net, self.ws)
        if variant == "copy_add":
            return ew.reduce_jacobian_copy_add(self.plan, self.ws)
        return ew.reduce_jacobian_two_step(self.plan, self.ws)


def _positional_max_diff(a, b) -> float:
    """Max |a - b| over the union of stored positions."""
    if a.same_pattern(b):
        return float(np.max(np.abs(a.nzval - b.nzval), initial=0.0))
    return float(np.max(np.abs(a.to_dense() - b.to_dense()), initial=0.0))


def verify_methods(yr: _YbusRunner, er: _ElementwiseRunner, tol: float = VERIFY_TOL) -> dict:
    """Run both methods once and compare S and J; raise on mismatch."""
    yr.phasor_calc()
    s = yr.power_calc().copy()
    yr.j_calc()
    j_y = yr.j_red().copy()
    er.power_calc()
    p, q = er.power_red()
    er.j_calc()
    j_e = er.j_red().copy()

    ds = float(np.max(np.abs(s - (p + 1j * q)), initial=0.0))
    if ds > tol:
        raise VerificationError("power injections differ between methods", ds)
    dj = _positional_max_diff(j_y, j_e)
    if dj > tol:
        raise VerificationError("Jacobians differ between methods", dj)
    return {"power": ds, "jacobian": dj}


def _time_steps(runner, steps, reps: int, warmup: int):
    samples = {s: [] for s in steps}
    funcs = [getattr(runner, s) for s in steps]
    clock = time.perf_counter_ns
    for r in range(warmup + reps):
        for name, fn in zip(steps, funcs):
            t0 = clock()
            fn()
            dt = clock() - t0
            if r >= warmup:
                samples[name].append(max(dt, 1))
    return samples


def run_bench(cfg: BenchConfig) -> StepTimings:
    net = load_case(cfg.case_path)
    net = replicate_case(net, cfg.replicate_k)
    vm, va = perturbed_state(net, cfg.perturb)
    name = Path(str(cfg.case_path)).name
    name = name[:-2] if name.endswith(".m") else name
    if cfg.replicate_k > 1:
        name = f"{name}x{cfg.replicate_k}"

    yr = _YbusRunner(net, cfg, vm, va) if (YBUS in cfg.methods or cfg.verify) else None
    er = _ElementwiseRunner(net, cfg, vm, va) if (ELEMENTWISE in cfg.methods or cfg.verify) else None
    result = StepTimings(case=name, n_b=net.n_b, n_l=net.n_l)
    if cfg.verify:
        verify_methods(yr, er)
        result.verified = True

    gc_was_enabled = gc.isenabled()
    gc.disable()
    try:
        if YBUS in cfg.methods:
            samples = _time_steps(yr, YBUS_STEPS, cfg.reps, cfg.warmup)
            result.ybus = {s: min(v) for s, v in samples.items()}
            result.samples.update({f"ybus.{s}": v for s, v in samples.items()})
        if ELEMENTWISE in cfg.methods:
            samples = _time_steps(er, EW_STEPS, cfg.reps, cfg.warmup)
            result.elementwise = {s: min(v) for s, v in samples.items()}
            result.samples.update({f"ew.{s}": v for s, v in samples.items()})
    finally:
        if gc_was_enabled:
            gc.enable()
    return result


def time_cost_ratio(timings: list[StepTimings], reference_case: str) -> list[dict]:
    """Per-bus time of every step relative to the reference case's per-bus time."""
    ref = next((t for t in timings if t.case == reference_case), None)
    if ref is None:
        raise DomainError(f"reference case {reference_case!r} not among {[t.case for t in timings]}")
    ref_row = ref.row()[3:]
    out = []
    for t in timings:
        ratios = []
        for value, ref_value in zip(t.row()[3:], ref_row):
            if value is None or ref_value is None:
                ratios.append(None)
            else:
                ratios.append((value / t.n_b) / (ref_value / ref.n_b))
        out.append(dict(zip(CSV_HEADER, [t.case, t.n_b, t.n_l, *ratios])))
    return out


_MD_HEAD = (
    "|  | Ybus Method | | | | Element-wise Method | | | |\n"
    "| Case | Phasor Calc. | Power Calc. | J Calc. | J Red. "
    "| Power Calc. | Power Red. | J Calc. | J Red. |\n"
    "|---|---:|---:|---:|---:|---:|---:|---:|---:|\n"
)


def _md_cell(value, fmt) -> str:
    return "-" if value is None else fmt(value)


def emit_report(timings: list[StepTimings], fmt: str = "csv") -> str:
    """CSV (fixed header, integer ns) or a markdown table laid out like the method comparison."""
    if not timings:
        raise DomainError("no timings to report")
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for t in timings:
            writer.writerow(["" if v is None else v for v in t.row()])
        return buf.getvalue()
    if fmt != "md":
        raise DomainError(f"unknown format {fmt!r}")
    lines = [f"Times in ns, {AGGREGATION}. {PHASOR_NOTE}.", "", _MD_HEAD.rstrip("\n")]
    for t in timings:
        cells = [_md_cell(v, lambda x: f"{x:,}") for v in t.row()[3:]]
        lines.append(f"| {t.case} (n_b={t.n_b}, n_l={t.n_l}) | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def emit_ratio_report(rows: list[dict], fmt: str = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=CSV_HEADER, lineterminator="\n")
        writer.writeheader()
        for r in rows:
            writer.writerow({k: ("" if v is None else (f"{v:.6g}" if isinstance(v, float) else v))
                             for k, v in r.items()})
        return buf.getvalue()
    lines = ["Time-cost ratio (per-bus time relative to the reference case).", "",
             _MD_HEAD.rstrip("\n")]
    for r in rows:
        cells = [_md_cell(r[k], lambda x: f"{x:.3f}") for k in CSV_HEADER[3:]]
        lines.append(f"| {r['case']} | " + " | ".join(cells) + " |")
    return "\n".join(lines) + "\n"


def simd_note(t: StepTimings) -> str | None:
    """Informational: does element-wise power beat Ybus power on a large case?"""
    faster = t.ew_power_faster()
    if faster is None or t.n_b < SIMD_CROSSOVER_BUSES:
        return None
    verdict = "holds" if faster else "does not hold"
    return (f"{t.case}: element-wise power faster than Ybus power {verdict} on this host "
            "(informational)")

"""Convergence-rate experiments for the SAA problem.

A reference problem built from scrambled Sobol' samples stands in for the
true risk-neutral problem.  For every sample size ``N`` in the grid,
independent SAA problems are solved and their solutions are scored against
the reference by the optimality gap ``G_ref(u_N) - G_ref(u_ref)``, the L1
distance to ``u_ref`` and the reference gap functional ``Psi_ref(u_N)``.
"""
import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from . import persist
from .bounds import fit_rate
from .composite import CompositeProblem
from .condgrad import SolverConfig, SolveTrace, solve
from .errors import InvalidArgument, StagnationError
from .mesh import build_mesh
from .models import PdeKind, ProblemData
from .random_field import SampleSet, default_kl_spec, iid_samples, qmc_samples

log = logging.getLogger(__name__)


class StudyAbort(RuntimeError):
    pass


@dataclass(frozen=True)
class StudyConfig:
    kind: PdeKind = PdeKind.AFFINE_LINEAR
    n: int = 64
    M: int = 100
    corr_len: float = 1.0
    amplitude: float = 0.04
    kappa_floor: float = 0.1
    beta: float = None
    lower: float = None
    upper: float = None
    N_ref: int = 8192
    N_grid: tuple = (2, 8, 32, 128)
    replications: int = 40
    seed: int = 0
    scramble_seed: int = 0
    solver: SolverConfig = field(default_factory=SolverConfig)
    reference_solver: SolverConfig = field(
        default_factory=lambda: SolverConfig(gap_tol=1e-10, max_iters=500)
    )
    output_dir: str = None
    threads: int = 1

    def __post_init__(self):
        object.__setattr__(self, "kind", PdeKind.parse(self.kind))
        object.__setattr__(self, "N_grid", tuple(int(N) for N in self.N_grid))
        grid = self.N_grid
        if not grid or any(b <= a for a, b in zip(grid, grid[1:])) or grid[0] < 1:
            raise InvalidArgument(f"N_grid must be strictly increasing positive integers, got {grid}")
        if self.replications < 1:
            raise InvalidArgument("replications must be at least 1")
        if self.N_ref <= grid[-1]:
            raise InvalidArgument("N_ref must exceed the largest SAA sample size")
        self.problem_data()

    def problem_data(self):
        return ProblemData.for_kind(self.kind, beta=self.beta, lower=self.lower, upper=self.upper)

    def field_spec(self):
        return default_kl_spec(self.M, self.corr_len, self.amplitude, self.kappa_floor)

    def to_dict(self):
        d = asdict(self)
        d["kind"] = self.kind.value
        d["N_grid"] = list(self.N_grid)
        for key in ("solver", "reference_solver"):
            ls = d[key]["line_search"]
            d[key]["line_search"] = None if ls is None else getattr(ls, "value", ls)
        return d


@dataclass
class Reference:
    problem: CompositeProblem
    u: np.ndarray
    value: float
    trace: SolveTrace


@dataclass
class ReplicationResult:
    N: int
    rep: int
    obj_gap: float
    l1_dist: float
    ref_gap: float
    saa_value: float
    status: str
    u: np.ndarray = field(default=None, repr=False)

    @property
    def ok(self):
        return self.status == "ok"

    def raw_row(self):
        f = persist.fmt
        return [self.N, self.rep, f(self.obj_gap), f(self.l1_dist), f(self.ref_gap), self.status]


@dataclass
class StudyReport:
    summary: list
    rates: dict
    theta_ref: float
    consistency: list
    valid: bool
    results: list = field(default_factory=list, repr=False)

    def rate(self, metric):
        return self.rates.get(metric)


def nominal_samples(M):
    return SampleSet(np.zeros((1, M)), "nominal:xi=0")


def _setup(cfg):
    return build_mesh(cfg.n), cfg.field_spec(), cfg.problem_data()


def build_reference(cfg, mesh=None):
    """Solve the reference SAA problem defined by ``N_ref`` scrambled Sobol' samples."""
    if mesh is None:
        mesh = build_mesh(cfg.n)
    spec, data = cfg.field_spec(), cfg.problem_data()
    samples = qmc_samples(spec, cfg.N_ref, cfg.scramble_seed)
    problem = CompositeProblem(cfg.kind, data, spec, samples, mesh, workers=cfg.threads)
    try:
        trace = solve(problem, cfg=cfg.reference_solver)
    except StagnationError as exc:
        raise StudyAbort(f"reference solve stagnated: {exc}") from exc
    log.info("reference: %s after %d gap evaluations, gap %.3e",
             trace.status, trace.iterations, trace.final_gap)
    return Reference(problem, trace.final_u, trace.final_objective, trace)


def replication_seed(cfg, N, rep):
    return (int(cfg.seed), int(N), int(rep))


def score(reference, u):
    """Optimality gap, L1 distance and reference gap of a control."""
    ref = reference.problem
    st = ref.evaluate(u)
    obj_gap = ref.objective(st) - reference.value
    l1 = ref.area * float(np.sum(np.abs(u - reference.u)))
    return obj_gap, l1, ref.gap(st).gap


def run_replication(cfg, N, rep, reference, mesh=None):
    mesh = reference.problem.mesh if mesh is None else mesh
    spec, data = reference.problem.spec, reference.problem.data
    try:
        samples = iid_samples(spec, N, replication_seed(cfg, N, rep))
        problem = CompositeProblem(cfg.kind, data, spec, samples, mesh)
        trace = solve(problem, cfg=cfg.solver)
        obj_gap, l1, rg = score(reference, trace.final_u)
        return ReplicationResult(N, rep, obj_gap, l1, rg, trace.final_objective, "ok", trace.final_u)
    except Exception as exc:  # recorded per replication, never fatal for the study
        log.warning("replication N=%d rep=%d failed: %s", N, rep, exc)
        msg = f"failed:{type(exc).__name__}".replace(",", ";")
        return ReplicationResult(N, rep, np.nan, np.nan, np.nan, np.nan, msg)


def _mean_se(values):
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return np.nan, np.nan
    se = float(np.std(v, ddof=1) / np.sqrt(v.size)) if v.size > 1 else 0.0
    return float(np.mean(v)), se


def summarize(results, theta_ref, N_grid=None):
    """Per-N means and standard errors, log-log rates and the consistency table.

    ``results`` are :class:`ReplicationResult` objects (``u`` not needed).
    """
    if N_grid is None:
        N_grid = sorted({r.N for r in results})
    summary, consistency = [], []
    valid = True
    for N in N_grid:
        rows = [r for r in results if r.N == N]
        ok = [r for r in rows if r.ok]
        if not rows or len(rows) - len(ok) > 0.2 * len(rows):
            valid = False
        stats = {}
        for m in persist.METRICS:
            stats[m] = _mean_se([getattr(r, m) for r in ok])
        summary.append({"N": N, **stats})
        consistency.append((N, *_mean_se([abs(r.saa_value - theta_ref) for r in ok])))
    rates = {}
    for m in persist.METRICS:
        pts = [(s["N"], s[m][0]) for s in summary if np.isfinite(s[m][0]) and s[m][0] > 0]
        rates[m] = fit_rate(pts) if len(pts) >= 3 else None
    return summary, rates, consistency, valid


def consistency_trend_ok(consistency):
    """Nonincreasing means, allowing one increase no larger than its standard error."""
    inversions = 0
    for (_, m0, _), (_, m1, se1) in zip(consistency, consistency[1:]):
        if m1 > m0:
            inversions += 1
            if inversions > 1 or m1 - m0 > se1:
                return False
    return True


def run_study(cfg, reference=None, persist_dir=None, keep_controls=False):
    """Run all replications and, if an output directory is set, write the report files."""
    mesh = reference.problem.mesh if reference is not None else build_mesh(cfg.n)
    if reference is None:
        reference = build_reference(cfg, mesh)
    tasks = [(N, rep) for N in cfg.N_grid for rep in range(cfg.replications)]

    def task(t):
        res = run_replication(cfg, t[0], t[1], reference, mesh)
        if not keep_controls:
            res.u = None
        return res

    if cfg.threads > 1:
        with ThreadPoolExecutor(cfg.threads) as ex:
            results = list(ex.map(task, tasks))
    else:
        results = [task(t) for t in tasks]
    summary, rates, consistency, valid = summarize(results, reference.value, cfg.N_grid)
    report = StudyReport(summary, rates, reference.value, consistency, valid, results)
    out = persist_dir or cfg.output_dir
    if out:
        write_study(out, cfg, reference, report)
    return report


def write_report_files(out, summary, rates, consistency, results):
    f = persist.fmt
    persist.write_rows(os.path.join(out, "raw.csv"), persist.RAW_HEADER, [r.raw_row() for r in results])
    persist.write_rows(
        os.path.join(out, "saa_values.csv"),
        persist.VALUES_HEADER,
        [[r.N, r.rep, f(r.saa_value)] for r in results],
    )
    write_derived_files(out, summary, rates, consistency)


def write_derived_files(out, summary, rates, consistency):
    f = persist.fmt
    rows = []
    for s in summary:
        rows.append([s["N"], f(s["obj_gap"][0]), f(s["obj_gap"][1]), f(s["l1_dist"][0]),
                     f(s["l1_dist"][1]), f(s["ref_gap"][0]), f(s["ref_gap"][1])])
    persist.write_rows(os.path.join(out, "summary.csv"), persist.SUMMARY_HEADER, rows)
    rrows = []
    for m in persist.METRICS:
        fit = rates.get(m)
        rrows.append([m, f(fit.slope), f(fit.intercept), f(fit.r_squared)] if fit else [m, "nan", "nan", "nan"])
    persist.write_rows(os.path.join(out, "rates.csv"), persist.RATES_HEADER, rrows)
    persist.write_rows(
        os.path.join(out, "consistency.csv"),
        ["N", "mean_abs_value_diff", "se"],
        [[N, f(m), f(se)] for N, m, se in consistency],
    )
    labels = {
        "obj_gap": "mean G_ref(u_N) - G_ref(u_ref)",
        "l1_dist": "mean ||u_N - u_ref||_L1",
        "ref_gap": "mean Psi_ref(u_N)",
    }
    for m in persist.METRICS:
        pts = [(s["N"], s[m][0]) for s in summary if np.isfinite(s[m][0]) and s[m][0] > 0]
        if pts:
            N, vals = zip(*pts)
            persist.plot_rate(os.path.join(out, f"rate_{m}.svg"), N, vals, rates.get(m), labels[m])


def write_study(out, cfg, reference, report):
    os.makedirs(out, exist_ok=True)
    mesh = reference.problem.mesh
    persist.write_json(os.path.join(out, "manifest.json"), {
        "config": cfg.to_dict(),
        "versions": persist.versions(),
        "reference_samples": reference.problem.samples.provenance,
        "replication_seed": "(seed, N, rep) -> numpy SeedSequence -> Philox",
    })
    persist.write_json(os.path.join(out, "reference.json"), {
        "theta_ref": persist.fmt(reference.value),
        "status": reference.trace.status,
        "iterations": reference.trace.iterations,
        "final_gap": persist.fmt(reference.trace.final_gap),
        "N_grid": list(cfg.N_grid),
        "valid": report.valid,
    })
    reference.trace.to_csv(os.path.join(out, "reference_trace.csv"))
    persist.write_control(os.path.join(out, "reference_control.csv"), mesh, reference.u)
    persist.plot_control(os.path.join(out, "reference_control.svg"), mesh, reference.u,
                         f"reference solution, N_ref={reference.problem.N}")
    write_report_files(out, report.summary, report.rates, report.consistency, report.results)


def load_results(out):
    """Rebuild replication results from ``raw.csv`` and ``saa_values.csv``."""
    raw = persist.read_rows(os.path.join(out, "raw.csv"), persist.RAW_HEADER)
    vals = persist.read_rows(os.path.join(out, "saa_values.csv"), persist.VALUES_HEADER)
    value_of = {(int(v["N"]), int(v["rep"])): float(v["saa_value"]) for v in vals}
    results = []
    for r in raw:
        key = (int(r["N"]), int(r["rep"]))
        results.append(ReplicationResult(
            key[0], key[1], float(r["obj_gap"]), float(r["l1_dist"]), float(r["ref_gap"]),
            value_of.get(key, np.nan), r["status"],
        ))
    return results


def regenerate_report(out):
    info = persist.read_json(os.path.join(out, "reference.json"))
    results = load_results(out)
    summary, rates, consistency, valid = summarize(results, float(info["theta_ref"]), info["N_grid"])
    write_derived_files(out, summary, rates, consistency)
    return StudyReport(summary, rates, float(info["theta_ref"]), consistency, valid, results)


def solve_nominal(cfg, out=None):
    """Solve the problem at the mean parameter ``xi = 0``."""
    mesh, spec, data = _setup(cfg)
    problem = CompositeProblem(cfg.kind, data, spec, nominal_samples(spec.M), mesh)
    trace = solve(problem, cfg=cfg.reference_solver)
    if out:
        os.makedirs(out, exist_ok=True)
        trace.to_csv(os.path.join(out, "nominal_trace.csv"))
        persist.write_control(os.path.join(out, "nominal_control.csv"), mesh, trace.final_u)
        persist.plot_control(os.path.join(out, "nominal_control.svg"), mesh, trace.final_u,
                             f"nominal solution ({cfg.kind.value})")
    return problem, trace

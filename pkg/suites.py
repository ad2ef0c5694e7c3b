import logging
import math
import time
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.integrate import trapezoid

import bridgesim
import checks
import detcalc
import kernels
import pdesolve
import polymer
import shelattice
import streams
from kernels import WeylPoint
from pdesolve import Bump, GridSpec, PotentialField
from results import SUITE_CLAIMS, ResultRow, missing_claims

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

SUITE_ORDER = ["calibrate", "smooth-suite", "bridges-suite", "lattice-suite", "polymer-suite"]
GRID_KEYS = ("y_min", "y_max", "n_y", "n_t", "t_final", "init_epsilon")
LATTICE_KEYS = ("y_min", "y_max", "n_y", "n_t", "t_final")

CALIBRATION_PROBES = (-0.5, 0.0, 0.5)
GT_PROBES = {
    2: [(0.5, -0.5), (1.0, 0.0), (0.3, -0.8), (1.2, 0.4), (0.0, -1.0)],
    3: [(1.0, 0.0, -1.0), (0.8, 0.1, -0.6), (1.2, 0.5, -0.2), (0.6, -0.3, -1.1), (1.5, 0.7, 0.0)],
}
INTERLACING_FAMILIES = 20
FACTORIZATION_POINTS = [(1.0, -1.0), (1.0, 0.0, -1.0), (1.5, 0.25, -0.75), (0.5, -0.2, -1.3)]
ACCEPTANCE_CASES = [
    (1.0, (0.5, -0.5), (0.5, -0.5)),
    (1.0, (1.0, -1.0), (1.0, -1.0)),
    (0.5, (1.0, 0.0), (0.5, -0.5)),
    (1.0, (0.3, 0.0), (0.2, 0.0)),
    (1.0, (2.0, -2.0), (2.0, -2.0)),
]


### Grids ###

def smooth_grid(config, **overrides):
    params = {k: config["grid"][k] for k in GRID_KEYS if config["grid"].get(k) is not None}
    params.update(overrides)
    return GridSpec(**params)


def _lattice_grid(config, t_final=None, **overrides):
    """Lattice grid at t_final with dt kept at the configured value"""
    lat = config["lattice"]
    t = lat["t_final"] if t_final is None else t_final
    n_t = max(3, int(round(lat["n_t"] * t / lat["t_final"])))
    params = {k: lat[k] for k in LATTICE_KEYS}
    params.update(n_t=n_t, t_final=t)
    params.update(overrides)
    return shelattice.lattice_grid(**params)


def off_centre_bump():
    return PotentialField((Bump(1.0, 0.5, 0.7, 0.2, 0.5),))


def negative_bump():
    return PotentialField((Bump(-0.5, 0.5, 0.0, 0.2, 0.5),))


def half_bump():
    return PotentialField((Bump(0.5, 0.5, 0.0, 0.2, 0.5),))


### Context ###

@dataclass
class SuiteContext:
    config: dict
    executor: object = None
    rows: list = field(default_factory=list)
    ledger: list = field(default_factory=list)
    experiment: str = ""
    timer: float = field(default_factory=time.perf_counter)

    @property
    def seed(self):
        return int(self.config["mc"]["master_seed"])

    @property
    def n_max(self):
        return int(self.config["layers"]["n_max"])

    @property
    def potential(self):
        return PotentialField.from_config(self.config.get("potential"))

    @property
    def samples(self):
        return int(self.config["mc"]["samples"])

    def tol(self, name):
        return checks.tolerance(name, self.config.get("tolerances"))

    def add(self, check_id, claim, quantity, value, passed, error=None, reference=None,
            provenance="closed-form", tolerance=None, diagnostic=False, seed=None):
        now = time.perf_counter()
        if isinstance(tolerance, (list, tuple)):
            quantity = f"{quantity} (band {tolerance[0]:g} to {tolerance[1]:g})"
            tolerance = tolerance[0]
        row = ResultRow(
            experiment=self.experiment,
            check_id=f"{self.experiment}.{check_id}",
            claim=claim,
            quantity=quantity,
            value=float(value),
            error=None if error is None else float(error),
            reference=None if reference is None else float(reference),
            provenance=provenance,
            tolerance=None if tolerance is None else float(tolerance),
            passed=bool(passed),
            diagnostic=diagnostic,
            seed=seed,
            wall_time=now - self.timer,
        )
        self.timer = now
        self.rows.append(row)
        level = logging.INFO if row.passed or diagnostic else logging.WARNING
        logger.log(level, f"{row.check_id}: {quantity} = {row.value:.6g} "
                          f"({'pass' if row.passed else 'FAIL'}{', diagnostic' if diagnostic else ''})")
        return row


def _trust_error(values, reference, mask):
    return checks.relative_error(np.asarray(values)[mask], np.asarray(reference)[mask])


### calibrate ###

def _interlacing_family(seed, n, k, grid):
    rng = streams.stream(seed, "interlacing", n, k)
    samples = [np.ones_like(grid)]
    for _ in range(n - 1):
        coeffs = rng.standard_normal(int(rng.integers(2, 6)))
        samples.append(np.polynomial.polynomial.polyval(grid, coeffs))
    nodes = np.sort(rng.choice(len(grid), size=n, replace=False))[::-1]
    return np.array(samples), WeylPoint(tuple(grid[nodes]))


def calibrate(ctx):
    """Constant ledger, calibration protocol, interlacing and Sylvester chain checks"""
    grid = smooth_grid(ctx.config)
    t = grid.t_final
    ctx.ledger.extend(kernels.ledger_entries(ctx.n_max, t))

    for n in (2, 3):
        value, error = kernels.confluent_limit_constant(n, t)
        printed = kernels.printed_constant(n, t)
        tol = ctx.tol("confluent_constant")
        ctx.add(f"confluent-limit.n{n}", "confluent-wronskian", f"lim p^n D(x)D(y)/p*_{n}", value,
                checks.check_relative(value, printed, tol), error=error, reference=printed, tolerance=tol)

    potentials = {
        "zero": PotentialField.zero(),
        "config": ctx.potential,
        "off-centre": off_centre_bump(),
        "negative": negative_bump(),
    }
    pencil = grid.pencil(0.0, 4)
    surfaces = {name: pdesolve.solve_smooth(phi, pencil, retain=1, executor=ctx.executor)
                for name, phi in potentials.items()}
    for n in (2, 3):
        probes = [pdesolve.calibration_probe(surface, 0.0, y, n)
                  for surface in surfaces.values() for y in CALIBRATION_PROBES]
        constants = np.array([p.calibrated_constant for p in probes])
        exact = kernels.calibrate_wronskian_constant(n, t)
        tol = ctx.tol("calibration_spread")
        ctx.add(f"calibration.spread.n{n}", "confluent-wronskian", "max/min - 1 of probe constants",
                checks.spread(constants), checks.check_spread(constants, tol), provenance="cross-method",
                tolerance=tol)
        mean = float(constants.mean())
        ctx.add(f"calibration.mean.n{n}", "confluent-wronskian", "mean calibrated constant", mean,
                checks.check_relative(mean, exact, tol), error=float(constants.std(ddof=1)), reference=exact,
                tolerance=tol)
        ctx.ledger.append(kernels.ConstantLedger(
            n=n, t=t, printed_constant=kernels.printed_constant(n, t), calibrated_constant=mean,
            orientation_sign=kernels.orientation_sign(n), name="wronskian-calibrated",
            probe_count=len(probes), note=f"{len(potentials)} potentials x {len(CALIBRATION_PROBES)} probes",
        ))

    z_grid = np.linspace(-1.5, 1.5, 3001)
    tol = ctx.tol("exact_identity")
    for n in (2, 3, 4):
        residuals = []
        gaps = []
        for k in range(INTERLACING_FAMILIES):
            samples, y = _interlacing_family(ctx.seed, n, k, z_grid)
            result = detcalc.interlace_integral(samples, z_grid, y)
            residuals.append(result.residual / max(1.0, abs(result.integral)))
            gaps.append(abs(result.quadrature - result.integral) / max(1.0, abs(result.integral)))
        worst = max(residuals)
        ctx.add(f"interlacing.n{n}", "interlacing-integral",
                f"max residual with orientation sign {kernels.orientation_sign(n)}", worst,
                checks.check_at_most(worst, tol), tolerance=tol, seed=ctx.seed)
        ctx.add(f"interlacing.quadrature.n{n}", "interlacing-integral", "Simpson quadrature gap", max(gaps),
                True, provenance="diagnostic", diagnostic=True, seed=ctx.seed)

    _sylvester_checks(ctx, t)


def _exact_table_grid(t, nodes, m):
    return np.array([[kernels.heat_kernel_derivatives(t, x, y, m) for y in nodes] for x in nodes])


def _fd_residual(t, h, m=3, half_width=0.6):
    nodes = np.arange(-half_width, half_width + h / 2.0, h)
    samples = kernels.heat_kernel(t, nodes[:, None], nodes[None, :])
    tables, _ = detcalc.derivative_grid(samples, h, h, m)
    return detcalc.darboux_chain(tables, h, h).residual


def _sylvester_checks(ctx, t):
    tol = ctx.tol("exact_identity")
    nodes = np.linspace(-0.5, 0.5, 11)
    chain = detcalc.darboux_chain(_exact_table_grid(t, nodes, 4), nodes[1] - nodes[0], nodes[1] - nodes[0])
    for n in range(1, 4):
        reference = n / t
        value = float(np.max(np.abs(chain.t_fields[n - 1] - reference)) / reference)
        ctx.add(f"sylvester.exact.T{n}", "sylvester-chain", f"T_{n} against {n}/t", value,
                checks.check_at_most(value, tol), reference=0.0, tolerance=tol)
    rebuilt = chain.reconstruct()
    value = checks.relative_error(rebuilt, chain.w)
    ctx.add("sylvester.reconstruct", "sylvester-chain", "W rebuilt from T", value,
            checks.check_at_most(value, tol), reference=0.0, tolerance=tol)
    value = float(np.max(chain.residual)) * t
    ctx.add("sylvester.exact.residual", "sylvester-chain", "|T_n - d_xy log W_n| t", value,
            checks.check_at_most(value, 1e-6), reference=0.0, tolerance=1e-6)

    band = ctx.tol("convergence_band")
    ratios = _fd_residual(t, 0.04) / _fd_residual(t, 0.02)
    for n, ratio in enumerate(ratios, start=1):
        ctx.add(f"sylvester.refinement.T{n}", "sylvester-chain", f"residual ratio T_{n}", ratio,
                checks.check_band(ratio, band), provenance="refinement", tolerance=band)

    y = np.linspace(-1.0, 1.0, 201)
    dy = y[1] - y[0]
    tol = ctx.tol("difference_chain")
    for n in (2, 3):
        dx = np.array([kernels.heat_kernel_derivatives(t, 0.0, v, n + 1)[:, 0] for v in y]).T
        t_fields = np.array([np.full_like(y, k / t) for k in range(1, n)])
        chain_values, error = detcalc.divided_difference_chain(dx, t_fields, dy)
        value = checks.relative_error(chain_values[3:-3], n / t)
        bound = max(tol, 3.0 * error * t / n)
        ctx.add(f"difference-chain.n{n}", "sylvester-chain", f"divided-difference chain against {n}/t", value,
                checks.check_at_most(value, bound), error=error, reference=0.0, tolerance=bound)

    z = np.linspace(-3.0, 3.0, 121)
    tol = ctx.tol("gt_factorization")
    for y in FACTORIZATION_POINTS:
        n = len(y)
        tables = [kernels.heat_kernel_derivatives(t, 0.0, v, n) for v in z]
        report = detcalc.gt_factorization_check(tables, z, WeylPoint(y))
        ctx.add(f"gt-factorization.n{n}.{'_'.join(f'{v:g}' for v in y)}", "sylvester-chain",
                "signed det[d_x^(i-1) p] / (prod p * GT integral of T)", report.constant,
                checks.check_relative(report.constant, 1.0, tol), error=abs(report.error / report.rhs),
                reference=1.0, tolerance=tol)


### smooth-suite ###

def _kernel_basics(ctx):
    tol = ctx.tol("exact_identity")
    z = np.linspace(-12.0, 12.0, 4801)
    mass = trapezoid(kernels.heat_kernel(1.0, 0.3, z), z)
    ctx.add("kernel.normalization", "kernel-basics", "integral of p(1, 0.3, .)", mass,
            checks.check_relative(mass, 1.0, tol), reference=1.0, tolerance=tol)
    s, t = 0.4, 0.6
    composed = trapezoid(kernels.heat_kernel(s, 0.2, z) * kernels.heat_kernel(t, z, -0.5), z)
    reference = float(kernels.heat_kernel(s + t, 0.2, -0.5))
    ctx.add("kernel.chapman-kolmogorov", "kernel-basics", "int p(s,x,z)p(t,z,y)dz", composed,
            checks.check_relative(composed, reference, tol), reference=reference, tolerance=tol)

    x, y = (0.5, -0.5), (0.7, -0.3)
    zz = np.linspace(-6.0, 6.0, 601)
    z1, z2 = np.meshgrid(zz, zz, indexing="ij")

    def killed(time_, a, b, c, d):
        return (kernels.heat_kernel(time_, a, c) * kernels.heat_kernel(time_, b, d)
                - kernels.heat_kernel(time_, a, d) * kernels.heat_kernel(time_, b, c))

    integrand = killed(s, x[0], x[1], z1, z2) * killed(t, z1, z2, y[0], y[1])
    value = 0.5 * trapezoid(trapezoid(integrand, zz, axis=1), zz)
    reference = kernels.km_density(s + t, x, y)
    tol = ctx.tol("free_field")
    ctx.add("kernel.killed-semigroup", "kernel-basics", "int_{z1>z2} p*(s)p*(t)", value,
            checks.check_relative(value, reference, tol), reference=reference, tolerance=tol)


def smooth_suite(ctx):
    """Free-field exactness, residual refinement, GT reconstruction and symmetry"""
    grid = smooth_grid(ctx.config)
    t = grid.t_final
    n_max = ctx.n_max
    _kernel_basics(ctx)

    free = pdesolve.solve_smooth(PotentialField.zero(), grid.pencil(0.0, max(n_max, 3)), retain=3,
                                 executor=ctx.executor)
    tol = ctx.tol("free_field")
    worst = max(_trust_error(free.z[i], kernels.heat_kernel(t, x, grid.y), grid.trust_mask(x))
                for i, x in enumerate(grid.x_nodes))
    ctx.add("free.kernel", "kernel-basics", "max relative error against p", worst,
            checks.check_at_most(worst, tol), reference=0.0, tolerance=tol)

    stack = pdesolve.build_layers(free, 0.0, n_max)
    p = kernels.heat_kernel(t, 0.0, stack.y)
    for n in range(1, n_max + 1):
        tol = ctx.tol("layers_free_field")
        value = _trust_error(stack.z_layers[n - 1], p ** n, stack.trust)
        ctx.add(f"free.layers.n{n}", "confluent-wronskian", f"Z_{n} against p^{n}", value,
                checks.check_at_most(value, tol), reference=0.0, tolerance=tol)
    tol = ctx.tol("s_free_field")
    for n in range(1, n_max):
        mask = stack.trust & np.isfinite(stack.s_fields[n - 1]) & np.isfinite(stack.s_tilde[n - 1])
        value = _trust_error(stack.s_fields[n - 1], np.full_like(p, 1.0 / (n * t)), mask)
        ctx.add(f"free.s-ratio.n{n}", "s-evolution", f"S_{n} against 1/({n}t)", value,
                checks.check_at_most(value, tol), reference=0.0, tolerance=tol)
        value = _trust_error(stack.s_tilde[n - 1], np.full_like(p, n / t), mask)
        ctx.add(f"free.s-dxy.n{n}", "s-evolution", f"d_xy log Z_{n} against {n}/t", value,
                checks.check_at_most(value, tol), reference=0.0, tolerance=tol)
        factor = float(np.median(stack.s_tilde[n - 1][mask] / stack.s_fields[n - 1][mask]))
        ctx.add(f"free.s-factor.n{n}", "s-evolution", "median d_xy log Z_n / S_n", factor,
                checks.check_relative(factor, n * n, tol), reference=n * n, tolerance=tol)

    c = 0.5
    flat_grid = replace(grid, x_nodes=(0.0,))
    flat = pdesolve.solve_smooth(PotentialField.constant(c), flat_grid, retain=1, executor=ctx.executor)
    reference = math.exp(c * t) * kernels.heat_kernel(t, 0.0, grid.y)
    tol = ctx.tol("free_field")
    value = _trust_error(flat.z[0], reference, grid.trust_mask(0.0))
    ctx.add("flat.kernel", "kernel-basics", f"Z against exp({c} t) p", value,
            checks.check_at_most(value, tol), reference=0.0, tolerance=tol)

    free_s = pdesolve.s_evolution_residual(free, 0.0, 2)["dxy-log"]
    ctx.add("free.s-variation", "s-evolution", "max |d_y S_1| with zero potential",
            float(np.max(free_s.y_variation)), True, provenance="diagnostic", diagnostic=True)

    potential = ctx.potential
    pencil = grid.pencil(0.0, 3)
    surface = pdesolve.solve_smooth(potential, pencil, retain=3, executor=ctx.executor)
    fine = pdesolve.solve_smooth(potential, pencil.refined(), retain=3, executor=ctx.executor)
    band = ctx.tol("convergence_band")
    ratios = pdesolve.layer_residual(surface, 0.0, 2).ratio(pdesolve.layer_residual(fine, 0.0, 2))
    for n, ratio in enumerate(ratios, start=1):
        ctx.add(f"darboux.refinement.n{n}", "darboux-hierarchy", f"layer residual ratio n={n}", ratio,
                checks.check_band(ratio, band), provenance="refinement", tolerance=band)
    free_fine = pdesolve.solve_smooth(PotentialField.zero(), grid.pencil(0.0, 1).refined(), retain=3,
                                      executor=ctx.executor)
    coarse_free = pdesolve.layer_residual(free, 0.0, 1)
    ratio = float(coarse_free.ratio(pdesolve.layer_residual(free_fine, 0.0, 1))[0])
    ctx.add("darboux.free.n1", "darboux-hierarchy", "free layer residual ratio n=1", ratio, True,
            error=float(coarse_free.max_norm[0]), provenance="diagnostic", diagnostic=True)

    coarse_s = pdesolve.s_evolution_residual(surface, 0.0, 2)
    fine_s = pdesolve.s_evolution_residual(fine, 0.0, 2)
    ratio = float(coarse_s["dxy-log"].ratio(fine_s["dxy-log"])[0])
    ctx.add("s-evolution.refinement.dxy-log", "s-evolution", "S residual ratio (d_xy log)", ratio,
            checks.check_band(ratio, band), provenance="refinement", tolerance=band)
    ratio = float(coarse_s["nt-ratio"].ratio(fine_s["nt-ratio"])[0])
    ctx.add("s-evolution.refinement.nt-ratio", "s-evolution", "S residual ratio (Z ratio form)", ratio,
            True, provenance="diagnostic", diagnostic=True)
    ranking = float(np.max(coarse_s["nt-ratio"].max_norm) / np.max(coarse_s["dxy-log"].max_norm))
    ctx.add("s-evolution.ranking", "s-evolution", "max residual Z ratio form / d_xy log", ranking, True,
            provenance="diagnostic", diagnostic=True)

    _gt_checks(ctx, surface, free)
    _symmetry_checks(ctx, grid)


def _gt_checks(ctx, surface, free):
    tol = ctx.tol("gt_constancy")
    for n in (2, 3):
        if n > ctx.n_max:
            continue
        results = [pdesolve.gt_reconstruction_check(surface, 0.0, y, n) for y in GT_PROBES[n]]
        constants = np.array([r.constant for r in results])
        ctx.add(f"gt.constancy.n{n}", "gelfand-tsetlin", f"spread of A/B over {len(results)} probes",
                checks.spread(constants), checks.check_spread(constants, tol), provenance="cross-method",
                tolerance=tol)
        selected = sum(r.selected == "dxy-log" for r in results) / len(results)
        ctx.add(f"gt.selection.n{n}", "gelfand-tsetlin", "share of probes selecting d_xy log", selected,
                True, provenance="diagnostic", diagnostic=True)
        ctx.ledger.append(results[0].ledger)

        reference = pdesolve.gt_reconstruction_check(free, 0.0, GT_PROBES[n][0], n)
        value = reference.ratio_alt * reference.sign
        free_tol = ctx.tol("gt_free_field")
        ctx.add(f"gt.free.n{n}", "gelfand-tsetlin", "signed A/B with zero potential", value,
                checks.check_relative(value, 1.0, free_tol), reference=1.0, tolerance=free_tol)


def _symmetry_checks(ctx, grid):
    tol = ctx.tol("reflection")
    for label, phi in (("off-centre", off_centre_bump()), ("even", pdesolve.standard_bump())):
        report = pdesolve.rsk_symmetry_check(phi, grid, N=min(ctx.n_max, 3), tolerance=tol,
                                             executor=ctx.executor)
        for n, error in report.errors.items():
            ctx.add(f"rsk.{label}.n{n}", "rsk-symmetry", f"reflection error u_{n}", error,
                    checks.check_at_most(error, tol), reference=0.0, provenance="cross-method", tolerance=tol)

    single = replace(grid, x_nodes=(0.0,))
    surface = pdesolve.solve_smooth(pdesolve.standard_bump(), single, retain=1, executor=ctx.executor)
    mass = pdesolve.mass_bound_check(surface, ctx.tol("mass"))
    ctx.add("mass-bound", "kernel-basics", "mass / exp(t sup phi)", float(np.max(mass.mass) / mass.bound),
            mass.holds, reference=1.0, tolerance=mass.tolerance)
    margin = pdesolve.monotonicity_check(half_bump(), pdesolve.standard_bump(), single, executor=ctx.executor)
    ctx.add("monotonicity", "kernel-basics", "min relative margin Z^upper - Z^lower", margin,
            checks.check_at_least(margin, 0.0), reference=0.0, tolerance=0.0)


### bridges-suite ###

def _bridge_basics(ctx, t=1.0):
    m = int(ctx.config["mc"]["steps"])
    samples = ctx.samples

    def block(index, size):
        rng = streams.stream(ctx.seed, "bridge-midpoint", index)
        paths = bridgesim.bridge_batch(rng, t, [0.0], [1.0], m, size)
        ends = np.abs(paths[:, 0, 0]).max() + np.abs(paths[:, 0, -1] - 1.0).max()
        return paths[:, 0, m // 2], ends

    parts = streams.run_blocks(block, samples, ctx.executor)
    mid = np.concatenate([p[0] for p in parts])
    ends = max(p[1] for p in parts)
    n_sigma = ctx.tol("mc_sigma")
    s = m // 2 * t / m
    mean_ref = s / t
    var_ref = s * (t - s) / t
    stderr = float(mid.std(ddof=1) / math.sqrt(len(mid)))
    ctx.add("bridge.midpoint-mean", "kernel-basics", "bridge midpoint mean", mid.mean(),
            checks.check_within_sigma(mid.mean(), mean_ref, stderr, n_sigma), error=stderr,
            reference=mean_ref, tolerance=n_sigma, seed=ctx.seed)
    var = float(mid.var(ddof=1))
    var_err = var * math.sqrt(2.0 / (len(mid) - 1))
    ctx.add("bridge.midpoint-variance", "kernel-basics", "bridge midpoint variance", var,
            checks.check_within_sigma(var, var_ref, var_err, n_sigma), error=var_err, reference=var_ref,
            tolerance=n_sigma, seed=ctx.seed)
    ctx.add("bridge.endpoints", "kernel-basics", "max endpoint deviation", ends, ends == 0.0,
            reference=0.0, tolerance=0.0, seed=ctx.seed)

    for k, (time_, x, y) in enumerate(ACCEPTANCE_CASES):
        mean, stderr = bridgesim.acceptance_probability(time_, x, y, m, samples, ctx.seed, executor=ctx.executor)
        reference = bridgesim.karlin_mcgregor_acceptance(time_, x, y)
        reference_error = math.sqrt(reference * (1.0 - reference) / samples)
        ctx.add(f"acceptance.case{k}", "kernel-basics", f"non-crossing probability t={time_}, x={x}, y={y}",
                mean, checks.check_within_sigma(mean, reference, stderr, n_sigma, reference_error),
                error=stderr, reference=reference, tolerance=n_sigma, seed=ctx.seed)
    x3 = (1.0, 0.0, -1.0)
    mean, stderr = bridgesim.acceptance_probability(t, x3, x3, m, samples, ctx.seed, executor=ctx.executor)
    reference = bridgesim.karlin_mcgregor_acceptance(t, x3, x3)
    ctx.add("acceptance.n3", "kernel-basics", "grid-ordered fraction n=3 (no sub-grid correction)", mean, True,
            error=stderr, reference=reference, provenance="diagnostic", diagnostic=True, seed=ctx.seed)


def bridges_suite(ctx):
    """Bridge sampler, Feynman-Kac cross-checks, Rayleigh law and second moment"""
    grid = smooth_grid(ctx.config)
    t = grid.t_final
    mc = ctx.config["mc"]
    m = int(mc["steps"])
    samples = ctx.samples
    n_sigma = ctx.tol("mc_sigma")
    potential = ctx.potential
    _bridge_basics(ctx, t)

    x = y = WeylPoint((0.5, -0.5))
    pair = pdesolve.solve_smooth(potential, replace(grid, x_nodes=x.coords), retain=1, executor=ctx.executor)
    reference = float(shelattice.km_determinant(pair, x, y).det)
    estimate = bridgesim.feynman_kac_layers(potential, 2, t, x, y, samples, ctx.seed, m=m, executor=ctx.executor)
    ctx.add("kmg.cross-method", "karlin-mcgregor-potential", "tilde-Z_2 by Feynman-Kac", estimate.value,
            checks.check_within_sigma(estimate.value, reference, estimate.stderr, n_sigma),
            error=estimate.stderr, reference=reference, provenance="cross-method", tolerance=n_sigma,
            seed=ctx.seed)
    relative = estimate.stderr / abs(estimate.value)
    ctx.add("kmg.stderr", "karlin-mcgregor-potential", "relative MC standard error", relative,
            checks.check_at_most(relative, 0.01), tolerance=0.01, seed=ctx.seed)
    quarter = bridgesim.feynman_kac_layers(potential, 2, t, x, y, max(samples // 4, 2), ctx.seed, m=m,
                                           executor=ctx.executor)
    ratio = quarter.stderr / estimate.stderr
    tol = ctx.tol("stderr_scaling")
    ctx.add("mc.stderr-scaling", "karlin-mcgregor-potential", "stderr ratio for 4x samples", ratio,
            checks.check_relative(ratio, 2.0, tol), reference=2.0, provenance="refinement", tolerance=tol,
            seed=ctx.seed)
    swapped = bridgesim.exchangeability_check(potential, t, x, y, max(samples, 10000), ctx.seed, m=m,
                                              executor=ctx.executor)
    floor = ctx.tol("exchangeability_p")
    ctx.add("mc.exchangeability", "karlin-mcgregor-potential", "KS p-value under reversed stream order",
            swapped.p_value, checks.check_at_least(swapped.p_value, floor), reference=floor,
            provenance="cross-method", tolerance=floor, seed=ctx.seed)
    free = bridgesim.feynman_kac_layers(PotentialField.zero(), 2, t, x, y, samples, ctx.seed, m=m,
                                        executor=ctx.executor)
    reference = kernels.km_density(t, x, y)
    tol = ctx.tol("exact_identity")
    ctx.add("kmg.free", "karlin-mcgregor-potential", "tilde-Z_2 with zero potential", free.value,
            checks.check_relative(free.value, reference, tol), reference=reference, tolerance=tol, seed=ctx.seed)

    signed = bridgesim.signed_sum_estimate(potential, t, x, y, max(samples // 10, 2), ctx.seed, m=m,
                                           executor=ctx.executor)
    det = float(shelattice.km_determinant(pair, x, y).det)
    ctx.add("kmg.signed-sum", "karlin-mcgregor-potential", "signed sum without local time",
            signed.without_local_time.value, True, error=signed.without_local_time.stderr, reference=det,
            provenance="diagnostic", diagnostic=True, seed=ctx.seed)
    ctx.add("kmg.signed-sum-local-time", "karlin-mcgregor-potential", "signed sum with local time",
            signed.with_local_time.value, True, error=signed.with_local_time.stderr, reference=det,
            provenance="diagnostic", diagnostic=True, seed=ctx.seed)

    surface = pdesolve.solve_smooth(potential, grid.pencil(0.0, 2), retain=1, executor=ctx.executor)
    stack = pdesolve.build_layers(surface, 0.0, 2)
    j = int(np.argmin(np.abs(stack.y)))
    for n in (1, 2):
        reference = float(stack.z_layers[n - 1][j])
        estimate = bridgesim.feynman_kac_layers(potential, n, t, 0.0, 0.0, samples, ctx.seed,
                                                delta=float(mc["delta"]), m=m, executor=ctx.executor)
        ctx.add(f"confluent.n{n}", "confluent-wronskian", f"Z_{n}(t,0,0) by Feynman-Kac", estimate.value,
                checks.check_within_sigma(estimate.value, reference, estimate.stderr, n_sigma),
                error=estimate.stderr, reference=reference, provenance="cross-method", tolerance=n_sigma,
                seed=ctx.seed)
        ctx.add(f"confluent.extrapolation.n{n}", "confluent-wronskian", "delta extrapolation error",
                estimate.extrapolation_error, True, provenance="diagnostic", diagnostic=True, seed=ctx.seed)
        zero = bridgesim.feynman_kac_layers(PotentialField.zero(), n, t, 0.0, 0.0, samples, ctx.seed,
                                            delta=float(mc["delta"]), m=m, executor=ctx.executor)
        reference = float(kernels.heat_kernel(t, 0.0, 0.0)) ** n
        ctx.add(f"confluent.free.n{n}", "confluent-wronskian", f"Z_{n} with zero potential", zero.value,
                checks.check_relative(zero.value, reference, tol), reference=reference, tolerance=tol,
                seed=ctx.seed)

    rayleigh = bridgesim.rayleigh_check(2000, samples, ctx.seed, bandwidth=0.02, executor=ctx.executor)
    ks = ctx.tol("rayleigh_ks")
    ctx.add("rayleigh.ks", "local-time-rayleigh", "KS distance of sqrt(2) L to Rayleigh", rayleigh.ks_distance,
            checks.check_at_most(rayleigh.ks_distance, ks), reference=0.0, tolerance=ks, seed=ctx.seed)
    mean_ref = math.sqrt(math.pi / 2.0)
    ctx.add("rayleigh.mean", "local-time-rayleigh", "mean of sqrt(2) L", rayleigh.mean, True,
            reference=mean_ref, provenance="diagnostic", diagnostic=True, seed=ctx.seed)

    tol = ctx.tol("second_moment")
    for time_ in (0.25, 1.0):
        lattice = shelattice.lattice_second_moment(_lattice_grid(ctx.config, t_final=time_), 0.0, 0.0, order=1)
        report = bridgesim.second_moment_check(time_, 0.0, 0.0, samples, ctx.seed,
                                               lattice=(lattice.extrapolated, abs(lattice.fine - lattice.extrapolated)),
                                               executor=ctx.executor)
        label = f"t{time_:g}"
        ctx.add(f"second-moment.{label}.cross", "second-moment", "bridge E[e^L] against lattice E[Z^2]/p^2",
                report.extrapolated, report.relative_gap <= tol, error=report.extrapolated_stderr,
                reference=lattice.extrapolated, provenance="cross-method", tolerance=tol, seed=ctx.seed)
        ctx.add(f"second-moment.{label}.bridge", "second-moment", "bridge E[e^L] against closed form",
                report.extrapolated, checks.check_relative(report.extrapolated, report.closed_form, tol),
                error=report.extrapolated_stderr, reference=report.closed_form, tolerance=tol, seed=ctx.seed)
        ctx.add(f"second-moment.{label}.lattice", "second-moment", "lattice E[Z^2]/p^2 against closed form",
                lattice.extrapolated, checks.check_relative(lattice.extrapolated, report.closed_form, tol),
                error=abs(lattice.fine - lattice.extrapolated), reference=report.closed_form,
                provenance="refinement", tolerance=tol)
        ctx.add(f"second-moment.{label}.bandwidth", "second-moment", "bandwidth shift in standard errors",
                report.bandwidth_shift, True, provenance="diagnostic", diagnostic=True, seed=ctx.seed)
        ctx.add(f"second-moment.{label}.tail", "second-moment", "largest single weight share",
                report.diagnostics["max_weight_share"], True, provenance="diagnostic", diagnostic=True,
                seed=ctx.seed)

    bound = bridgesim.local_time_bound_check(3, t, max(samples // 10, 2), ctx.seed, executor=ctx.executor)
    ctx.add("local-time.bound.n3", "second-moment", "E exp(pairwise L) for 3 bridges", bound.estimate.value,
            bound.holds, error=bound.estimate.stderr, reference=bound.bound, provenance="diagnostic",
            diagnostic=True, seed=ctx.seed)


### lattice-suite ###

def lattice_suite(ctx):
    """Zero-noise parity, exact-mean identities, flow, ratio identity, S-transform, line ensemble"""
    lat = ctx.config["lattice"]
    seed = ctx.seed
    n_sigma = ctx.tol("mc_sigma")
    grid = _lattice_grid(ctx.config, x_nodes=(0.5, 0.0, -0.5))
    t = grid.t_final

    zero_sol = shelattice.evolve_she(shelattice.NoiseField.zeros(grid), grid)
    smooth = pdesolve.solve_smooth(PotentialField.zero(), grid, retain=1, executor=ctx.executor)
    tol = ctx.tol("lattice_parity")
    worst = max(_trust_error(zero_sol.z[i], smooth.z[i], grid.trust_mask(x)) for i, x in enumerate(grid.x_nodes))
    ctx.add("parity.zero-noise", "kernel-basics", "zero-noise lattice against smooth solver", worst,
            checks.check_at_most(worst, tol), reference=0.0, provenance="cross-method", tolerance=tol)

    noise = shelattice.NoiseField.generate(seed, grid, 0)
    count = noise.xi.size
    mean = float(noise.xi.mean())
    ctx.add("noise.mean", "kernel-basics", "noise sample mean", mean,
            checks.check_within_sigma(mean, 0.0, 1.0 / math.sqrt(count), n_sigma), error=1.0 / math.sqrt(count),
            reference=0.0, tolerance=n_sigma, seed=seed)
    var = float(noise.xi.var())
    ctx.add("noise.variance", "kernel-basics", "noise sample variance", var,
            checks.check_within_sigma(var, 1.0, math.sqrt(2.0 / count), n_sigma), error=math.sqrt(2.0 / count),
            reference=1.0, tolerance=n_sigma, seed=seed)
    again = shelattice.NoiseField.generate(seed, grid, 0)
    diff = float(np.max(np.abs(again.xi - noise.xi)))
    ctx.add("noise.regeneration", "kernel-basics", "max difference of regenerated noise", diff, diff == 0.0,
            reference=0.0, tolerance=0.0, seed=seed)

    x = y = WeylPoint((0.5, -0.5))
    fine = replace(_lattice_grid(ctx.config).refined(), x_nodes=x.coords, init_epsilon=t / 100.0)
    fine_sol = shelattice.evolve_she(shelattice.NoiseField.zeros(fine), fine)
    det = float(shelattice.km_determinant(fine_sol, x, y).det)
    reference = kernels.km_density(t, x, y)
    tol = ctx.tol("km_free_field")
    ctx.add("km.zero-noise", "karlin-mcgregor-potential", "zero-noise det against p*_2", det,
            checks.check_relative(det, reference, tol), reference=reference, tolerance=tol)
    tie = float(shelattice.km_determinant(zero_sol, x, WeylPoint((0.5, 0.5))).det)
    ctx.add("km.coincident", "karlin-mcgregor-potential", "det with coincident end points", tie, tie == 0.0,
            reference=0.0, tolerance=0.0)
    seeded = shelattice.evolve_she(noise, grid)
    rows = [seeded.x_index(v) for v in x.coords]
    cols = [int(np.argmin(np.abs(grid.y - v))) for v in y.coords]
    block = seeded.z[np.ix_(rows, cols)]
    value = float(shelattice.km_determinant(seeded, x, y).det)
    swapped = float(np.linalg.det(block[::-1]))
    error = abs(value + swapped) / abs(value)
    tol = ctx.tol("exact_identity")
    ctx.add("km.antisymmetry", "karlin-mcgregor-potential", "det + row-swapped det", error,
            checks.check_at_most(error, tol), reference=0.0, tolerance=tol, seed=seed)

    ensemble = shelattice.evolve_ensemble(grid, seed, int(lat["realizations"]), executor=ctx.executor)
    probes = [(0.5, 0.5), (0.5, -0.5), (-0.5, 0.0), (0.0, 0.0)]
    idx = [(ensemble.x_index(a), int(np.argmin(np.abs(grid.y - b)))) for a, b in probes]
    r, c = zip(*idx)
    values = ensemble.z[:, r, c]
    means = values.mean(axis=0)
    stderrs = values.std(axis=0, ddof=1) / math.sqrt(values.shape[0])
    references = zero_sol.z[r, c]
    z_scores = np.abs(means - references) / stderrs
    ctx.add("mean.identity", "kernel-basics", "max |mean Z - Z(xi=0)| in standard errors", float(z_scores.max()),
            checks.check_all_within_sigma(means, references, stderrs, n_sigma), reference=0.0,
            provenance="cross-method", tolerance=n_sigma, seed=seed)
    dets = shelattice.km_determinant(ensemble, x, y).det
    det_mean = float(dets.mean())
    det_err = float(dets.std(ddof=1) / math.sqrt(len(dets)))
    det_ref = float(shelattice.km_determinant(zero_sol, x, y).det)
    ctx.add("mean.determinant", "karlin-mcgregor-potential", "mean det[Z] against zero-noise det", det_mean,
            checks.check_within_sigma(det_mean, det_ref, det_err, n_sigma), error=det_err, reference=det_ref,
            provenance="cross-method", tolerance=n_sigma, seed=seed)
    ctx.add("negative-multipliers", "kernel-basics", "fraction of non-positive noise multipliers",
            ensemble.negative_fraction, True, provenance="diagnostic", diagnostic=True, seed=seed)

    shared, independent = shelattice.coupling_variance(grid, seed, int(lat["ratio_realizations"]), 0.5, -0.5, 0.0,
                                                       executor=ctx.executor)
    ctx.add("coupling.variance", "kernel-basics", "Var Z(x1)/Z(x2) shared over independent noise",
            shared / independent, shared < independent, provenance="diagnostic", diagnostic=True, seed=seed)

    _flow_checks(ctx, grid)
    _ratio_checks(ctx)
    _shift_checks(ctx, grid)
    _line_checks(ctx)


def _flow_checks(ctx, grid):
    s = 0.5 * grid.t_final
    tol = ctx.tol("flow")
    report = shelattice.flow_property_check(ctx.seed, grid, s, x_nodes=(0.0,))
    ctx.add("flow.seeded", "flow-property", "relative composition error, smoothed restart", report.max_error,
            checks.check_at_most(report.max_error, tol), reference=0.0, tolerance=tol, seed=ctx.seed)
    free_tol = ctx.tol("flow_free_field")
    ctx.add("flow.seeded.point-mass", "flow-property", "relative composition error, point-mass restart",
            report.max_stencil_error, checks.check_at_most(report.max_stencil_error, free_tol), reference=0.0,
            tolerance=free_tol, seed=ctx.seed)
    free = shelattice.flow_property_check(None, grid, s, x_nodes=(0.0,))
    ctx.add("flow.zero-noise", "flow-property", "relative composition error, zero noise, point-mass restart",
            free.max_stencil_error, checks.check_at_most(free.max_stencil_error, free_tol), reference=0.0,
            tolerance=free_tol)
    refined = shelattice.flow_property_check(ctx.seed, shelattice.flow_refined(grid), s, x_nodes=(0.0,))
    ratio = report.max_error / refined.max_error
    threshold = ctx.tol("flow_refinement")
    ctx.add("flow.refinement", "flow-property", "smoothed-restart error ratio under dy halving", ratio,
            checks.check_at_least(ratio, threshold), error=refined.max_error, reference=report.max_error,
            provenance="refinement", tolerance=threshold, seed=ctx.seed)


def _ratio_checks(ctx):
    count = int(ctx.config["lattice"]["ratio_realizations"])
    coarse = _lattice_grid(ctx.config, t_final=0.5)
    coarse = replace(coarse, x_nodes=(0.0, coarse.dy))
    fine = coarse.refined()
    fine = replace(fine, x_nodes=(0.0, fine.dy))
    y1, y2 = 0.5, -0.5
    reports = [shelattice.ratio_identity_check(shelattice.evolve_ensemble(g, ctx.seed, count, executor=ctx.executor),
                                               0.0, y1, y2) for g in (coarse, fine)]
    ratio = reports[0].median_error / reports[1].median_error
    threshold = ctx.tol("ratio_refinement")
    ctx.add("ratio.refinement", "ratio-identity", "median error ratio under (h, dy) halving", ratio,
            checks.check_at_least(ratio, threshold), error=reports[1].median_error,
            reference=reports[0].median_error, provenance="refinement", tolerance=threshold, seed=ctx.seed)
    tol = ctx.tol("ratio_free_field")
    for label, report in zip(("coarse", "fine"), reports):
        ctx.add(f"ratio.telescoped.{label}", "ratio-identity", "max telescoped relative error",
                report.telescoped_error, checks.check_at_most(report.telescoped_error, tol), reference=0.0,
                tolerance=tol, seed=ctx.seed)
        if report.skipped:
            ctx.add(f"ratio.skipped.{label}", "ratio-identity", "realizations below the positivity floor",
                    report.skipped, True, provenance="diagnostic", diagnostic=True, seed=ctx.seed)

    zero = shelattice.evolve_she(shelattice.NoiseField.zeros(coarse), coarse)
    zero = shelattice.LatticeEnsemble(grid=coarse, seed=0, z=zero.z[None])
    report = shelattice.ratio_identity_check(zero, 0.0, y1, y2)
    ctx.add("ratio.zero-noise", "ratio-identity", "telescoped relative error, zero noise",
            report.telescoped_error, checks.check_at_most(report.telescoped_error, tol), reference=0.0,
            tolerance=tol)
    ctx.add("ratio.zero-noise.confluent", "ratio-identity", "confluent relative error, zero noise",
            report.median_error, True, provenance="diagnostic", diagnostic=True)
    degenerate = shelattice.ratio_identity_check(zero, 0.0, y1, y1)
    value = float(np.max(np.abs(degenerate.lhs)))
    ctx.add("ratio.degenerate", "ratio-identity", "LHS with y1 = y2", value,
            degenerate.degenerate and value == 0.0, reference=0.0, tolerance=0.0)


def _shift_checks(ctx, grid):
    lat = ctx.config["lattice"]
    n_sigma = ctx.tol("mc_sigma")
    shift_grid = replace(grid, x_nodes=(0.5, -0.5))
    probes = [(0.5, 0.5), (0.5, 0.0), (-0.5, -0.5), (-0.5, 0.5)]
    pair = ((0.5, -0.5), (0.5, -0.5))
    report = shelattice.noise_shift_mean(ctx.potential, shift_grid, int(lat["shift_realizations"]), ctx.seed,
                                         probes, pair=pair, wick=True,
                                         wick_realizations=int(lat["realizations"]), executor=ctx.executor)
    ctx.add("shift.mean", "s-transform", "max |shifted mean - smooth| in standard errors",
            float(np.max(report.z_scores())),
            checks.check_all_within_sigma(report.mean, report.reference, report.stderr, n_sigma),
            reference=0.0, provenance="cross-method", tolerance=n_sigma, seed=ctx.seed)
    ctx.add("shift.determinant", "s-transform", "shifted mean of det[Z]", report.det_mean,
            checks.check_within_sigma(report.det_mean, report.det_reference, report.det_stderr, n_sigma),
            error=report.det_stderr, reference=report.det_reference, provenance="cross-method",
            tolerance=n_sigma, seed=ctx.seed)
    wick_z = np.abs(report.wick_mean - report.reference) / report.wick_stderr
    ctx.add("shift.wick", "s-transform", "max |Wick-reweighted mean - smooth| in standard errors",
            float(np.max(wick_z)), bool(np.all(wick_z <= n_sigma)), provenance="diagnostic", diagnostic=True,
            seed=ctx.seed)


def _line_checks(ctx):
    count = int(ctx.config["lattice"]["line_realizations"])
    n = min(ctx.n_max, 3)
    base = _lattice_grid(ctx.config)
    coarse = replace(base, x_nodes=tuple(k * base.dy for k in range(n)))
    fine = base.refined()
    fine = replace(fine, x_nodes=tuple(k * fine.dy for k in range(n)))

    zero = shelattice.evolve_she(shelattice.NoiseField.zeros(coarse), coarse)
    zero = shelattice.LatticeEnsemble(grid=coarse, seed=0, z=zero.z[None])
    report = shelattice.line_ensemble_diagnostics(zero, 0.0, n)
    tol = ctx.tol("positivity_fraction")
    value = float(report.min_fraction.min())
    ctx.add("line.zero-noise", "line-ensemble", "min positive fraction of U_n, zero noise", value,
            checks.check_at_least(value, tol), reference=1.0, tolerance=tol)

    means = []
    for label, g in (("coarse", coarse), ("fine", fine)):
        ensemble = shelattice.evolve_ensemble(g, ctx.seed, count, executor=ctx.executor)
        report = shelattice.line_ensemble_diagnostics(ensemble, 0.0, n)
        means.append(report.mean_fraction)
        for k in range(n):
            ctx.add(f"line.{label}.n{k + 1}", "line-ensemble", f"mean positive fraction of U_{k + 1}",
                    report.mean_fraction[k], True, error=float(report.min_fraction[k]),
                    provenance="diagnostic", diagnostic=True, seed=ctx.seed)
    trend = float(np.min(means[1] - means[0]))
    ctx.add("line.trend", "line-ensemble", "min change of positive fraction under refinement", trend, True,
            provenance="diagnostic", diagnostic=True, seed=ctx.seed)


### polymer-suite ###

def polymer_suite(ctx):
    """Closed forms, LGV against brute force, convergence, positivity and monotonicity"""
    cfg = ctx.config["polymer"]
    N = int(cfg["levels"])
    m = int(cfg["steps"])
    t = float(cfg["t_final"])
    tol = ctx.tol("polymer_closed_form")

    table = polymer.hierarchy_table(polymer.DisorderPath.zero(3, m, 1.0), ctx.executor)
    value = table.entry(1, 3)
    ctx.add("closed.z13", "lgv-polymer", "Z_{1,3}(1) with zero disorder", value,
            checks.check_relative(value, 0.5, tol), reference=0.5, tolerance=tol)
    value = polymer.multilayer_partition(table, 3)
    ctx.add("closed.top", "lgv-polymer", "Z_N^N with zero disorder", value,
            checks.check_relative(value, 1.0, tol), reference=1.0, tolerance=tol)
    increments = polymer.x_increments(polymer.multilayer_all(table))
    expected = np.array([math.log(0.5), 0.0, math.log(2.0)])
    error = float(np.max(np.abs(increments - expected)))
    ctx.add("closed.increments", "lgv-polymer", "X increments with zero disorder, N=3", error,
            checks.check_at_most(error, tol), reference=0.0, tolerance=tol)
    two = polymer.x_increments(polymer.multilayer_all(polymer.hierarchy_table(polymer.DisorderPath.zero(2, m, 1.0))))
    error = float(np.max(np.abs(two)))
    ctx.add("closed.increments.n2", "lgv-polymer", "X increments with zero disorder, N=2", error,
            checks.check_at_most(error, tol), reference=0.0, tolerance=tol)

    seeds = [ctx.seed + k for k in range(int(cfg["seeds"]))]
    comparisons = polymer.lgv_check(3, 2, m, t, seeds, executor=ctx.executor)
    worst = max(c.relative_error for c in comparisons)
    bf_tol = ctx.tol("polymer_brute_force")
    ctx.add("lgv.brute-force", "lgv-polymer", f"max relative error over {len(seeds)} seeds", worst,
            checks.check_at_most(worst, bf_tol), reference=0.0, provenance="cross-method", tolerance=bf_tol,
            seed=ctx.seed)
    comparisons = polymer.lgv_check(3, 2, m, t, seeds[:3], shift=0.7, executor=ctx.executor)
    worst = max(c.relative_error for c in comparisons)
    ctx.add("lgv.brute-force.shifted", "lgv-polymer", "max relative error with every B_i raised by 0.7", worst,
            checks.check_at_most(worst, bf_tol), reference=0.0, provenance="cross-method", tolerance=bf_tol,
            seed=ctx.seed)

    path = polymer.DisorderPath.sample(2, m, t, ctx.seed)
    direct = polymer.brute_force_partition(path, 1)
    value = polymer.single_path_partition(path, 1, 2)
    ctx.add("lgv.direct-quadrature", "lgv-polymer", "Z_{1,2} recursion against direct quadrature", value,
            checks.check_relative(value, direct, tol), reference=direct, provenance="cross-method", tolerance=tol,
            seed=ctx.seed)

    path = polymer.DisorderPath.sample(3, m, t, ctx.seed)
    levels = [polymer.multilayer_partition(polymer.hierarchy_table(path.refined(f)), 2) for f in (1, 2, 4)]
    finer = polymer.brute_force_partition(path.refined(4), 2)
    ctx.add("lgv.fine-brute-force", "lgv-polymer", "determinant against 4x finer brute force", levels[0],
            checks.check_relative(levels[0], finer, bf_tol), reference=finer, provenance="refinement",
            tolerance=bf_tol, seed=ctx.seed)
    band = ctx.tol("convergence_band")
    ratio = (levels[0] - levels[1]) / (levels[1] - levels[2])
    ctx.add("lgv.convergence", "lgv-polymer", "successive difference ratio m, 2m, 4m", ratio,
            checks.check_band(ratio, band), provenance="refinement", tolerance=band, seed=ctx.seed)

    positive = 0
    count = int(cfg["positivity_seeds"])
    for k in range(count):
        values = polymer.multilayer_all(polymer.hierarchy_table(polymer.DisorderPath.sample(N, m, t, ctx.seed, k)))
        positive += bool(np.all(values > 0))
    fraction = positive / count
    floor = ctx.tol("positivity_fraction")
    ctx.add("positivity", "lgv-polymer", f"share of {count} disorders with every Z_n > 0", fraction,
            checks.check_at_least(fraction, floor), reference=1.0, tolerance=floor, seed=ctx.seed)

    base = polymer.DisorderPath.sample(N, m, t, ctx.seed)
    before = polymer.multilayer_all(polymer.hierarchy_table(base))
    worst = math.inf
    for level in range(1, N + 1):
        after = polymer.multilayer_all(polymer.hierarchy_table(base.ramped(level, 0.5, 0.5 * t, 0.1 * t)))
        worst = min(worst, float(np.min(after / before)))
    ctx.add("monotone-ramp", "lgv-polymer", "min Z_n ratio after raising one environment", worst,
            checks.check_at_least(worst, 1.0 - 1e-12), reference=1.0, tolerance=1e-12, seed=ctx.seed)

    c = 0.3
    shifted = polymer.x_increments(polymer.multilayer_all(polymer.hierarchy_table(base.shifted(c))))
    error = float(np.max(np.abs(shifted - polymer.x_increments(before) - c)))
    ctx.add("shift-covariance", "lgv-polymer", f"max |X_n(B + c) - X_n(B) - c|, c={c}", error,
            checks.check_at_most(error, tol), reference=0.0, tolerance=tol, seed=ctx.seed)


### Dispatch ###

SUITES = {
    "calibrate": calibrate,
    "smooth-suite": smooth_suite,
    "bridges-suite": bridges_suite,
    "lattice-suite": lattice_suite,
    "polymer-suite": polymer_suite,
}


def _crash_row(name, error):
    return ResultRow(
        experiment=name, check_id=f"{name}.crashed", claim=SUITE_CLAIMS[name][0],
        quantity=f"{type(error).__name__}: {error}", value=float("nan"),
        provenance="diagnostic", passed=False,
    )


def run_suite(name, config, executor=None):
    """Rows and ledger entries of one suite, or of every suite in order for 'all'"""
    if name == "all":
        rows, ledger = [], []
        for suite in SUITE_ORDER:
            r, l = run_suite(suite, config, executor)
            rows.extend(r)
            ledger.extend(l)
        return rows, ledger
    if name not in SUITES:
        raise KeyError(f"Unknown suite '{name}'")
    ctx = SuiteContext(config=config, executor=executor, experiment=name)
    logger.info(f"Running {name}...")
    start = time.perf_counter()
    try:
        SUITES[name](ctx)
    except Exception as e:
        logger.exception(f"Suite {name} crashed: {e}")
        ctx.rows.append(_crash_row(name, e))
    for claim in missing_claims(name, ctx.rows):
        logger.error(f"Suite {name} wrote no row for claim '{claim}'")
        ctx.rows.append(ResultRow(
            experiment=name, check_id=f"{name}.coverage.{claim}", claim=claim,
            quantity="rows written for claim", value=0.0, provenance="diagnostic", passed=False,
        ))
    failing = sum(row.failing for row in ctx.rows)
    logger.info(f"{name} finished in {time.perf_counter() - start:.1f} s: {len(ctx.rows)} checks, {failing} failing")
    return ctx.rows, ctx.ledger

import collections
import logging
import math
import struct
import time
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

import kernels
import pdesolve
import streams
from errors import ConfigurationError, DomainError, StepSizeError
from kernels import WeylPoint
from pdesolve import GridSpec, HalfStepDiffusion, PotentialField, initial_condition

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

HEADER = struct.Struct("<Qqqdd")
MAX_NEGATIVE_FRACTION = 1e-3
ENSEMBLE_CHUNK = 25
POSITIVITY_FLOOR = 1e-300


def lattice_grid(**overrides):
    """Default lattice resolution: dy = 0.05, dt/dy = 0.01 at t = 1"""
    params = dict(y_min=-7.0, y_max=7.0, n_y=281, n_t=2000, t_final=1.0, x_nodes=(0.0,))
    params.update(overrides)
    return GridSpec(**params)


### Noise ###

@dataclass
class NoiseField:
    xi: np.ndarray
    seed: int
    dt: float
    dy: float

    @property
    def n_t(self):
        return self.xi.shape[0]

    @property
    def n_y(self):
        return self.xi.shape[1]

    @classmethod
    def generate(cls, seed, grid, index=0):
        """Regenerable realization keyed by (seed, realization index)"""
        rng = streams.stream(seed, "lattice", index)
        return cls(rng.standard_normal((grid.n_t, grid.n_y)), seed, grid.dt, grid.dy)

    @classmethod
    def zeros(cls, grid):
        return cls(np.zeros((grid.n_t, grid.n_y)), 0, grid.dt, grid.dy)

    def segment(self, start, stop):
        return replace(self, xi=self.xi[start:stop])

    def matches(self, grid):
        return (self.n_t == grid.n_t and self.n_y == grid.n_y
                and math.isclose(self.dt, grid.dt) and math.isclose(self.dy, grid.dy))

    def export(self, path):
        """Little-endian header (seed, n_t, n_y, dt, dy) then row-major float64 body"""
        path = Path(path)
        with path.open("wb") as f:
            f.write(HEADER.pack(self.seed & 0xFFFFFFFFFFFFFFFF, self.n_t, self.n_y, self.dt, self.dy))
            f.write(np.ascontiguousarray(self.xi, dtype="<f8").tobytes())
        logger.info(f"Exported noise field {self.n_t}x{self.n_y} to {path}")
        return path

    @classmethod
    def load(cls, path):
        data = Path(path).read_bytes()
        if len(data) < HEADER.size:
            raise ConfigurationError(f"Noise file {path} is truncated")
        seed, n_t, n_y, dt, dy = HEADER.unpack_from(data)
        body = np.frombuffer(data, dtype="<f8", offset=HEADER.size)
        if body.size != n_t * n_y:
            raise ConfigurationError(f"Noise file {path} holds {body.size} values, header says {n_t * n_y}")
        return cls(body.reshape(n_t, n_y).astype(float), int(seed), dt, dy)


### Time stepping ###

def _x_index(grid, x):
    xs = np.asarray(grid.x_nodes)
    i = int(np.argmin(np.abs(xs - x)))
    if abs(xs[i] - x) > 1e-9 * max(1.0, abs(x)):
        raise DomainError(f"x={x} is not a start node")
    return i


def _march(grid, initial, draw, n_real, retain=1, start_step=0, n_steps=None, shift=None, wick=None):
    """Split steps H, (1 + xi sqrt(dt/dy)), H for n_real realizations at once

    initial has shape (n_y, n_x); draw(k) returns the (n_real, n_y) noise rows
    of step k. Returns slices (retain, n_real, n_x, n_y), the count of
    non-positive multipliers and the Wick log-weights.
    """
    n_steps = grid.n_t - start_step if n_steps is None else n_steps
    dt, dy = grid.dt, grid.dy
    half = HalfStepDiffusion(grid.n_y, dy, dt / 2.0)
    c = math.sqrt(dt / dy)
    y = grid.y
    v = np.repeat(initial[:, None, :], n_real, axis=1)
    shape = v.shape
    kept = collections.deque([v], maxlen=retain)
    negative = 0
    log_w = np.zeros(n_real)
    for k in range(start_step, start_step + n_steps):
        xi = draw(k)
        mult = 1.0 + xi.T * c
        s_mid = grid.init_epsilon + (k + 0.5) * dt
        if shift is not None:
            mult = mult + (shift(s_mid, y) * dt)[:, None]
        if wick is not None:
            phi = wick(s_mid, y)
            log_w += math.sqrt(dt * dy) * (xi @ phi) - 0.5 * float(phi @ phi) * dt * dy
        negative += int(np.count_nonzero(mult[1:-1] <= 0))
        v = half(v.reshape(shape[0], -1)).reshape(shape)
        v = v * mult[:, :, None]
        v = half(v.reshape(shape[0], -1)).reshape(shape)
        kept.append(v)
    return np.array(kept).transpose(0, 2, 3, 1), negative, log_w


def _check_negative(negative, n_sites):
    fraction = negative / max(n_sites, 1)
    if fraction > MAX_NEGATIVE_FRACTION:
        raise StepSizeError(f"{fraction:.3%} of noise multipliers are non-positive; reduce dt", fraction=fraction)
    if negative:
        logger.warning(f"{negative} non-positive noise multipliers ({fraction:.2e} of sites)")
    return fraction


@dataclass
class LatticeSolution:
    grid: GridSpec
    slices: np.ndarray
    slice_times: np.ndarray
    seed: int
    negative_fraction: float = 0.0
    interpretation: str = "ito"

    @property
    def z(self):
        return self.slices[-1]

    @property
    def dt(self):
        return self.grid.dt

    @property
    def dy(self):
        return self.grid.dy

    def x_index(self, x):
        return _x_index(self.grid, x)


def evolve_she(noise, grid, x_nodes=None, retain=1, initial=None, start_step=0):
    """Shared-noise lattice solve for every start node (or for the given initial columns)"""
    if x_nodes is not None:
        grid = replace(grid, x_nodes=tuple(x_nodes))
    if initial is None:
        grid.validate()
        initial = initial_condition(PotentialField.zero(), grid, np.asarray(grid.x_nodes))
    n_steps = noise.n_t
    if noise.n_y != grid.n_y or start_step + n_steps > grid.n_t:
        raise ConfigurationError("Noise field does not match the grid")
    if grid.cfl > 1.0:
        logger.debug(f"dt/dy^2 = {grid.cfl:.3g} (implicit diffusion, advisory only)")
    slices, negative, _ = _march(grid, initial, lambda k: noise.xi[k - start_step][None, :], 1,
                                 retain=retain, start_step=start_step, n_steps=n_steps)
    fraction = _check_negative(negative, n_steps * (grid.n_y - 2))
    times = grid.init_epsilon + grid.dt * (start_step + n_steps - np.arange(slices.shape[0] - 1, -1, -1))
    return LatticeSolution(grid=grid, slices=slices[:, 0], slice_times=times, seed=noise.seed,
                           negative_fraction=fraction)


@dataclass
class LatticeEnsemble:
    grid: GridSpec
    seed: int
    z: np.ndarray
    log_weights: np.ndarray = None
    negative_fraction: float = 0.0

    @property
    def realizations(self):
        return self.z.shape[0]

    def x_index(self, x):
        return _x_index(self.grid, x)


def evolve_ensemble(grid, seed, realizations, shift=None, wick=None, first_index=0, executor=None):
    """Final-time Z for realizations keyed (seed, "lattice", index), in fixed chunks"""
    grid.validate()
    initial = initial_condition(PotentialField.zero(), grid, np.asarray(grid.x_nodes))
    indices = list(range(first_index, first_index + realizations))
    chunks = [indices[i:i + ENSEMBLE_CHUNK] for i in range(0, len(indices), ENSEMBLE_CHUNK)]

    def run(chunk):
        gens = [streams.stream(seed, "lattice", i) for i in chunk]
        draw = lambda k: np.stack([g.standard_normal(grid.n_y) for g in gens])
        slices, negative, log_w = _march(grid, initial, draw, len(chunk), shift=shift, wick=wick)
        return slices[-1], negative, log_w

    start = time.perf_counter()
    logger.info(f"Lattice ensemble: {realizations} realizations, n_y={grid.n_y}, n_t={grid.n_t}")
    parts = streams.run_ordered(run, chunks, executor)
    z = np.concatenate([p[0] for p in parts])
    negative = sum(p[1] for p in parts)
    fraction = _check_negative(negative, realizations * grid.n_t * (grid.n_y - 2))
    log_w = np.concatenate([p[2] for p in parts]) if wick is not None else None
    logger.info(f"Lattice ensemble done in {time.perf_counter() - start:.1f} s")
    return LatticeEnsemble(grid=grid, seed=seed, z=z, log_weights=log_w, negative_fraction=fraction)


### Determinants ###

def _y_index(grid, y):
    i = int(np.argmin(np.abs(grid.y - y)))
    if abs(grid.y[i] - y) > 1e-9 * max(1.0, abs(y)):
        raise DomainError(f"y={y} is not a grid node")
    return i


@dataclass
class KMDeterminant:
    det: np.ndarray
    hat: np.ndarray


def km_determinant(sol, x, y):
    """det[Z(t, x_i, y_j)] over the shared-noise solution, and det / (D(x) D(y))

    Works for a LatticeSolution or, realization by realization, a LatticeEnsemble.
    """
    x = x if isinstance(x, WeylPoint) else WeylPoint(tuple(np.atleast_1d(x)))
    y = y if isinstance(y, WeylPoint) else WeylPoint(tuple(np.atleast_1d(y)))
    if x.n != y.n:
        raise DomainError(f"Need as many start as end points, got {x.n} and {y.n}")
    rows = [_x_index(sol.grid, v) for v in x.coords]
    cols = [_y_index(sol.grid, v) for v in y.coords]
    z = np.asarray(sol.z)
    block = z[..., rows, :][..., cols]
    if not (x.is_interior() and y.is_interior()):
        zero = np.zeros(block.shape[:-2])
        return KMDeterminant(det=zero, hat=np.full_like(zero, np.nan))
    det = np.linalg.det(block)
    return KMDeterminant(det=det, hat=det / (kernels.vandermonde(x) * kernels.vandermonde(y)))


### Identity checks ###

@dataclass
class RatioReport:
    lhs: np.ndarray
    rhs_confluent: np.ndarray
    rhs_telescoped: np.ndarray
    skipped: int
    degenerate: bool = False

    @property
    def confluent_errors(self):
        return np.abs(self.lhs - self.rhs_confluent) / np.abs(self.lhs)

    @property
    def median_error(self):
        return float(np.median(self.confluent_errors)) if self.lhs.size else float("nan")

    @property
    def telescoped_error(self):
        if not self.lhs.size:
            return 0.0
        return float(np.max(np.abs(self.lhs - self.rhs_telescoped) / np.abs(self.lhs)))


def ratio_identity_check(ensemble, x, y1, y2):
    """Confluent n = 2 ratio identity per realization, start points (x + h, x)

    LHS = hatZ_2(x^, (y1, y2)) / (Z(x, y1) Z(x, y2)). The confluent RHS uses
    adjacent-node differences with Z(x, z)^2 in the denominator; the telescoped
    RHS uses Z(x, z + dy) Z(x, z) and agrees with the LHS to roundoff.
    """
    grid = ensemble.grid
    ix = ensemble.x_index(x)
    if ix + 1 >= len(grid.x_nodes):
        raise DomainError("Need the start node x + h")
    h = grid.x_nodes[ix + 1] - grid.x_nodes[ix]
    j1, j2 = _y_index(grid, y1), _y_index(grid, y2)
    if j1 < j2:
        raise DomainError("Need y1 >= y2")
    z = np.asarray(ensemble.z)
    upper, lower = z[:, ix + 1, :], z[:, ix, :]
    if j1 == j2:
        lhs = (upper[:, j1] / lower[:, j1] - upper[:, j1] / lower[:, j1]) / h
        return RatioReport(lhs=lhs, rhs_confluent=lhs.copy(), rhs_telescoped=lhs.copy(), skipped=0, degenerate=True)
    dy = grid.dy
    window = slice(j2, j1 + 1)
    good = np.all(upper[:, window] > POSITIVITY_FLOOR, axis=1) & np.all(lower[:, window] > POSITIVITY_FLOOR, axis=1)
    skipped = int(np.count_nonzero(~good))
    if skipped:
        logger.warning(f"Skipped {skipped} realizations below the positivity floor")
    upper, lower = upper[good], lower[good]
    width = grid.y[j1] - grid.y[j2]
    det = upper[:, j1] * lower[:, j2] - upper[:, j2] * lower[:, j1]
    lhs = det / (h * width) / (lower[:, j1] * lower[:, j2])
    za, zb = slice(j2 + 1, j1 + 1), slice(j2, j1)
    hat = (upper[:, za] * lower[:, zb] - upper[:, zb] * lower[:, za]) / (h * dy)
    rhs_confluent = np.sum(dy * hat / lower[:, zb] ** 2, axis=1) / width
    rhs_telescoped = np.sum(dy * hat / (lower[:, za] * lower[:, zb]), axis=1) / width
    return RatioReport(lhs=lhs, rhs_confluent=rhs_confluent, rhs_telescoped=rhs_telescoped, skipped=skipped)


@dataclass
class FlowReport:
    s: float
    errors: np.ndarray
    split_step: int
    stencil_errors: np.ndarray = None

    @property
    def max_error(self):
        return float(np.max(self.errors))

    @property
    def max_stencil_error(self):
        return float(np.max(self.stencil_errors))


def flow_refined(grid):
    """Halve dy and dt with init_epsilon scaled by 1/4, so init_epsilon/dy^2 stays fixed"""
    return replace(grid.refined(), init_epsilon=grid.init_epsilon / 4.0)


def _relative_errors(grid, composed, full):
    errors = []
    for i, x in enumerate(grid.x_nodes):
        mask = grid.trust_mask(x)
        errors.append(np.max(np.abs(composed[i, mask] - full[i, mask]) / np.abs(full[i, mask])))
    return np.array(errors)


def flow_property_check(seed, grid, s, x_nodes=None, index=0):
    """Z(s+t, x, .) against sum_z dy Z(s, x, z) Z'(t, z, .) with Z' on the later noise segment

    Z' restarts at every interior node from the smoothed point mass of
    variance init_epsilon that starts Z itself, rescaled to unit lattice mass.
    The restart from the bare point mass 1/dy composes exactly and is reported
    as stencil_errors. seed=None uses the zero field.
    """
    if x_nodes is not None:
        grid = replace(grid, x_nodes=tuple(x_nodes))
    noise = NoiseField.zeros(grid) if seed is None else NoiseField.generate(seed, grid, index)
    split = int(round((s - grid.init_epsilon) / grid.dt))
    if split <= 0 or split >= grid.n_t:
        raise ConfigurationError(f"Split time {s} outside (init_epsilon, t_final)")
    full = evolve_she(noise, grid)
    first = evolve_she(noise.segment(0, split), grid)
    n = grid.n_y
    smoothed = initial_condition(PotentialField.zero(), grid, grid.y)
    smoothed[:, [0, -1]] = 0.0
    interior = np.arange(1, n - 1)
    smoothed[:, interior] /= grid.dy * smoothed[:, interior].sum(axis=0)
    masses = np.zeros((n, n))
    masses[interior, interior] = 1.0 / grid.dy
    second = evolve_she(noise.segment(split, grid.n_t), grid, initial=np.hstack([smoothed, masses]),
                        start_step=split)
    restarted, stencil = second.z[:n], second.z[n:]
    report = FlowReport(
        s=grid.init_epsilon + split * grid.dt,
        errors=_relative_errors(grid, grid.dy * first.z @ restarted, full.z),
        split_step=split,
        stencil_errors=_relative_errors(grid, grid.dy * first.z @ stencil, full.z),
    )
    logger.info(f"Flow property at s={report.s:.4g}: max relative error {report.max_error:.3g} "
                f"(point-mass restart {report.max_stencil_error:.3g})")
    return report


@dataclass
class ShiftReport:
    mean: np.ndarray
    stderr: np.ndarray
    reference: np.ndarray
    wick_mean: np.ndarray = None
    wick_stderr: np.ndarray = None
    det_mean: float = float("nan")
    det_stderr: float = float("nan")
    det_reference: float = float("nan")

    def z_scores(self):
        return np.abs(self.mean - self.reference) / self.stderr


def _mean_and_error(values):
    return values.mean(axis=0), values.std(axis=0, ddof=1) / math.sqrt(values.shape[0])


def noise_shift_mean(potential, grid, realizations, seed, probes, pair=None, wick=True, wick_realizations=None,
                     executor=None):
    """Ensemble mean of Z under the shifted multiplier 1 + (xi + phi sqrt(dt dy)) sqrt(dt/dy)

    probes is a list of (x, y) nodes; pair an optional ((x1, x2), (y1, y2)) for
    the 2x2 determinant. The reference is the smooth solver on the same grid.
    The Wick-reweighted estimate runs on its own unshifted realizations.
    """
    shifted = evolve_ensemble(grid, seed, realizations, shift=potential, executor=executor)
    surface = pdesolve.solve_smooth(potential, grid, retain=1, executor=executor)
    idx = [(shifted.x_index(x), _y_index(grid, y)) for x, y in probes]
    rows, cols = zip(*idx)
    values = shifted.z[:, rows, cols]
    mean, stderr = _mean_and_error(values)
    report = ShiftReport(mean=mean, stderr=stderr, reference=surface.z[rows, cols])
    if wick:
        count = realizations if wick_realizations is None else wick_realizations
        plain = evolve_ensemble(grid, seed, count, wick=potential, first_index=realizations, executor=executor)
        weighted = plain.z[:, rows, cols] * np.exp(plain.log_weights)[:, None]
        report.wick_mean, report.wick_stderr = _mean_and_error(weighted)
    if pair is not None:
        xs, ys = pair
        dets = km_determinant(shifted, xs, ys).det
        report.det_mean, report.det_stderr = (float(v) for v in _mean_and_error(dets))
        report.det_reference = float(km_determinant(surface, xs, ys).det)
    return report


@dataclass
class LineEnsembleReport:
    fractions: np.ndarray
    mean_fraction: np.ndarray
    min_fraction: np.ndarray


def confluent_hat(z, grid, ix, n):
    """hatZ_n at x^ = (x + (n-1)h, ..., x) and y^ = (y + (n-1)dy, ..., y) for every base y node

    z has shape (..., n_x, n_y); returns (..., n_y - n + 1).
    """
    if n == 1:
        return z[..., ix, :]
    xs = np.asarray(grid.x_nodes)
    if ix + n - 1 >= len(xs):
        raise DomainError(f"Need {n - 1} start nodes above x")
    rows = list(range(ix + n - 1, ix - 1, -1))
    m = grid.n_y - n + 1
    block = np.stack([np.stack([z[..., r, n - 1 - c: n - 1 - c + m] for c in range(n)], axis=-1)
                      for r in rows], axis=-2)
    dx_nodes = kernels.vandermonde(xs[rows])
    dy_nodes = kernels.vandermonde(grid.y[n - 1::-1])
    return np.linalg.det(block) / (dx_nodes * dy_nodes)


def line_ensemble_diagnostics(ensemble, x, n_max=3):
    """Positivity of U_n = hatZ_n / hatZ_{n-1} over the trust region, per realization"""
    if n_max > 3:
        raise DomainError(f"Line ensemble diagnostics cover n <= 3, got {n_max}")
    grid = ensemble.grid
    ix = ensemble.x_index(x)
    m = grid.n_y - n_max + 1
    mask = grid.trust_mask(x)[:m]
    hats = [confluent_hat(ensemble.z, grid, ix, n)[..., :m] for n in range(1, n_max + 1)]
    fractions = []
    for n in range(1, n_max + 1):
        u = hats[n - 1] if n == 1 else hats[n - 1] / hats[n - 2]
        fractions.append(np.mean(u[..., mask] > 0, axis=-1))
    fractions = np.array(fractions)
    return LineEnsembleReport(fractions=fractions, mean_fraction=fractions.mean(axis=1),
                              min_fraction=fractions.min(axis=1))


### Second moment ###

@dataclass
class MomentReport:
    ratio: float
    coarse: float
    fine: float
    extrapolated: float


def _second_moment_ratio(grid, x, y):
    half = HalfStepDiffusion(grid.n_y, grid.dy, grid.dt / 2.0)
    v = initial_condition(PotentialField.zero(), grid, np.array([float(x)]))[:, 0]
    m = np.outer(v, v)
    boost = 1.0 + grid.dt / grid.dy
    diagonal = np.arange(1, grid.n_y - 1)

    def sandwich(a):
        return half(half(a).T)

    for _ in range(grid.n_t):
        v = half(half(v[:, None]))[:, 0]
        m = sandwich(m)
        m[diagonal, diagonal] *= boost
        m = sandwich(m)
    j = _y_index(grid, y)
    return float(m[j, j] / v[j] ** 2)


def lattice_second_moment(grid, x=0.0, y=0.0, order=1.0):
    """Exact lattice E[Z(t,x,y)^2] / E[Z(t,x,y)]^2 at dy and dy/2, extrapolated in dy

    M <- H M H, M_jj <- M_jj (1 + dt/dy), M <- H M H per step.
    """
    coarse = _second_moment_ratio(grid, x, y)
    fine = _second_moment_ratio(grid.refined(), x, y)
    factor = 2.0 ** order
    extrapolated = (factor * fine - coarse) / (factor - 1.0)
    logger.info(f"Lattice second moment: {coarse:.5f} (dy), {fine:.5f} (dy/2), extrapolated {extrapolated:.5f}")
    return MomentReport(ratio=fine, coarse=coarse, fine=fine, extrapolated=extrapolated)


def coupling_variance(grid, seed, realizations, x1, x2, y, executor=None):
    """Variance of Z(x1, y)/Z(x2, y) with shared noise and with independent noise"""
    shared = evolve_ensemble(replace(grid, x_nodes=(x1, x2)), seed, realizations, executor=executor)
    j = _y_index(grid, y)
    ratio_shared = shared.z[:, 0, j] / shared.z[:, 1, j]
    other = evolve_ensemble(replace(grid, x_nodes=(x2,)), seed, realizations, first_index=realizations,
                            executor=executor)
    ratio_independent = shared.z[:, 0, j] / other.z[:, 0, j]
    return float(np.var(ratio_shared, ddof=1)), float(np.var(ratio_independent, ddof=1))

import functools
import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson
from scipy.interpolate import CubicSpline

import streams
from errors import ContractViolation, DomainError, SingularityError
from kernels import WeylPoint, gt_sign, orientation_sign

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

T_FLOOR = 1e-12
GT_BUDGET = 2 ** 22


### Derivative tables ###

@dataclass
class DerivativeTable:
    """Mixed partials d_x^i d_y^j g at one base point; step 0 means exact"""
    values: np.ndarray
    step: float = 0.0

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise DomainError(f"Derivative table must be square, got shape {self.values.shape}")
        if self.values.shape[0] < 1:
            raise DomainError("Derivative table must hold at least g itself")

    @property
    def m(self):
        return self.values.shape[0]

    @property
    def g(self):
        return self.values[0, 0]


@functools.lru_cache(maxsize=None)
def fd_stencil(order):
    """Second-order central stencil (offsets, weights) for the given derivative order"""
    if order == 0:
        return np.array([0]), np.array([1.0])
    radius = (order + 1) // 2
    offsets = np.arange(-radius, radius + 1)
    powers = np.vander(offsets, increasing=True).T.astype(float)
    rhs = np.zeros(len(offsets))
    rhs[order] = math.factorial(order)
    return offsets, np.linalg.solve(powers, rhs)


def stencil_radius(m):
    return max(len(fd_stencil(k)[0]) // 2 for k in range(m))


def _derivative_along(samples, order, h, axis, margin):
    """Central difference of samples along axis, trimmed by margin on both ends"""
    offsets, weights = fd_stencil(order)
    n = samples.shape[axis]
    out = 0.0
    for off, w in zip(offsets, weights):
        sl = [slice(None)] * samples.ndim
        sl[axis] = slice(margin + off, n - margin + off)
        out = out + w * samples[tuple(sl)]
    return out / h ** order


def derivative_grid(samples, hx, hy, m):
    """Derivative tables at every node at least one stencil radius from the edge

    samples has shape (nx, ny); returns values of shape (nx-2r, ny-2r, m, m)
    together with the margin r.
    """
    samples = np.asarray(samples, dtype=float)
    r = stencil_radius(m)
    nx, ny = samples.shape
    if nx <= 2 * r or ny <= 2 * r:
        raise DomainError(f"Grid {samples.shape} too small for {m}x{m} derivative tables")
    out = np.empty((nx - 2 * r, ny - 2 * r, m, m))
    for i in range(m):
        dx = _derivative_along(samples, i, hx, 0, r)
        for j in range(m):
            out[:, :, i, j] = _derivative_along(dx, j, hy, 1, r)
    return out, r


def table_from_grid(samples, ix, iy, hx, hy, m):
    """DerivativeTable at node (ix, iy) of a sampled surface"""
    samples = np.asarray(samples, dtype=float)
    r = stencil_radius(m)
    if ix - r < 0 or iy - r < 0 or ix + r >= samples.shape[0] or iy + r >= samples.shape[1]:
        raise DomainError(f"Node ({ix}, {iy}) too close to the edge for order {m - 1}")
    patch = samples[ix - r: ix + r + 1, iy - r: iy + r + 1]
    values, _ = derivative_grid(patch, hx, hy, m)
    return DerivativeTable(values[0, 0], step=max(hx, hy))


def _stencil_weight(order, offset):
    offsets, weights = fd_stencil(order)
    radius = len(offsets) // 2
    if abs(offset) > radius:
        return 0.0
    return weights[offset + radius]


def normalized_blocks(log_samples, hx, hy, m):
    """Mixed partials of K(x',y') = g(x',y')g(x,y)/(g(x',y)g(x,y')) at every node

    K has no pure derivatives at the base node, so W_n(g) = g^n det of the
    leading (n-1)x(n-1) block of [d_x^i d_y^j K]_{i,j>=1}. The blocks stay
    well conditioned in the tails where the plain table cancels badly.
    Returns blocks of shape (nx-2r, ny-2r, m-1, m-1) and the margin r.
    """
    L = np.asarray(log_samples, dtype=float)
    r = stencil_radius(m)
    nx, ny = L.shape
    if nx <= 2 * r or ny <= 2 * r:
        raise DomainError(f"Grid {L.shape} too small for order {m - 1} blocks")
    base = L[r:nx - r, r:ny - r]
    out = np.zeros((nx - 2 * r, ny - 2 * r, max(m - 1, 0), max(m - 1, 0)))
    for a in range(-r, r + 1):
        along_x = L[r + a:nx - r + a, r:ny - r]
        for b in range(-r, r + 1):
            along_y = L[r:nx - r, r + b:ny - r + b]
            k = np.exp(L[r + a:nx - r + a, r + b:ny - r + b] - along_x - along_y + base)
            for i in range(1, m):
                wa = _stencil_weight(i, a)
                if wa == 0.0:
                    continue
                for j in range(1, m):
                    wb = _stencil_weight(j, b)
                    if wb != 0.0:
                        out[:, :, i - 1, j - 1] += wa * wb * k
    for i in range(1, m):
        for j in range(1, m):
            out[:, :, i - 1, j - 1] /= hx ** i * hy ** j
    return out, r


def surface_wronskians(log_samples, hx, hy, m):
    """(signs, logs) of W_1..W_m at every interior node of a sampled log-surface"""
    L = np.asarray(log_samples, dtype=float)
    blocks, r = normalized_blocks(L, hx, hy, m)
    base = L[r:L.shape[0] - r, r:L.shape[1] - r]
    signs = [np.where(np.isfinite(base), 1.0, 0.0)]
    logs = [base.copy()]
    for n in range(2, m + 1):
        s, lw = np.linalg.slogdet(blocks[..., :n - 1, :n - 1])
        signs.append(s)
        logs.append(n * base + lw)
    return np.array(signs), np.array(logs), r


def _values(tables):
    if isinstance(tables, DerivativeTable):
        return tables.values
    if isinstance(tables, (list, tuple)) and tables and isinstance(tables[0], DerivativeTable):
        return np.stack([tb.values for tb in tables])
    return np.asarray(tables, dtype=float)


### Wronskians and Darboux chains ###

def log_wronskians(tables, n_max=None):
    """(signs, logs) of W_1..W_n over a batch of tables, shape (n, ...)"""
    values = _values(tables)
    m = values.shape[-1]
    n_max = m if n_max is None else n_max
    if n_max > m:
        raise DomainError(f"Order {n_max} exceeds table size {m}")
    signs = []
    logs = []
    for k in range(1, n_max + 1):
        s, lw = np.linalg.slogdet(values[..., :k, :k])
        signs.append(s)
        logs.append(lw)
    return np.array(signs), np.array(logs)


def wronskian(table, n):
    """Determinant of the leading n x n block of a derivative table"""
    values = _values(table)
    if n < 1 or n > values.shape[-1]:
        raise DomainError(f"Order {n} outside 1..{values.shape[-1]}")
    if n == 1:
        return values[..., 0, 0]
    return np.linalg.det(values[..., :n, :n])


@dataclass
class DarbouxChain:
    w: np.ndarray
    t_fields: np.ndarray
    residual: np.ndarray = field(default=None)

    def reconstruct(self):
        """W_{n+1} = T_n W_n^2 / W_{n-1}, starting from W_0 = 1 and W_1"""
        w = [self.w[0], self.w[1]]
        for n in range(1, len(self.t_fields) + 1):
            w.append(self.t_fields[n - 1] * w[n] ** 2 / w[n - 1])
        return np.array(w)


def darboux_chain(tables, hx=None, hy=None):
    """W_0..W_m and T_1..T_{m-1} over a table or a grid of tables

    For a 2-D grid of tables (shape (nx, ny, m, m)) with steps hx, hy the
    residual |T_n - d_xy log W_n| is evaluated by central differences on
    interior nodes and its maximum returned per n.
    """
    values = _values(tables)
    signs, logs = log_wronskians(values)
    bad = np.argwhere(signs <= 0)
    if bad.size:
        layer = int(bad[0][0]) + 1
        node = tuple(int(i) for i in bad[0][1:])
        raise SingularityError(f"W_{layer} vanishes or changes sign at node {node}", layer=layer, node=node)
    logs = np.concatenate([np.zeros((1,) + logs.shape[1:]), logs])
    m = values.shape[-1]
    t_logs = np.array([logs[n - 1] + logs[n + 1] - 2.0 * logs[n] for n in range(1, m)])
    chain = DarbouxChain(w=np.exp(logs), t_fields=np.exp(t_logs))
    if hx is not None and hy is not None and values.ndim == 4:
        residual = []
        for n in range(1, m):
            mixed = np.gradient(np.gradient(logs[n], hx, axis=0), hy, axis=1)
            diff = np.abs(chain.t_fields[n - 1] - mixed)[1:-1, 1:-1]
            residual.append(diff.max() if diff.size else np.nan)
        chain.residual = np.array(residual)
    return chain


def divided_difference_chain(dx_samples, t_fields, dy):
    """d_y(d_y(...d_y(d_x^n g/g)/T_1)...)/T_{n-1} on a y-grid

    dx_samples[k] holds d_x^k g over the grid, k = 0..n; t_fields[k-1] holds T_k.
    Returns (field, error) where error compares step dy against 2*dy on the
    shared nodes (Richardson estimate for a second-order chain).
    """
    dx_samples = np.asarray(dx_samples, dtype=float)
    t_fields = np.asarray(t_fields, dtype=float).reshape(-1, dx_samples.shape[1])
    n = dx_samples.shape[0] - 1
    if n < 1:
        raise DomainError("Need at least the first x-derivative")

    def chain(samples, tf, h):
        q = samples[n] / samples[0]
        for k in range(n - 1):
            tk = tf[k]
            if np.any(np.abs(tk) < T_FLOOR):
                raise SingularityError(f"T_{k + 1} below {T_FLOOR}", layer=k + 1,
                                       node=int(np.argmin(np.abs(tk))))
            q = np.gradient(q, h) / tk
        return np.gradient(q, h)

    result = chain(dx_samples, t_fields, dy)
    coarse = chain(dx_samples[:, ::2], t_fields[:, ::2], 2.0 * dy)
    margin = n + 1
    fine = result[::2]
    diff = np.abs(fine - coarse)[margin:-margin] / 3.0 if len(fine) > 2 * margin else np.abs(fine - coarse)
    error = float(diff.max()) if diff.size else 0.0
    return result, error


### Interlacing integral ###

def _check_decreasing(y):
    y = y if isinstance(y, WeylPoint) else WeylPoint(tuple(np.atleast_1d(y)))
    if not y.is_interior():
        raise DomainError(f"Points must be strictly decreasing, got {y.coords}")
    return y.array


def sample_at(grid, values, points):
    """Values at points, exact on grid nodes and cubic-spline otherwise"""
    grid = np.asarray(grid, dtype=float)
    values = np.asarray(values, dtype=float)
    idx = np.searchsorted(grid, points)
    out = np.empty(len(points))
    spline = None
    for k, (i, p) in enumerate(zip(idx, points)):
        if i < len(grid) and np.isclose(grid[i], p, rtol=0, atol=1e-12):
            out[k] = values[i]
        elif i > 0 and np.isclose(grid[i - 1], p, rtol=0, atol=1e-12):
            out[k] = values[i - 1]
        else:
            if spline is None:
                spline = CubicSpline(grid, values)
            out[k] = spline(p)
    return out


@dataclass
class InterlaceResult:
    integral: float
    determinant: float
    orientation_sign: int
    residual: float
    quadrature: float = float("nan")

    @property
    def holds(self):
        return self.residual <= 1e-10 * max(1.0, abs(self.integral))


def interlace_integral(samples, grid, y):
    """Integral over z interlacing y of det[f'_{i+1}(z_j)]

    samples[i] holds f_{i+1} over grid, with f_1 = 1. The integral is reduced
    by Cauchy-Binet to det[f_{i+1}(y_j) - f_{i+1}(y_{j+1})]; an independent
    Simpson quadrature of gradient samples is reported alongside.
    """
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    grid = np.asarray(grid, dtype=float)
    y = _check_decreasing(y)
    n = len(y)
    if samples.shape[0] < n:
        raise DomainError(f"Need {n} functions, got {samples.shape[0]}")
    if grid[0] > y[-1] or grid[-1] < y[0]:
        raise DomainError(f"Grid [{grid[0]}, {grid[-1]}] does not cover [{y[-1]}, {y[0]}]")
    if np.max(np.abs(samples[0] - 1.0)) > 1e-12:
        raise ContractViolation("First function must be identically 1")

    at_y = np.array([sample_at(grid, samples[i], y) for i in range(n)])
    determinant = float(np.linalg.det(at_y)) if n > 1 else float(at_y[0, 0])
    if n == 1:
        return InterlaceResult(1.0, determinant, 1, abs(1.0 - determinant), 1.0)
    differences = at_y[1:, :-1] - at_y[1:, 1:]
    integral = float(np.linalg.det(differences))

    quad = np.empty((n - 1, n - 1))
    for i in range(1, n):
        derivative = np.gradient(samples[i], grid)
        for j in range(n - 1):
            mask = (grid >= y[j + 1] - 1e-12) & (grid <= y[j] + 1e-12)
            quad[i - 1, j] = simpson(derivative[mask], x=grid[mask]) if mask.sum() > 1 else 0.0
    sign = orientation_sign(n)
    return InterlaceResult(
        integral=integral,
        determinant=determinant,
        orientation_sign=sign,
        residual=abs(integral - sign * determinant),
        quadrature=float(np.linalg.det(quad)),
    )


### Gelfand-Tsetlin quadrature ###

@dataclass
class GTPattern:
    levels: list
    top: tuple

    def is_interlacing(self, strict=False):
        rows = [tuple(level) for level in self.levels] + [tuple(self.top)]
        for z, y in zip(rows, rows[1:]):
            if len(y) != len(z) + 1:
                return False
            for j, zj in enumerate(z):
                if strict and not (y[j] >= zj > y[j + 1]):
                    return False
                if not strict and not (y[j] >= zj >= y[j + 1]):
                    return False
        return True

    def weight(self, s_funcs):
        """prod_k prod_i S_k(y^{n-k}_i)"""
        n = len(self.top)
        value = 1.0
        for level_index, level in enumerate(self.levels, start=1):
            f = s_funcs[n - level_index - 1]
            for zi in level:
                value *= float(f(zi))
        return value


@dataclass
class GTResult:
    value: float
    error: float
    m: int
    method: str = "simpson"
    degenerate: bool = False
    samples: int = 0


def _as_callables(S, grid):
    funcs = []
    for s in S:
        if callable(s):
            funcs.append(s)
        else:
            if grid is None:
                raise DomainError("Sampled S fields need their grid")
            funcs.append(CubicSpline(np.asarray(grid, dtype=float), np.asarray(s, dtype=float)))
    return funcs


def _check_positive(funcs, S, grid, lo, hi):
    for k, (f, s) in enumerate(zip(funcs, S), start=1):
        if callable(s) or grid is None:
            sampled = f(np.linspace(lo, hi, 257))
        else:
            g = np.asarray(grid)
            mask = (g >= lo) & (g <= hi)
            sampled = np.asarray(s)[mask] if mask.any() else f(np.array([lo, hi]))
        if np.any(np.asarray(sampled) <= 0):
            raise DomainError(f"S_{k} is not positive on [{lo}, {hi}]")


def _evaluate(f, z):
    return np.broadcast_to(np.asarray(f(z), dtype=float), z.shape)


def _simpson_rule(m):
    nodes = np.linspace(0.0, 1.0, m + 1)
    weights = np.ones(m + 1)
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    return nodes, weights / (3.0 * m)


def _nested_quadrature(funcs, top, n, m):
    nodes, weights = _simpson_rule(m)

    def level(upper_rows):
        l = upper_rows.shape[1] - 1
        f = funcs[n - l - 1]
        lower = upper_rows[:, 1:]
        widths = upper_rows[:, :-1] - lower
        combos = np.array(list(itertools.product(range(m + 1), repeat=l)))
        z = lower[:, None, :] + widths[:, None, :] * nodes[combos][None, :, :]
        w = np.prod(weights[combos], axis=1)[None, :] * np.prod(widths, axis=1)[:, None]
        vals = np.prod(_evaluate(f, z), axis=2)
        if l > 1:
            vals = vals * level(z.reshape(-1, l)).reshape(vals.shape)
        return np.sum(w * vals, axis=1)

    return float(level(np.atleast_2d(top))[0])


def _largest_even(n_dim, budget):
    m = int(budget ** (1.0 / n_dim)) - 1
    m -= m % 2
    return max(m, 2)


def _gt_monte_carlo(funcs, top, n, samples, seed):
    rng = streams.stream(seed, "gt-integral", n)
    upper = np.repeat(np.atleast_2d(top), samples, axis=0)
    weight = np.ones(samples)
    for l in range(n - 1, 0, -1):
        lower = upper[:, 1:]
        widths = upper[:, :-1] - lower
        z = lower + widths * rng.random(lower.shape)
        weight *= np.prod(widths, axis=1) * np.prod(_evaluate(funcs[n - l - 1], z), axis=1)
        upper = z
    return float(weight.mean()), float(weight.std(ddof=1) / math.sqrt(samples))


def gt_integral(S, y, grid=None, m=64, mc_samples=200000, seed=0):
    """Integral of prod_k prod_i S_k(y^{n-k}_i) over the Gelfand-Tsetlin polytope of y

    S holds S_1..S_{n-1}, each a callable or samples over grid. Nested
    composite Simpson with m intervals per level; the error estimate compares
    m against 2m (or m/2 when 2m exceeds the evaluation budget). n >= 5 uses
    sequential slab sampling instead.
    """
    coords = (y if isinstance(y, WeylPoint) else WeylPoint(tuple(np.atleast_1d(y)))).array
    n = len(coords)
    if len(S) < n - 1:
        raise DomainError(f"Need {n - 1} S fields, got {len(S)}")
    if n == 1:
        return GTResult(1.0, 0.0, m, method="empty")
    if np.any(np.diff(coords) == 0):
        logger.warning(f"Degenerate polytope for y={tuple(coords)}")
        return GTResult(0.0, 0.0, m, degenerate=True)
    funcs = _as_callables(S[: n - 1], grid)
    _check_positive(funcs, S[: n - 1], grid, coords[-1], coords[0])

    if n >= 5:
        value, stderr = _gt_monte_carlo(funcs, coords, n, mc_samples, seed)
        return GTResult(value, stderr, m, method="monte-carlo", samples=mc_samples)

    dim = n * (n - 1) // 2
    m += m % 2
    m = min(m, _largest_even(dim, GT_BUDGET))
    value = _nested_quadrature(funcs, coords, n, m)
    if (2 * m + 1) ** dim <= GT_BUDGET:
        other = _nested_quadrature(funcs, coords, n, 2 * m)
        error = abs(value - other)
    else:
        other = _nested_quadrature(funcs, coords, n, max(2, m // 2 - (m // 2) % 2))
        error = abs(value - other) / 15.0
    return GTResult(value, error, m)


@dataclass
class FactorizationReport:
    lhs: float
    rhs: float
    ratio: float
    sign: int
    error: float

    @property
    def constant(self):
        return self.ratio * self.sign


def gt_factorization_check(tables, grid, y, m=64):
    """det[d_x^{i-1} g(x,y_j)] against prod g(x,y_i) * GT integral of T

    tables holds derivative tables at (x, grid[k]) for every grid node, with
    size at least n so that T_1..T_{n-1} are available.
    """
    values = _values(tables)
    coords = _check_decreasing(y)
    n = len(coords)
    if values.shape[-1] < n:
        raise DomainError(f"Tables of size {values.shape[-1]} cannot give T_{n - 1}")
    columns = np.array([sample_at(grid, values[:, i, 0], coords) for i in range(n)])
    lhs = float(np.linalg.det(columns)) if n > 1 else float(columns[0, 0])
    g_at_y = columns[0]
    if n == 1:
        return FactorizationReport(lhs, lhs, 1.0, 1, 0.0)
    chain = darboux_chain(values[..., :n, :n])
    result = gt_integral(list(chain.t_fields), coords, grid=grid, m=m)
    rhs = float(np.prod(g_at_y)) * result.value
    return FactorizationReport(
        lhs=lhs,
        rhs=rhs,
        ratio=lhs / rhs,
        sign=gt_sign(n),
        error=float(np.prod(g_at_y)) * result.error,
    )

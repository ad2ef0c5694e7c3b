import itertools
import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy.integrate import cumulative_trapezoid

import streams
from errors import DomainError

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

BRUTE_FORCE_DIMENSION = 2


@dataclass
class DisorderPath:
    """Brownian environments B_1..B_N sampled on a uniform grid of [0, t]"""
    b: np.ndarray
    t: float
    seed: int = None

    def __post_init__(self):
        self.b = np.atleast_2d(np.asarray(self.b, dtype=float))
        if self.b.shape[1] < 2:
            raise DomainError("Disorder needs at least one time step")

    @property
    def N(self):
        return self.b.shape[0]

    @property
    def m(self):
        return self.b.shape[1] - 1

    @property
    def dt(self):
        return self.t / self.m

    @property
    def times(self):
        return np.linspace(0.0, self.t, self.m + 1)

    @classmethod
    def sample(cls, N, m, t, seed, index=0):
        rng = streams.stream(seed, "polymer", index)
        steps = rng.standard_normal((N, m)) * np.sqrt(t / m)
        b = np.concatenate([np.zeros((N, 1)), np.cumsum(steps, axis=1)], axis=1)
        return cls(b, t, seed)

    @classmethod
    def zero(cls, N, m, t):
        return cls(np.zeros((N, m + 1)), t)

    def refined(self, factor=2):
        """Same piecewise-linear disorder on a grid `factor` times finer"""
        fine = np.linspace(0.0, self.t, factor * self.m + 1)
        return replace(self, b=np.array([np.interp(fine, self.times, row) for row in self.b]))

    def shifted(self, c):
        """Every B_i raised by c at all times, so each path energy gains c"""
        return replace(self, b=self.b + c)

    def ramped(self, level, amount, center, width):
        """B_level plus a non-decreasing ramp of height `amount`, raising every increment"""
        b = self.b.copy()
        b[level - 1] += amount * 0.5 * (1.0 + np.tanh((self.times - center) / width))
        b[level - 1] -= b[level - 1, 0] - self.b[level - 1, 0]
        return replace(self, b=b)


def _check_levels(path, i, j):
    if i < 1 or j > path.N:
        raise DomainError(f"Levels must lie in 1..{path.N}, got ({i}, {j})")
    if i > j:
        raise DomainError(f"Need i <= j, got ({i}, {j})")


def partition_series(path, i, j):
    """Z_{i,j}(s_k) for every grid time, by the trapezoidal recursion"""
    _check_levels(path, i, j)
    z = np.exp(path.b[i - 1])
    for level in range(i + 1, j + 1):
        b = path.b[level - 1]
        z = np.exp(b) * cumulative_trapezoid(z * np.exp(-b), dx=path.dt, initial=0.0)
    return z


def single_path_partition(path, i, j):
    """Z_{i,j}(t), the single up/right path partition function from level i to level j"""
    return float(partition_series(path, i, j)[-1])


@dataclass
class HierarchyTable:
    z: np.ndarray
    t: float

    @property
    def N(self):
        return self.z.shape[0]

    def entry(self, i, j):
        return self.z[i - 1, j - 1]


def hierarchy_table(path, executor=None):
    """All Z_{i,j}(t); rows are independent, each filled sequentially in j"""
    N = path.N

    def row(i):
        out = np.zeros(N)
        z = np.exp(path.b[i - 1])
        out[i - 1] = z[-1]
        for level in range(i + 1, N + 1):
            b = path.b[level - 1]
            z = np.exp(b) * cumulative_trapezoid(z * np.exp(-b), dx=path.dt, initial=0.0)
            out[level - 1] = z[-1]
        return out

    return HierarchyTable(np.array(streams.run_ordered(row, range(1, N + 1), executor)), path.t)


def multilayer_partition(table, n):
    """Z_n^N(t) = det[Z_{i, N-n+j}(t)]_{i,j=1..n}, with Z_{i,j} = 0 for j < i"""
    N = table.N
    if n < 1 or n > N:
        raise DomainError(f"Need 1 <= n <= {N}, got {n}")
    rows = np.arange(n)
    cols = N - n + np.arange(n)
    block = np.triu(table.z)[np.ix_(rows, cols)]
    return float(np.linalg.det(block))


def multilayer_all(table):
    return np.array([multilayer_partition(table, n) for n in range(1, table.N + 1)])


def x_increments(values):
    """X_1 = log Z_1, X_n = log(Z_n / Z_{n-1})"""
    values = np.asarray(values, dtype=float)
    bad = np.flatnonzero(values <= 0)
    if bad.size:
        raise DomainError(f"Z_{bad[0] + 1} = {values[bad[0]]} is not positive")
    logs = np.log(values)
    return np.diff(np.concatenate([[0.0], logs]))


### Brute force ###

def _ordered_weight(a, b):
    """1 where a < b, 1/2 on the diagonal, 0 otherwise"""
    return np.where(a < b, 1.0, np.where(a == b, 0.5, 0.0))


def brute_force_partition(path, n):
    """Z_n^N(t) by direct quadrature over the jump times of n disjoint paths

    Path i climbs from level i to level N-n+i. Paths stay disjoint when the
    r-th jump of path i+1 precedes the r-th jump of path i. The first segment
    of each path contributes B_i(s_1) itself, as in the recursion base
    e^{B_i(s)}. Only total dimension n(N-n) <= 2 is supported.
    """
    N = path.N
    k = N - n
    if n < 1 or n > N:
        raise DomainError(f"Need 1 <= n <= {N}, got {n}")
    dims = n * k
    if dims > BRUTE_FORCE_DIMENSION:
        raise DomainError(f"Brute force covers at most {BRUTE_FORCE_DIMENSION} jump times, need {dims}")
    b = path.b
    if dims == 0:
        return float(np.exp(np.sum(b[:n, -1])))
    m = path.m
    weights = np.full(m + 1, path.dt)
    weights[[0, -1]] *= 0.5
    grids = np.meshgrid(*[np.arange(m + 1)] * dims, indexing="ij")
    jumps = {(i, r): grids[i * k + r] for i, r in itertools.product(range(n), range(k))}

    total = np.ones_like(grids[0], dtype=float)
    for g in grids:
        total = total * weights[g]
    energy = np.zeros_like(total)
    for i in range(n):
        times = [None] + [jumps[(i, r)] for r in range(k)] + [None]
        for r in range(k + 1):
            level = i + r
            end = b[level, -1] if times[r + 1] is None else b[level, times[r + 1]]
            begin = 0.0 if times[r] is None else b[level, times[r]]
            energy = energy + end - begin
        for r in range(k - 1):
            total = total * _ordered_weight(jumps[(i, r)], jumps[(i, r + 1)])
        if i + 1 < n:
            for r in range(k):
                total = total * _ordered_weight(jumps[(i + 1, r)], jumps[(i, r)])
    return float(np.sum(total * np.exp(energy)))


@dataclass
class LGVComparison:
    seed: int
    determinant: float
    brute_force: float

    @property
    def relative_error(self):
        return abs(self.determinant - self.brute_force) / abs(self.brute_force)


def lgv_check(N, n, m, t, seeds, shift=0.0, executor=None):
    """Determinant against brute force over a list of disorder seeds, each environment raised by shift"""
    def one(seed):
        path = DisorderPath.sample(N, m, t, seed).shifted(shift)
        return LGVComparison(seed, multilayer_partition(hierarchy_table(path), n), brute_force_partition(path, n))

    results = streams.run_ordered(one, seeds, executor)
    worst = max(results, key=lambda r: r.relative_error)
    logger.info(f"LGV vs brute force (N={N}, n={n}): worst relative error {worst.relative_error:.2e} "
                f"at seed {worst.seed}")
    return results

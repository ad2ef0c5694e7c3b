import functools
import itertools
import logging
import math
from dataclasses import dataclass, asdict

import numpy as np
from numpy.polynomial import hermite_e
from scipy import special

from errors import DomainError

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)


def _check_time(t):
    if np.any(np.asarray(t) <= 0):
        raise DomainError(f"Time must be positive, got {t}")


### Gaussian kernel ###

def log_heat_kernel(t, x, y):
    _check_time(t)
    t = np.asarray(t, dtype=float)
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    return -0.5 * np.log(2.0 * np.pi * t) - d * d / (2.0 * t)


def heat_kernel(t, x, y):
    """Gaussian transition density p(t,x,y), broadcasting over arrays"""
    return np.exp(log_heat_kernel(t, x, y))


def heat_kernel_derivatives(t, x, y, m):
    """Exact table of mixed partials d_x^i d_y^j p(t,x,y) for i,j < m

    Uses d_x^i d_y^j p = (-1)^i t^{-(i+j)/2} He_{i+j}(u) p with u = (x-y)/sqrt(t).
    """
    _check_time(t)
    if m < 1:
        raise DomainError(f"Table size must be at least 1, got {m}")
    u = (x - y) / math.sqrt(t)
    p = float(heat_kernel(t, x, y))
    he = np.array([hermite_e.hermeval(u, [0] * k + [1]) for k in range(2 * m - 1)])
    table = np.empty((m, m))
    for i in range(m):
        for j in range(m):
            table[i, j] = (-1) ** i * t ** (-(i + j) / 2.0) * he[i + j] * p
    return table


### Weyl chamber ###

@dataclass(frozen=True)
class WeylPoint:
    """Point of the closed Weyl chamber, coordinates stored decreasing"""
    coords: tuple

    def __post_init__(self):
        coords = tuple(float(c) for c in np.atleast_1d(self.coords))
        if len(coords) == 0:
            raise DomainError("WeylPoint needs at least one coordinate")
        if any(a < b for a, b in zip(coords, coords[1:])):
            raise DomainError(f"Coordinates must be decreasing, got {coords}")
        object.__setattr__(self, "coords", coords)

    @property
    def n(self):
        return len(self.coords)

    @property
    def array(self):
        return np.array(self.coords)

    def is_interior(self):
        """True when all inequalities are strict"""
        return all(a > b for a, b in zip(self.coords, self.coords[1:]))

    @classmethod
    def confluent(cls, a, n, delta=0.0):
        """Centred spread a + delta*((n-1)/2 - k), k = 0..n-1"""
        offsets = (n - 1) / 2.0 - np.arange(n)
        return cls(tuple(a + delta * offsets))


def _as_coords(point):
    if isinstance(point, WeylPoint):
        return point.array
    return np.atleast_1d(np.asarray(point, dtype=float))


def vandermonde(x):
    """Product of (x_i - x_j) over i < j"""
    x = _as_coords(x)
    value = 1.0
    for i, j in itertools.combinations(range(len(x)), 2):
        value *= x[i] - x[j]
    return value


def log_km_density(t, x, y):
    """(sign, log|det|) of the Karlin-McGregor matrix [p(t,x_i,y_j)]"""
    _check_time(t)
    x = _as_coords(x)
    y = _as_coords(y)
    if len(x) != len(y):
        raise DomainError(f"Length mismatch: {len(x)} start points, {len(y)} end points")
    if np.any(np.diff(x) == 0) or np.any(np.diff(y) == 0):
        return 0.0, -np.inf
    exponent = -np.subtract.outer(x, y) ** 2 / (2.0 * t)
    shift = exponent.max(axis=1, keepdims=True)
    sign, logdet = np.linalg.slogdet(np.exp(exponent - shift))
    logdet += shift.sum() - 0.5 * len(x) * np.log(2.0 * np.pi * t)
    return float(sign), float(logdet)


def km_density(t, x, y):
    """Killed transition density p*_n(t,x,y) as a signed permutation sum"""
    sign, logdet = log_km_density(t, x, y)
    if sign == 0:
        return 0.0
    return sign * math.exp(logdet)


### Constant ledger ###

def _factorial_product(n):
    return math.prod(math.factorial(j) for j in range(1, n))


def printed_constant(n, t):
    """t^{n(n-1)/2} * prod_{j<n} j!"""
    _check_time(t)
    if n < 1:
        raise DomainError(f"Layer index must be at least 1, got {n}")
    return t ** (n * (n - 1) / 2.0) * _factorial_product(n)


@functools.lru_cache(maxsize=None)
def calibrate_wronskian_constant(n, t):
    """Constant c with Z_n = c * W_n, pinned by the free field Z_n = p^n"""
    _check_time(t)
    if n < 1:
        raise DomainError(f"Layer index must be at least 1, got {n}")
    table = heat_kernel_derivatives(t, 0.0, 0.0, n)
    sign, logw = np.linalg.slogdet(table)
    if sign <= 0:
        raise DomainError(f"Free-field Wronskian of order {n} is not positive")
    logp = float(log_heat_kernel(t, 0.0, 0.0))
    constant = math.exp(n * logp - logw)
    logger.debug(f"Calibrated Wronskian constant n={n}, t={t}: {constant}")
    return constant


def orientation_sign(n):
    """Sign linking the interlacing integral to det[f_i(y_j)] for decreasing y"""
    return -1 if n % 2 == 0 else 1


def dx_sign(n):
    """Sign of the confluent x-limit taken with decreasing start points"""
    return -1 if (n * (n - 1) // 2) % 2 else 1


def gt_sign(n):
    """Accumulated interlacing sign of the Gelfand-Tsetlin factorization"""
    return math.prod(orientation_sign(m) for m in range(2, n + 1))


@dataclass
class ConstantLedger:
    n: int
    t: float
    printed_constant: float
    calibrated_constant: float
    orientation_sign: int = 1
    name: str = "wronskian"
    probe_count: int = 0
    note: str = ""

    def ratio(self):
        return self.calibrated_constant / self.printed_constant

    def to_dict(self):
        return asdict(self)


def confluent_constants(n, t):
    """Printed and calibrated Wronskian constants for layer n"""
    return ConstantLedger(
        n=n,
        t=t,
        printed_constant=printed_constant(n, t),
        calibrated_constant=calibrate_wronskian_constant(n, t),
        orientation_sign=orientation_sign(n),
        name="wronskian",
        probe_count=1,
    )


def confluent_limit_constant(n, t, a=0.0, b=0.0, delta=0.1):
    """Extrapolated p^n * D(x)D(y) / p*_n as x -> a^, y -> b^

    The ratio is even in the separation, so two levels are combined with
    Richardson factor 4. Returns (value, error estimate).
    """
    def ratio(d):
        x = WeylPoint.confluent(a, n, d)
        y = WeylPoint.confluent(b, n, d)
        sign, logdet = log_km_density(t, x, y)
        if sign <= 0:
            raise DomainError(f"Killed density not positive at separation {d}")
        lognum = n * float(log_heat_kernel(t, a, b)) + math.log(vandermonde(x) * vandermonde(y))
        return math.exp(lognum - logdet)

    coarse = ratio(delta)
    fine = ratio(delta / 2.0)
    value = (4.0 * fine - coarse) / 3.0
    return value, abs(value - fine)


def rayleigh_exponential_moment(c):
    """E exp(cR) for R with P(R > r) = exp(-r^2/2)"""
    return 1.0 + c * math.sqrt(2.0 * math.pi) * math.exp(c * c / 2.0) * special.ndtr(c)


def second_moment_closed_form(t):
    """E[Z(t,x,y)^2]/p^2 for white noise: two bridges meet with local time sqrt(t/2) R"""
    _check_time(t)
    return rayleigh_exponential_moment(math.sqrt(t / 2.0))


def holder_bound(n, t):
    """Upper bound E exp(n(n-1) sqrt(t/8) R) on the pairwise local-time moment"""
    _check_time(t)
    return rayleigh_exponential_moment(n * (n - 1) * math.sqrt(t / 8.0))


def ledger_entries(n_max, t):
    """Every constant and sign the identities are reconciled with, n = 1..n_max"""
    entries = []
    for n in range(1, n_max + 1):
        printed = printed_constant(n, t)
        entries.append(confluent_constants(n, t))
        entries.append(ConstantLedger(
            n=n, t=t, printed_constant=printed, calibrated_constant=printed,
            orientation_sign=1, name="confluent_hat", probe_count=1,
            note="Z_n = c * lim p*_n/(D(x)D(y)) scaling; printed value holds",
        ))
        entries.append(ConstantLedger(
            n=n, t=t, printed_constant=1.0, calibrated_constant=1.0 / _factorial_product(n),
            orientation_sign=dx_sign(n), name="divided_difference_factor", probe_count=0,
            note="det[d_x^{i-1} Z]/prod (i-1)! is the confluent limit; sign for decreasing x",
        ))
        entries.append(ConstantLedger(
            n=n, t=t, printed_constant=1.0, calibrated_constant=1.0,
            orientation_sign=orientation_sign(n), name="orientation_sign", probe_count=0,
            note="integral over z interlacing y of det[f'_{i+1}(z_j)] = sign * det[f_i(y_j)]",
        ))
        entries.append(ConstantLedger(
            n=n, t=t, printed_constant=1.0, calibrated_constant=1.0,
            orientation_sign=gt_sign(n), name="gt_sign", probe_count=0,
            note="det[d_x^{i-1} g(y_j)] = sign * prod g * GT integral of T",
        ))
        entries.append(ConstantLedger(
            n=n, t=t, printed_constant=1.0, calibrated_constant=float(n * n),
            orientation_sign=1, name="s_definition_factor", probe_count=0,
            note="d_xy log Z_n = n^2 * Z_{n-1}Z_{n+1}/(n t Z_n^2) under calibrated constants",
        ))
    return entries

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import stats
from scipy.integrate import trapezoid

import kernels
import streams
from errors import ConfigurationError, DomainError, InfeasibleConfiguration
from kernels import WeylPoint

# Configure logging
logging.basicConfig(
    level=logging.INFO,
    format="%(asctime)s - %(levelname)s - %(message)s"
)
logger = logging.getLogger(__name__)

MIN_ACCEPTANCE = 1e-6
PROBE_BATCH = 10000
MIN_BANDWIDTH = 0.5
DEFAULT_DELTA = 0.4


@dataclass
class BridgeEnsemble:
    paths: np.ndarray
    start: WeylPoint
    end: WeylPoint
    accepted: bool
    t: float
    acceptance_rate: float = float("nan")

    @property
    def times(self):
        return np.linspace(0.0, self.t, self.paths.shape[1])


@dataclass
class MCEstimate:
    value: float
    stderr: float
    n_samples: int
    n_accepted: int
    seed: int
    wall_time: float = 0.0
    extrapolation_error: float = 0.0
    acceptance_rate: float = float("nan")

    def within(self, reference, n_sigma=3.0, reference_error=0.0):
        return abs(self.value - reference) <= n_sigma * math.hypot(self.stderr, reference_error)


@dataclass
class LocalTime:
    value: float
    degenerate: bool = False

    def __float__(self):
        return float(self.value)


### Samplers ###

def _as_point(p):
    return p if isinstance(p, WeylPoint) else WeylPoint(tuple(np.atleast_1d(p)))


def bridge_batch(rng, t, a, b, m, size, order=None):
    """size independent bridge tuples a_i -> b_i on m steps, shape (size, n, m+1)

    Each step draws X_{k+1} ~ N(X_k + (b - X_k) dt/(t - s_k), dt (t - s_{k+1})/(t - s_k)).
    order[i] names the normal column that drives path i (identity when None).
    """
    if t <= 0:
        raise DomainError(f"Time must be positive, got {t}")
    if m < 2:
        raise DomainError(f"Need at least 2 steps, got {m}")
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    n = len(a)
    dt = t / m
    paths = np.empty((size, n, m + 1))
    paths[..., 0] = a
    current = np.broadcast_to(a, (size, n)).copy()
    normals = rng.standard_normal((m - 1, size, n))
    if order is not None:
        order = np.asarray(order, dtype=int)
        if sorted(order.tolist()) != list(range(n)):
            raise DomainError(f"Stream order must permute 0..{n - 1}, got {order.tolist()}")
        normals = normals[..., order]
    for k in range(m - 1):
        remaining = t - k * dt
        current = (current + (b - current) * dt / remaining
                   + math.sqrt(dt * (remaining - dt) / remaining) * normals[k])
        paths[..., k + 1] = current
    paths[..., m] = b
    return paths


def sample_bridge(t, a, b, m, rng):
    """One Brownian bridge a -> b over [0, t] on m steps, endpoints exact"""
    return bridge_batch(rng, t, [a], [b], m, 1)[0, 0]


def ordered(paths):
    """True per sample when the tuple is strictly decreasing at every grid time"""
    if paths.shape[1] < 2:
        return np.ones(paths.shape[0], dtype=bool)
    return np.all(np.diff(paths, axis=1) < 0, axis=(1, 2))


def crossing_weight(paths, dt):
    """Probability that an ordered pair did not cross between grid times

    The gap of two independent bridges crosses zero inside a step with
    probability exp(-d_k d_{k+1}/dt).
    """
    gap = paths[:, 0, :] - paths[:, 1, :]
    with np.errstate(over="ignore"):
        keep = -np.expm1(-np.clip(gap[:, :-1] * gap[:, 1:], 0.0, None) / dt)
    return np.where(np.all(gap > 0, axis=1), np.prod(keep, axis=1), 0.0)


def _acceptance_weights(paths, dt):
    n = paths.shape[1]
    if n == 1:
        return np.ones(paths.shape[0])
    if n == 2:
        return crossing_weight(paths, dt)
    return ordered(paths).astype(float)


def sample_nonintersecting(n, t, x, y, m, rng, probe=PROBE_BATCH):
    """Rejection sampler for n bridges x_i -> y_i that never meet on the grid"""
    x = _as_point(x)
    y = _as_point(y)
    if x.n != n or y.n != n:
        raise DomainError(f"Need {n} start and end points, got {x.n} and {y.n}")
    if not (x.is_interior() and y.is_interior()):
        raise DomainError("Start and end points must be strictly decreasing")
    batch = bridge_batch(rng, t, x.array, y.array, m, 1 if n == 1 else probe)
    hits = ordered(batch)
    rate = float(hits.mean())
    if rate < MIN_ACCEPTANCE:
        raise InfeasibleConfiguration(
            f"Acceptance rate {rate:.3g} over {len(hits)} probes; increase the separation", rate=rate)
    first = int(np.argmax(hits))
    return BridgeEnsemble(paths=batch[first], start=x, end=y, accepted=True, t=t, acceptance_rate=rate)


def acceptance_probability(t, x, y, m, samples, seed, executor=None):
    """Non-intersection probability (weighted by the sub-grid crossing correction when n = 2)"""
    x = _as_point(x)
    y = _as_point(y)
    dt = t / m

    def block(index, size):
        rng = streams.stream(seed, "acceptance", index)
        return _acceptance_weights(bridge_batch(rng, t, x.array, y.array, m, size), dt)

    w = np.concatenate(streams.run_blocks(block, samples, executor))
    return float(w.mean()), float(w.std(ddof=1) / math.sqrt(len(w)))


def karlin_mcgregor_acceptance(t, x, y):
    """Exact non-intersection probability p*_n / prod p(t, x_i, y_i)"""
    x = _as_point(x)
    y = _as_point(y)
    sign, logdet = kernels.log_km_density(t, x, y)
    logp = float(np.sum(kernels.log_heat_kernel(t, x.array, y.array)))
    return sign * math.exp(logdet - logp)


### Feynman-Kac estimators ###

def path_energy(potential, paths, t):
    """Trapezoid rule for sum_i int_0^t phi(s, X_i(s)) ds, per sample"""
    m = paths.shape[-1] - 1
    s = np.linspace(0.0, t, m + 1)
    values = potential(s[None, None, :], paths)
    return trapezoid(values, dx=t / m, axis=-1).sum(axis=1)


def _ratio_estimate(weights, values):
    """mean(w v)/mean(w) with its delta-method standard error"""
    total = weights.sum()
    if total <= 0:
        raise InfeasibleConfiguration("No accepted samples", rate=0.0)
    ratio = float(np.sum(weights * values) / total)
    stderr = float(math.sqrt(np.sum((weights * (values - ratio)) ** 2)) / total)
    return ratio, stderr, int(np.count_nonzero(weights))


def _weighted_energies(potential, t, x, y, m, samples, seed, tag, executor, order=None):
    dt = t / m

    def block(index, size):
        rng = streams.stream(seed, tag, index)
        paths = bridge_batch(rng, t, x, y, m, size, order=order)
        w = _acceptance_weights(paths, dt)
        e = np.exp(path_energy(potential, paths, t)) if not potential.is_zero else np.ones(size)
        return w, e

    parts = streams.run_blocks(block, samples, executor)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def _conditional_mean(potential, t, x, y, m, samples, seed, tag, executor):
    w, e = _weighted_energies(potential, t, x, y, m, samples, seed, tag, executor)
    return _ratio_estimate(w, e) + (float(w.mean()),)


def feynman_kac_layers(potential, n, t, x, y, samples, seed, delta=None, m=200, executor=None):
    """Monte Carlo Z_n (confluent x, y scalars) or tilde-Z_n (distinct WeylPoints)

    Confluent endpoints are approached from centred spreads delta and delta/2
    and combined with Richardson factor 4. Distinct endpoints use the exact
    p*_n prefactor times the conditional expectation.
    """
    start = time.perf_counter()
    confluent = np.ndim(x) == 0 and np.ndim(y) == 0 and not isinstance(x, WeylPoint)
    if confluent:
        delta = DEFAULT_DELTA if delta is None else delta
        logp = n * float(kernels.log_heat_kernel(t, x, y))
        levels = [delta, delta / 2.0] if n > 1 else [0.0]
        means = []
        for k, d in enumerate(levels):
            xs = WeylPoint.confluent(float(x), n, d).array
            ys = WeylPoint.confluent(float(y), n, d).array
            means.append(_conditional_mean(potential, t, xs, ys, m, samples, seed, f"fk-{n}-{k}", executor))
        if n == 1:
            ratio, stderr, accepted, rate = means[0]
            extrapolation = 0.0
        else:
            (coarse, se_c, _, _), (fine, se_f, accepted, rate) = means
            ratio = (4.0 * fine - coarse) / 3.0
            stderr = math.hypot(4.0 * se_f, se_c) / 3.0
            extrapolation = abs(fine - coarse) / 3.0
        scale = math.exp(logp)
    else:
        xs = _as_point(x)
        ys = _as_point(y)
        if xs.n != n or ys.n != n or not (xs.is_interior() and ys.is_interior()):
            raise DomainError("Distinct endpoints must be strictly decreasing with n entries")
        ratio, stderr, accepted, rate = _conditional_mean(
            potential, t, xs.array, ys.array, m, samples, seed, f"fk-distinct-{n}", executor)
        extrapolation = 0.0
        scale = kernels.km_density(t, xs, ys)
    estimate = MCEstimate(
        value=scale * ratio, stderr=scale * stderr, n_samples=samples, n_accepted=accepted,
        seed=seed, wall_time=time.perf_counter() - start,
        extrapolation_error=scale * extrapolation, acceptance_rate=rate,
    )
    logger.info(f"Feynman-Kac n={n}: {estimate.value:.6g} +/- {estimate.stderr:.2g} "
                f"({accepted} accepted of {samples})")
    return estimate


def path_weights(potential, t, x, y, samples, seed, m=200, order=None, executor=None):
    """Per-sample Feynman-Kac summands w exp(sum int phi) for bridges x_i -> y_i

    Draws the same streams as feynman_kac_layers on distinct endpoints.
    """
    xs = _as_point(x)
    ys = _as_point(y)
    if xs.n != ys.n or not (xs.is_interior() and ys.is_interior()):
        raise DomainError("Endpoints must be strictly decreasing with matching sizes")
    w, e = _weighted_energies(potential, t, xs.array, ys.array, m, samples, seed,
                              f"fk-distinct-{xs.n}", executor, order=order)
    return w * e


@dataclass
class ExchangeabilityReport:
    statistic: float
    p_value: float
    samples: int
    order: tuple


def exchangeability_check(potential, t, x, y, samples, seed, order=None, m=200, executor=None):
    """Two-sample KS between summands drawn with identity and permuted stream assignment

    The default order reverses the paths.
    """
    n = _as_point(x).n
    order = tuple(range(n - 1, -1, -1)) if order is None else tuple(int(i) for i in order)
    direct = path_weights(potential, t, x, y, samples, seed, m=m, executor=executor)
    permuted = path_weights(potential, t, x, y, samples, seed, m=m, order=order, executor=executor)
    result = stats.ks_2samp(direct, permuted)
    logger.info(f"Stream order {order}: KS statistic {result.statistic:.4f}, p = {result.pvalue:.3g}")
    return ExchangeabilityReport(float(result.statistic), float(result.pvalue), samples, order)


### Intersection local time ###

def _check_bandwidth(bandwidth, dt):
    if bandwidth < MIN_BANDWIDTH * math.sqrt(dt):
        raise ConfigurationError(
            f"Bandwidth {bandwidth:.3g} below grid resolution {MIN_BANDWIDTH * math.sqrt(dt):.3g}")


def _local_time(difference, dt, bandwidth):
    inside = (np.abs(difference) < bandwidth).astype(float)
    return trapezoid(inside, dx=dt, axis=-1) / (2.0 * bandwidth)


def default_bandwidth(dt):
    return 2.0 * math.sqrt(dt)


def intersection_local_time(path_a, path_b, bandwidth, t=1.0):
    """sum_k (dt/2eps) 1{|a - b| < eps}, endpoints at half weight"""
    path_a = np.asarray(path_a, dtype=float)
    path_b = np.asarray(path_b, dtype=float)
    if path_a.shape != path_b.shape:
        raise DomainError("Paths must share the time grid")
    dt = t / (path_a.shape[-1] - 1)
    _check_bandwidth(bandwidth, dt)
    degenerate = bool(np.array_equal(path_a, path_b))
    if degenerate:
        logger.warning("Identical paths: local time estimate grows like t/(2 eps)")
    return LocalTime(float(_local_time(path_a - path_b, dt, bandwidth)), degenerate)


def pairwise_local_time(paths, dt, bandwidth):
    """Total pairwise intersection local time per sample, paths of shape (size, n, m+1)"""
    _check_bandwidth(bandwidth, dt)
    n = paths.shape[1]
    total = np.zeros(paths.shape[0])
    for i in range(n):
        for j in range(i + 1, n):
            total += _local_time(paths[:, i] - paths[:, j], dt, bandwidth)
    return total


def local_time_samples(t, x, y, m, samples, seed, bandwidth=None, n=2, executor=None):
    """Pairwise local time of n independent bridges x -> y"""
    dt = t / m
    bandwidth = default_bandwidth(dt) if bandwidth is None else bandwidth

    def block(index, size):
        rng = streams.stream(seed, "local-time", n, index)
        paths = bridge_batch(rng, t, np.full(n, float(x)), np.full(n, float(y)), m, size)
        return pairwise_local_time(paths, dt, bandwidth)

    return np.concatenate(streams.run_blocks(block, samples, executor))


@dataclass
class RayleighReport:
    ks_distance: float
    p_value: float
    mean: float
    samples: int


def rayleigh_check(m, samples, seed, bandwidth=0.02, executor=None):
    """KS distance of sqrt(2) L for a standard bridge pair against P(R > r) = exp(-r^2/2)"""
    scaled = math.sqrt(2.0) * local_time_samples(1.0, 0.0, 0.0, m, samples, seed, bandwidth, executor=executor)
    result = stats.kstest(scaled, stats.rayleigh.cdf)
    logger.info(f"Rayleigh KS distance {result.statistic:.4f} over {samples} samples")
    return RayleighReport(float(result.statistic), float(result.pvalue), float(scaled.mean()), samples)


def _mean_estimate(values, samples, seed, start):
    return MCEstimate(
        value=float(values.mean()), stderr=float(values.std(ddof=1) / math.sqrt(len(values))),
        n_samples=samples, n_accepted=len(values), seed=seed, wall_time=time.perf_counter() - start,
    )


@dataclass
class SecondMomentReport:
    t: float
    bridge: MCEstimate
    refined: MCEstimate
    closed_form: float
    lattice: float = float("nan")
    lattice_error: float = 0.0
    diagnostics: dict = field(default_factory=dict)

    @property
    def extrapolated(self):
        """Linear extrapolation eps -> 0 from eps and eps/2; the endpoint bias is O(eps)"""
        return 2.0 * self.refined.value - self.bridge.value

    @property
    def extrapolated_stderr(self):
        return math.hypot(2.0 * self.refined.stderr, self.bridge.stderr)

    @property
    def relative_gap(self):
        return abs(self.extrapolated - self.lattice) / self.lattice

    @property
    def bandwidth_shift(self):
        """|E_eps - E_eps/2| in units of the combined standard error"""
        return abs(self.bridge.value - self.refined.value) / math.hypot(self.bridge.stderr, self.refined.stderr)


def _tail_diagnostics(weights):
    total = weights.sum()
    cut = np.quantile(weights, 0.99)
    return {
        "max_weight_share": float(weights.max() / total),
        "tail_share": float(weights[weights >= cut].sum() / total),
    }


def second_moment_check(t, x, y, samples, seed, m=400, bandwidth=None, lattice=None, executor=None):
    """E[e^L] for two independent bridges x -> y, at bandwidth eps and eps/2

    `lattice` is an optional (value, error) pair for E[Z^2]/p^2 from the lattice solver.
    """
    start = time.perf_counter()
    dt = t / m
    bandwidth = default_bandwidth(dt) if bandwidth is None else bandwidth
    weights = np.exp(local_time_samples(t, x, y, m, samples, seed, bandwidth, executor=executor))
    coarse = _mean_estimate(weights, samples, seed, start)
    fine_weights = np.exp(local_time_samples(t, x, y, 4 * m, samples, seed, bandwidth / 2.0, executor=executor))
    fine = _mean_estimate(fine_weights, samples, seed, start)
    report = SecondMomentReport(
        t=t, bridge=coarse, refined=fine, closed_form=kernels.second_moment_closed_form(t),
        diagnostics=_tail_diagnostics(weights),
    )
    if lattice is not None:
        report.lattice, report.lattice_error = lattice
    logger.info(f"Second moment t={t}: bridges {coarse.value:.4f} +/- {coarse.stderr:.2g}, "
                f"closed form {report.closed_form:.4f}")
    return report


@dataclass
class BoundReport:
    n: int
    t: float
    estimate: MCEstimate
    bound: float
    diagnostics: dict

    @property
    def holds(self):
        return self.estimate.value <= self.bound + 3.0 * self.estimate.stderr


def local_time_bound_check(n, t, samples, seed, m=400, bandwidth=None, executor=None):
    """E exp(total pairwise local time) of n bridges 0 -> 0 against the Holder-type bound"""
    start = time.perf_counter()
    weights = np.exp(local_time_samples(t, 0.0, 0.0, m, samples, seed, bandwidth, n=n, executor=executor))
    return BoundReport(n=n, t=t, estimate=_mean_estimate(weights, samples, seed, start),
                       bound=kernels.holder_bound(n, t), diagnostics=_tail_diagnostics(weights))


@dataclass
class SignedSumReport:
    with_local_time: MCEstimate
    without_local_time: MCEstimate


def signed_sum_estimate(potential, t, x, y, samples, seed, m=200, bandwidth=None, executor=None):
    """V_2(x, y) - V_2(sigma x, y) over independent bridge pairs

    V_2 = p(t,x_1,y_1)p(t,x_2,y_2) E exp(sum int phi [+ L]); the variant without
    L is an unbiased estimate of det[Z(t, x_i, y_j)].
    """
    start = time.perf_counter()
    xs = _as_point(x).array
    ys = _as_point(y).array
    if len(xs) != 2 or len(ys) != 2:
        raise DomainError("Signed sum is implemented for n = 2")
    dt = t / m
    bandwidth = default_bandwidth(dt) if bandwidth is None else bandwidth

    def block(index, size):
        out = []
        for k, starts in enumerate((xs, xs[::-1])):
            rng = streams.stream(seed, "signed-sum", k, index)
            paths = bridge_batch(rng, t, starts, ys, m, size)
            energy = path_energy(potential, paths, t)
            prefactor = math.exp(float(np.sum(kernels.log_heat_kernel(t, starts, ys))))
            lt = pairwise_local_time(paths, dt, bandwidth)
            out.append((prefactor * np.exp(energy + lt), prefactor * np.exp(energy)))
        return (out[0][0] - out[1][0], out[0][1] - out[1][1])

    parts = streams.run_blocks(block, samples, executor)
    with_lt = np.concatenate([p[0] for p in parts])
    without_lt = np.concatenate([p[1] for p in parts])
    return SignedSumReport(_mean_estimate(with_lt, samples, seed, start),
                           _mean_estimate(without_lt, samples, seed, start))

"""Decaying Rokhlin towers from marker sets.

The pipeline shifts a marker set into 2d+3 staggered supports, builds an
equal-split partition of unity subordinate to their translates, and averages
it over the window [-k', k'] to gain approximate equivariance.  Partition
values and averages are exact rationals, so the conservation identity is
checked exactly; sup norms are the only floating-point quantities.

The smoothing width k' and the enlarged compact set K' are always derived
inside the pipeline from (k, epsilon, K); supplying them independently is the
classic way to get an inconsistent parameterization.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .dynsys import FiniteDynamicalSystem
from .markers import MarkerCertificate, greedy_markers, marker_certificate

__all__ = [
    "TowerError",
    "TowerFamily",
    "PartitionOfUnity",
    "TowerReport",
    "CyclicTower",
    "DecayingTower",
    "as_fraction",
    "tower_supports",
    "build_partition",
    "folner_average",
    "build_tower_family",
    "verify_tower",
    "cyclic_to_decaying",
    "decaying_to_cyclic",
]

SparseFn = dict[int, Fraction]


class TowerError(ValueError):
    """Tower parameters or invariants are violated."""


def as_fraction(x) -> Fraction:
    """Exact rational from int/str/Fraction; floats go through their shortest repr."""
    if isinstance(x, float):
        return Fraction(repr(x))
    return Fraction(x)


def _compose(sys: FiniteDynamicalSystem, fn: SparseFn, i: int) -> SparseFn:
    """fn o alpha_i as a sparse map (value of fn at the i-th forward image)."""
    back = sys.power_perm(-i)
    return {int(back[x]): v for x, v in fn.items()}


def _sup_diff(a: SparseFn, b: SparseFn) -> Fraction:
    keys = set(a) | set(b)
    return max((abs(a.get(x, Fraction(0)) - b.get(x, Fraction(0))) for x in keys), default=Fraction(0))


def min_window_length(d: int, k: int) -> int:
    """Smallest admissible tower half-length m for tolerance window k: the
    staggered supports tile only when 2m >= 2(2d+3)k - d - 2."""
    return math.ceil(((2 * d + 3) * k) - d / 2 - 1)


def tower_supports(
    sys: FiniteDynamicalSystem, cert: MarkerCertificate, d: int, k: int, m: int
) -> tuple[frozenset[int], ...]:
    """Shift a certified marker set into 2d+3 staggered supports.

    Support l is the ((2(m-k)+1) l + (m-k) + 1)-th forward image of the
    markers.  Verifies exhaustively that the [-m, m] translates of each
    support stay pairwise disjoint and that the [-(m-k), m-k] translates of
    all supports jointly cover the certificate's compact set.
    """
    if 2 * m < 2 * (2 * d + 3) * k - d - 2:
        raise TowerError(
            f"m = {m} too small for (d, k) = ({d}, {k}); need m >= (2d+3)k - d/2 - 1 = "
            f"{(2 * d + 3) * k - d / 2 - 1}"
        )
    if not cert.ok():
        raise TowerError("marker certificate is invalid")
    if cert.m != m:
        raise TowerError(f"certificate was built for m = {cert.m}, not {m}")
    Z = cert.markers
    supports = tuple(
        sys.apply((2 * (m - k) + 1) * l + (m - k) + 1, Z) for l in range(2 * d + 3)
    )
    for l, sup in enumerate(supports):
        counts = np.zeros(sys.n, dtype=np.int64)
        for i in range(-m, m + 1):
            counts[list(sys.apply(i, sup))] += 1
        if counts.max(initial=0) > 1:
            raise TowerError(f"translates of support {l} are not pairwise disjoint")
    covered: set[int] = set()
    for sup in supports:
        for i in range(-(m - k), m - k + 1):
            covered |= sys.apply(i, sup)
    if not cert.K <= covered:
        missing = sorted(cert.K - covered)[0]
        raise TowerError(f"supports do not cover {sys.labels[missing]!r}")
    return supports


@dataclass(frozen=True)
class PartitionOfUnity:
    """Equal-split partition subordinate to the translated supports.

    ``p[l][j]`` is the sparse rational function dividing each covered point of
    K' evenly among the (l, j) pairs covering it; ``p_inf`` is the deficit off
    K'.  All values together sum to one at every point, exactly.
    """

    sys: FiniteDynamicalSystem
    supports: tuple[frozenset[int], ...]
    m: int
    k_prime: int
    K_prime: frozenset[int]
    p: tuple[dict[int, SparseFn], ...]
    p_inf: SparseFn


def build_partition(
    sys: FiniteDynamicalSystem,
    supports: Sequence[frozenset[int]],
    m: int,
    k_prime: int,
    K_prime: Iterable[int],
) -> PartitionOfUnity:
    """Divide each point of K' equally among the (l, j) support translates covering it.

    Only indices |j| <= m - k' participate.  A point of K' covered by no pair
    is a certificate failure and is reported.
    """
    K_prime = frozenset(K_prime)
    jmax = m - k_prime
    cover: dict[int, list[tuple[int, int]]] = {}
    for l, sup in enumerate(supports):
        for j in range(-jmax, jmax + 1):
            for x in sys.apply(j, sup):
                if x in K_prime:
                    cover.setdefault(x, []).append((l, j))
    missing = sorted(K_prime - set(cover))
    if missing:
        raise TowerError(
            f"point {sys.labels[missing[0]]!r} of K' is covered by no support translate "
            "(invalid marker certificate)"
        )
    p: tuple[dict[int, SparseFn], ...] = tuple({} for _ in supports)
    for x, pairs in cover.items():
        share = Fraction(1, len(pairs))
        for l, j in pairs:
            p[l].setdefault(j, {})[x] = share
    p_inf = {x: Fraction(1) for x in range(sys.n) if x not in K_prime}
    return PartitionOfUnity(
        sys=sys, supports=tuple(frozenset(s) for s in supports), m=m,
        k_prime=k_prime, K_prime=K_prime, p=p, p_inf=p_inf,
    )


@dataclass(frozen=True)
class TowerFamily:
    """Averaged tower functions mu[l][j] with their construction parameters.

    Invariants (checked by ``verify_tower``): values in [0, 1], mu[l][j]
    supported in the j-th translate of support l and vanishing for |j| > m,
    exact conservation on K, and the averaged-step bound 2k / (2k' + 1).
    """

    sys: FiniteDynamicalSystem
    d: int
    k: int
    m: int
    eps: Fraction
    K: frozenset[int]
    k_prime: int
    K_prime: frozenset[int]
    supports: tuple[frozenset[int], ...]
    mu: tuple[dict[int, SparseFn], ...]

    @property
    def levels(self) -> int:
        return len(self.mu)

    def mu_fn(self, l: int, j: int) -> SparseFn:
        return self.mu[l].get(j, {})

    def mu_array(self, l: int, j: int) -> np.ndarray:
        out = np.zeros(self.sys.n)
        for x, v in self.mu_fn(l, j).items():
            out[x] = float(v)
        return out

    def step_bound(self) -> Fraction:
        return Fraction(2 * self.k, 2 * self.k_prime + 1)

    def end_sup(self, l: int) -> float:
        return float(max((max(f.values(), default=Fraction(0)) for f in
                          (self.mu_fn(l, self.m), self.mu_fn(l, -self.m))), default=Fraction(0)))

    def decaying_tower(self, l: int) -> "DecayingTower":
        vals = np.stack([self.mu_array(l, j) for j in range(-self.m, self.m + 1)])
        return DecayingTower(sys=self.sys, values=vals, m=self.m, eps=float(self.eps))


def folner_average(partition: PartitionOfUnity) -> tuple[dict[int, SparseFn], ...]:
    """Average each level's partition functions over the window [-k', k'].

    mu[l][j] = (2k'+1)^{-1} sum_{|i| <= k'} p[l][j+i] o alpha_i, exactly.
    """
    sys = partition.sys
    kp = partition.k_prime
    weight = Fraction(1, 2 * kp + 1)
    out: list[dict[int, SparseFn]] = []
    for level in partition.p:
        mu_level: dict[int, SparseFn] = {}
        for j in range(-partition.m, partition.m + 1):
            acc: SparseFn = {}
            for i in range(-kp, kp + 1):
                src = level.get(j + i)
                if not src:
                    continue
                for x, v in _compose(sys, src, i).items():
                    acc[x] = acc.get(x, Fraction(0)) + v * weight
            if acc:
                mu_level[j] = acc
        out.append(mu_level)
    return tuple(out)


def build_tower_family(
    sys: FiniteDynamicalSystem,
    d: int,
    k: int,
    m: int,
    eps,
    K: Iterable[int],
    markers: Iterable[int] | None = None,
) -> TowerFamily:
    """Run the full tower pipeline: markers -> supports -> partition -> averaging.

    k' = k * ceil(1/eps) and K' = union of the [-k', k'] translates of K are
    derived here.  The marker set defaults to the greedy placement for
    (m, K'); a custom set may be supplied and is certified before use.
    """
    eps = as_fraction(eps)
    if eps <= 0:
        raise TowerError("eps must be positive")
    K = frozenset(K)
    k_prime = k * math.ceil(1 / eps)
    K_prime: set[int] = set()
    for i in range(-k_prime, k_prime + 1):
        K_prime |= sys.apply(i, K)
    if markers is None:
        cert = greedy_markers(sys, m, K_prime, d)
    else:
        cert = marker_certificate(sys, markers, m, K_prime, d)
    if not cert.ok():
        raise TowerError(f"marker certificate failed: {cert}")
    supports = tower_supports(sys, cert, d, k_prime, m)
    partition = build_partition(sys, supports, m, k_prime, frozenset(K_prime))
    mu = folner_average(partition)
    return TowerFamily(
        sys=sys, d=d, k=k, m=m, eps=eps, K=K, k_prime=k_prime,
        K_prime=frozenset(K_prime), supports=supports, mu=mu,
    )


@dataclass(frozen=True)
class TowerReport:
    """Verification record for a tower family; all flags must hold."""

    conservation_exact: bool
    conservation_error: float
    step_measured: float
    step_bound: float
    step_below_eps: bool
    supports_disjoint: bool
    supports_contain: bool
    vanishes_outside: bool
    values_in_unit_interval: bool

    def ok(self) -> bool:
        return (
            self.conservation_exact
            and self.step_measured <= self.step_bound
            and self.step_below_eps
            and self.supports_disjoint
            and self.supports_contain
            and self.vanishes_outside
            and self.values_in_unit_interval
        )


def verify_tower(family: TowerFamily) -> TowerReport:
    """Exhaustively check the tower family invariants.

    Conservation is exact rational: the level sums must equal one at every
    point of K.  The step supremum over levels, |i| <= k and all j is
    compared with 2k/(2k'+1), which is strictly below eps.
    """
    sys = family.sys
    totals: dict[int, Fraction] = {}
    in_unit = True
    contained = True
    for l in range(family.levels):
        for j, fn in family.mu[l].items():
            allowed = sys.apply(j, family.supports[l]) if abs(j) <= family.m else frozenset()
            if not set(fn) <= set(allowed):
                contained = False
            for x, v in fn.items():
                if not (0 <= v <= 1):
                    in_unit = False
                totals[x] = totals.get(x, Fraction(0)) + v
    errs = [abs(totals.get(x, Fraction(0)) - 1) for x in family.K]
    cons_err = max(errs, default=Fraction(0))

    step = Fraction(0)
    for l in range(family.levels):
        js = set(family.mu[l])
        probe = {j + i for j in js for i in range(-family.k, family.k + 1)} | js
        for j in probe:
            fj = family.mu_fn(l, j)
            for i in range(-family.k, family.k + 1):
                step = max(step, _sup_diff(_compose(sys, fj, i), family.mu_fn(l, j - i)))

    disjoint = True
    for l, sup in enumerate(family.supports):
        counts = np.zeros(sys.n, dtype=np.int64)
        for i in range(-family.m, family.m + 1):
            counts[list(sys.apply(i, sup))] += 1
        if counts.max(initial=0) > 1:
            disjoint = False

    vanish = all(
        abs(j) <= family.m for l in range(family.levels) for j in family.mu[l]
    )
    bound = family.step_bound()
    return TowerReport(
        conservation_exact=(cons_err == 0),
        conservation_error=float(cons_err),
        step_measured=float(step),
        step_bound=float(bound),
        step_below_eps=(bound < family.eps),
        supports_disjoint=disjoint,
        supports_contain=contained,
        vanishes_outside=vanish,
        values_in_unit_interval=in_unit,
    )


# ---------------------------------------------------------------------------
# cyclic <-> decaying conversions


def _sup(values: np.ndarray) -> float:
    return float(np.abs(values).max()) if values.size else 0.0


@dataclass(frozen=True)
class CyclicTower:
    """Functions f_j, j in [-m, m], approximately permuted with cyclic wraparound.

    The step condition compares f_{j+1} with f_j o alpha_{-1}, indices mod
    2m+1; the declared eps must dominate every measured step.
    """

    sys: FiniteDynamicalSystem
    values: np.ndarray  # (2m+1, n), row j+m holds f_j
    m: int
    eps: float

    def f(self, j: int) -> np.ndarray:
        return self.values[(j + self.m) % (2 * self.m + 1)]

    def measured_step(self) -> float:
        worst = 0.0
        for j in range(-self.m, self.m + 1):
            # (f o alpha_{-1})(x) = f(alpha_{-1} x)
            stepped = self.f(j)[self.sys.power_perm(-1)]
            worst = max(worst, _sup(self.f(j + 1) - stepped))
        return worst

    def verify(self) -> bool:
        return self.measured_step() <= self.eps + 1e-12 and float(np.abs(self.values).max()) <= 1 + 1e-12


@dataclass(frozen=True)
class DecayingTower:
    """Functions f_j, j in [-m, m], with small ends instead of wraparound."""

    sys: FiniteDynamicalSystem
    values: np.ndarray
    m: int
    eps: float

    def f(self, j: int) -> np.ndarray:
        return self.values[j + self.m]

    def end_norms(self) -> tuple[float, float]:
        return _sup(self.f(-self.m)), _sup(self.f(self.m))

    def measured_step(self) -> float:
        worst = 0.0
        for j in range(-self.m, self.m):
            stepped = self.f(j)[self.sys.power_perm(-1)]
            worst = max(worst, _sup(self.f(j + 1) - stepped))
        return worst

    def verify(self) -> bool:
        lo, hi = self.end_norms()
        return (
            max(lo, hi) < self.eps
            and self.measured_step() <= self.eps + 1e-12
            and float(np.abs(self.values).max()) <= 1 + 1e-12
        )


def _tent(j: int, m: int) -> float:
    """Piecewise-linear bump of period 2m+2: one at 0, zero at +-(m+1)."""
    period = 2 * m + 2
    r = j % period
    r = min(r, period - r)
    return max(0.0, 1.0 - r / (m + 1))


def cyclic_to_decaying(tower: CyclicTower) -> tuple[DecayingTower, DecayingTower, dict]:
    """Split a cyclic tower into two decaying towers by tent-shaped damping.

    The first tower damps rung j by the tent value at j; the second runs
    through the rungs shifted by half a period (f extended periodically) so
    its tent peaks mid-window.  Both carry tolerance eps + 1/(2m); measured
    ends and steps are returned alongside.
    """
    m = tower.m
    if m < 1:
        raise TowerError("conversion needs m >= 1")
    tol = tower.eps + 1.0 / (2 * m)
    g = np.array([_tent(j, m) for j in range(-m, m + 1)])
    first = DecayingTower(sys=tower.sys, values=g[:, None] * tower.values, m=m, eps=tol)
    shifted = np.stack([tower.f(j + m + 1) for j in range(-m, m + 1)])
    second = DecayingTower(sys=tower.sys, values=g[:, None] * shifted, m=m, eps=tol)
    report = {
        "tolerance": tol,
        "first_ends": first.end_norms(),
        "second_ends": second.end_norms(),
        "first_step": first.measured_step(),
        "second_step": second.measured_step(),
        "first_ok": first.verify(),
        "second_ok": second.verify(),
    }
    return first, second, report


def decaying_to_cyclic(tower: DecayingTower) -> tuple[CyclicTower, dict]:
    """Reinterpret a decaying tower cyclically.

    The only new step is the wraparound from the top rung to the bottom one,
    bounded by the sum of the end norms; the recorded tolerance is the input
    step tolerance plus both measured end norms.
    """
    lo, hi = tower.end_norms()
    wrap = _sup(tower.f(-tower.m) - tower.f(tower.m)[tower.sys.power_perm(-1)])
    out = CyclicTower(sys=tower.sys, values=tower.values, m=tower.m, eps=tower.eps + lo + hi)
    return out, {"wrap_step": wrap, "end_norms": (lo, hi), "tolerance": out.eps}

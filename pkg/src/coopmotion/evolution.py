"""Exact evolution of cooperative-motion laws.

A walker moves by an independent step ``D`` only when ``m`` independent
copies drawn from its current law all sit on its own site. The distribution
therefore evolves deterministically, and on the CDF ``F_k = P(X < k)`` one
Bernoulli step is the upwind scheme

    F'_k = F_k - q |F_k - F_{k-1}|^(m+1).

Everything here works on dense windows and is pure: inputs are never mutated.
"""

from __future__ import annotations

import math
from collections.abc import Iterable, Iterator, Mapping
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .dist_core import MASS_TOL, TRIM_THRESHOLD, LatticeDist, ModelParams

MONO_TOL = 1e-12


@dataclass(frozen=True)
class StepLaw:
    """Bounded integer step distribution, stored as sorted ``(d, P(D=d))`` pairs."""

    support: tuple[tuple[int, float], ...]

    def __init__(self, support: Mapping[int, float] | Iterable[tuple[int, float]]):
        items = support.items() if isinstance(support, Mapping) else support
        acc: dict[int, float] = {}
        for d, p in items:
            p = float(p)
            if not (p >= 0 and math.isfinite(p)):
                raise ValueError(f"invalid probability {p!r} for step {d}")
            acc[int(d)] = acc.get(int(d), 0.0) + p
        acc = {d: p for d, p in acc.items() if p > 0}
        if not acc:
            raise ValueError("empty step law")
        if abs(math.fsum(acc.values()) - 1.0) > MASS_TOL:
            raise ValueError(f"step probabilities sum to {math.fsum(acc.values())!r}")
        object.__setattr__(self, "support", tuple(sorted(acc.items())))

    @classmethod
    def bernoulli(cls, q: float) -> StepLaw:
        return cls({0: 1.0 - q, 1: q})

    @classmethod
    def scaled_bernoulli(cls, g: int, q: float) -> StepLaw:
        """``P(D = g) = q = 1 - P(D = 0)``."""
        if g < 1:
            raise ValueError("g must be a positive integer")
        return cls({0: 1.0 - q, g: q})

    @property
    def left(self) -> int:
        """Largest leftward reach (the non-negative integer l with D >= -l)."""
        return max(0, -self.support[0][0])

    @property
    def right(self) -> int:
        """Largest rightward reach s."""
        return max(0, self.support[-1][0])

    def prob(self, d: int) -> float:
        return dict(self.support).get(d, 0.0)

    def tail_ge(self, i: int) -> float:
        """``P(D >= i)``."""
        return sum(p for d, p in self.support if d >= i)

    def tail_lt(self, i: int) -> float:
        """``P(D < i)``."""
        return sum(p for d, p in self.support if d < i)

    def reflected(self) -> StepLaw:
        return StepLaw({-d: p for d, p in self.support})

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        values = np.array([d for d, _ in self.support], dtype=np.int64)
        cum = np.cumsum([p for _, p in self.support])
        idx = np.searchsorted(cum, rng.random(size), side="right")
        return values[np.minimum(idx, values.size - 1)]


@dataclass(frozen=True)
class SchemeMesh:
    """Space/time mesh with ``dt = dx**(m+1)``, the scaling the scheme is invariant under."""

    dx: float
    dt: float

    def __post_init__(self) -> None:
        if not (self.dx > 0 and self.dt > 0):
            raise ValueError("mesh sizes must be positive")

    @classmethod
    def for_steps(cls, n: int, m: float) -> SchemeMesh:
        """Mesh on which ``n`` steps span unit time."""
        return cls(n ** (-1.0 / (m + 1.0)), 1.0 / n)

    def check(self, m: float) -> None:
        target = self.dx ** (m + 1.0)
        if abs(self.dt - target) > 1e-12 * target:
            raise ValueError(f"dt={self.dt!r} but dx**(m+1)={target!r}")


@dataclass(frozen=True)
class CdfStep:
    """One scheme step on a CDF window.

    ``values[i]`` is the new ``P(X < offset + i)``. ``monotone`` is False when
    the output decreases somewhere by more than ``MONO_TOL``; ``violations``
    lists those lattice sites ``k`` (where ``F'_k < F'_{k-1}``).
    """

    values: np.ndarray
    offset: int
    monotone: bool
    violations: tuple[int, ...] = ()

    def to_dist(self) -> LatticeDist:
        return LatticeDist.from_cdf(self.values, self.offset)


def _pw(x: np.ndarray, m: float) -> np.ndarray:
    return np.abs(x) ** (m + 1.0)


def _check_cdf(F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, dtype=float)
    if F.ndim != 1 or F.size == 0:
        raise ValueError("CDF window must be a non-empty 1-d sequence")
    if F.min() < -MASS_TOL or F.max() > 1.0 + MASS_TOL:
        raise ValueError("CDF values must lie in [0, 1]")
    if F.size > 1 and np.diff(F).min() < -MASS_TOL:
        raise ValueError("CDF window is not non-decreasing")
    return F


def _finish(out: np.ndarray, offset: int) -> CdfStep:
    dec = np.flatnonzero(np.diff(out) < -MONO_TOL)
    return CdfStep(out, offset, dec.size == 0, tuple(int(offset + i + 1) for i in dec))


def step_cdf(F, params: ModelParams, offset: int = 0) -> CdfStep:
    """One Bernoulli(q) step of the CDF recursion.

    ``F[i] = P(X < offset + i)`` and the CDF is taken constant outside the
    window. The window is widened by one site on the right so that mass at
    the last site can move; ``values`` therefore has ``len(F) + 1`` entries.
    """
    F = _check_cdf(F)
    Fp = np.append(F, F[-1])
    inc = np.diff(Fp, prepend=Fp[0])
    out = Fp - params.q * _pw(inc, params.m)
    return _finish(out, offset)


def step_scheme(U, params: ModelParams, mesh: SchemeMesh) -> np.ndarray:
    """Mesh form ``U - q dt |(U_k - U_{k-1}) / dx|^(m+1)``; constant left extension, same length."""
    mesh.check(params.m)
    U = np.asarray(U, dtype=float)
    inc = np.diff(U, prepend=U[0])
    return U - params.q * mesh.dt * np.abs(inc / mesh.dx) ** (params.m + 1.0)


def _general_raw(F: np.ndarray, offset: int, step: StepLaw, m: float) -> tuple[np.ndarray, int]:
    lft, rgt = step.left, step.right
    padded = np.concatenate((np.full(lft, F[0]), F, np.full(rgt, F[-1])))
    L = padded.size
    # pw[t] = P(X = site of padded index t-1)^(m+1)
    pw = _pw(np.diff(padded, prepend=padded[0]), m)
    minus = np.zeros(L)
    for r in range(1, rgt + 1):
        tail = step.tail_ge(r)
        if tail:
            minus[r - 1 :] += pw[: L - r + 1] * tail
    plus = np.zeros(L)
    for r in range(0, lft):
        tail = step.tail_lt(-r)
        if tail:
            plus[: L - r - 1] += pw[r + 1 :] * tail
    return padded - minus + plus, offset - lft


def step_general(F, step: StepLaw, params: ModelParams, offset: int = 0) -> CdfStep:
    """One step of the CDF recursion for an arbitrary bounded step law on ``[-l, s]``.

    ``F'_k = F_k - sum_{j=k-s}^{k-1} p_j^(m+1) P(D >= k-j)
                 + sum_{j=k}^{k+l-1} p_j^(m+1) P(D < k-j)``

    with ``p_j = F_{j+1} - F_j``. The window grows by ``l`` sites on the left
    and ``s`` on the right; ``offset`` of the result shifts accordingly. Unlike
    the Bernoulli case the output need not be monotone in the inputs' order;
    ``monotone``/``violations`` on the result report whether the output CDF
    itself stays non-decreasing.
    """
    F = _check_cdf(F)
    out, off = _general_raw(F, offset, step, params.m)
    return _finish(out, off)


def step_pmf(d: LatticeDist, params: ModelParams) -> LatticeDist:
    """``p'_k = p_k - q (p_k^(m+1) - p_{k-1}^(m+1))``; extended atoms are frozen."""
    p = np.append(d.mass, 0.0)
    pw = _pw(p, params.m)
    flux = np.concatenate(([0.0], pw[:-1]))
    new = p - params.q * (pw - flux)
    return LatticeDist(d.offset, new, d.mass_neg_inf, d.mass_pos_inf)


def binomial_tail(p: np.ndarray, m: int, l: int) -> np.ndarray:
    """``P(Binomial(m, p) >= l)`` by direct summation."""
    p = np.asarray(p, dtype=float)
    out = np.zeros_like(p)
    for i in range(l, m + 1):
        out += math.comb(m, i) * p**i * (1.0 - p) ** (m - i)
    return out


def step_l_of_m(d: LatticeDist, params: ModelParams, l: int) -> LatticeDist:
    """One Bernoulli(q) step where at least ``l`` of the ``m`` copies must match.

    ``p'_k = p_k - q p_k T(p_k) + q p_{k-1} T(p_{k-1})``, ``T(p) = P(Bin(m, p) >= l)``.
    """
    if not params.integer_m:
        raise ValueError("the l-of-m variant needs an integer m")
    m = int(params.m)
    if not (1 <= l <= m):
        raise ValueError(f"need 1 <= l <= m, got l={l}, m={m}")
    p = np.append(d.mass, 0.0)
    move = params.q * p * binomial_tail(p, m, l)
    new = p - move
    new[1:] += move[:-1]
    return LatticeDist(d.offset, new, d.mass_neg_inf, d.mass_pos_inf)


def _trim_cdf(F: np.ndarray, offset: int) -> tuple[np.ndarray, int]:
    # drop edge sites holding < TRIM_THRESHOLD, folding them into the neighbour;
    # F[0] and F[-1] (the extended atoms) are kept bit-exact
    inc = np.diff(F)
    big = np.flatnonzero(inc >= TRIM_THRESHOLD)
    if big.size == 0:
        return F, offset
    lo, hi = int(big[0]), int(big[-1])
    if lo == 0 and hi == inc.size - 1:
        return F, offset
    core = F[lo + 1 : hi + 1]
    return np.concatenate(([F[0]], core, [F[-1]])), offset + lo


def evolve_iter(
    d: LatticeDist,
    step: StepLaw | None,
    params: ModelParams,
    times: Iterable[int],
) -> Iterator[tuple[int, LatticeDist]]:
    """Yield ``(n, law of X_n)`` for each requested ``n`` (sorted ascending).

    Iterates the general CDF recursion; ``step=None`` means Bernoulli(params.q).
    When a step law is given it alone decides the moves (``params.q`` is not
    consulted).
    """
    step = StepLaw.bernoulli(params.q) if step is None else step
    wanted = sorted(set(int(t) for t in times))
    if wanted and wanted[0] < 0:
        raise ValueError("times must be >= 0")
    F, off = d.cdf_values(), d.offset
    done = 0
    for target in wanted:
        for _ in range(target - done):
            F, off = _general_raw(F, off, step, params.m)
            F, off = _trim_cdf(F, off)
        done = target
        yield target, LatticeDist.from_cdf(F, off)


def evolve(d: LatticeDist, step: StepLaw | None, params: ModelParams, n: int) -> LatticeDist:
    """Law of ``X_n`` started from ``d``; ``n = 0`` returns ``d`` itself."""
    if n < 0:
        raise ValueError("n must be >= 0")
    if n == 0:
        return d
    return next(evolve_iter(d, step, params, [n]))[1]


def evolve_l_of_m(d: LatticeDist, params: ModelParams, l: int, times: Iterable[int]):
    wanted = sorted(set(int(t) for t in times))
    cur, done = d, 0
    for target in wanted:
        for _ in range(target - done):
            cur = step_l_of_m(cur, params, l)
        done = target
        yield target, cur


# analytic constants


def p_star(params: ModelParams) -> float:
    """``(1 / (q (m+1)))^(1/m)``: atoms at most this size keep the Bernoulli scheme monotone."""
    return (1.0 / (params.q * (params.m + 1.0))) ** (1.0 / params.m)


def f_map(p, params: ModelParams):
    """``p - q p^(m+1)``, the one-step image of an atom whose left neighbour is empty."""
    return p - params.q * np.power(p, params.m + 1.0)


def g_func(a, b, params: ModelParams):
    return f_map(a, params) - f_map(b, params)


class RelaxationConstants(NamedTuple):
    C1: float
    C2: float
    C3: float
    N1: int

    @property
    def C(self) -> float:
        return min(self.C1, self.C2, self.C3)


def relaxation_bound(params: ModelParams) -> RelaxationConstants:
    """Constants after which every law on Z has all atoms at most ``p*``.

    If the largest atom exceeds ``p*`` it shrinks by at least
    ``C = min(C1, C2, C3)`` per step, so ``N1 = ceil((1 - p*) / C)`` steps
    suffice. ``N1 = 0`` when ``p* >= 1``.
    """
    ps = p_star(params)
    m, q = params.m, params.q
    C1 = ps - 0.5
    C2 = q * (ps ** (m + 1.0) - 0.5 ** (m + 1.0))
    C3 = min(float(g_func(ps, 1.0 - ps, params)), 1.0 - q)
    if ps >= 1.0:
        return RelaxationConstants(C1, C2, C3, 0)
    ratio = (1.0 - ps) / min(C1, C2, C3)
    # absorb round-off when the ratio is an exact integer (e.g. m=1, q=0.9 gives 40)
    return RelaxationConstants(C1, C2, C3, max(0, math.ceil(ratio - 1e-9)))


def monotone_region_bound(step: StepLaw, params: ModelParams) -> float | None:
    """Largest ``L`` such that the one-step CDF map is non-decreasing in every
    argument whenever all increments lie in ``[0, L]``.

    For ``|D| <= 1`` the cross derivatives are always non-negative and the
    diagonal one is ``1 - (m+1)(P(D=1) a^m + P(D=-1) b^m)``, so
    ``L = (1 / ((m+1)(P(D=1) + P(D=-1))))^(1/m)``; for Bernoulli(q) this is p*.
    Any step with ``|D| >= 2`` admits configurations (two equal CDF values next
    to a strict increase) where a cross derivative is negative for arbitrarily
    small increments, so ``None`` is returned. ``inf`` means ``D = 0`` a.s.
    """
    if step.left > 1 or step.right > 1:
        return None
    rate = step.prob(1) + step.prob(-1)
    if rate == 0:
        return math.inf
    return (1.0 / ((params.m + 1.0) * rate)) ** (1.0 / params.m)


@dataclass(frozen=True)
class Counterexample:
    """Two ordered CDFs whose one-step images are no longer ordered.

    ``lower <= upper`` pointwise on the common window starting at ``offset``
    (so the law of ``lower`` stochastically dominates that of ``upper``), but
    after one step ``image_lower > image_upper`` at site ``site``.
    """

    lower: np.ndarray
    upper: np.ndarray
    offset: int
    site: int
    image_lower: float
    image_upper: float
    source: str

    @property
    def gap(self) -> float:
        return self.image_lower - self.image_upper

    def lower_dist(self) -> LatticeDist:
        return LatticeDist.from_cdf(self.lower, self.offset)

    def upper_dist(self) -> LatticeDist:
        return LatticeDist.from_cdf(self.upper, self.offset)


def _violation(lower, upper, offset, step, params, source, tol) -> Counterexample | None:
    a, off = _general_raw(lower, offset, step, params.m)
    b, _ = _general_raw(upper, offset, step, params.m)
    gap = a - b
    i = int(np.argmax(gap))
    if gap[i] > tol:
        return Counterexample(
            np.array(lower), np.array(upper), offset, off + i, float(a[i]), float(b[i]), source
        )
    return None


def _pieces(mass: float, cap: float) -> list[float]:
    n = max(1, math.ceil(mass / cap - 1e-12))
    return [mass / n] * n


def _construct(step: StepLaw, params: ModelParams, cap: float, tol: float) -> Counterexample | None:
    # pair with F_k = F_{k-1} > F_{k-2} where lowering F_{k-1} raises F'_k
    if step.tail_ge(2) == 0:
        return None
    a = min(0.5, 0.95 * cap)
    x = min(0.1, 0.95 * cap, 1.0 - a)
    rest = _pieces(1.0 - a - x, 0.95 * cap) if 1.0 - a - x > 0 else []
    delta = a / 5.0
    while delta > 1e-6 * a:
        upper_pmf = [x, a, 0.0] + rest
        lower_pmf = [x, a - delta, delta] + rest
        upper = np.concatenate(([0.0], np.cumsum(upper_pmf)))
        lower = np.concatenate(([0.0], np.cumsum(lower_pmf)))
        upper[-1] = lower[-1] = 1.0
        found = _violation(lower, upper, 0, step, params, "construction", tol)
        if found is not None:
            return found
        delta /= 2.0
    return None


def _reflect(cdf: np.ndarray, offset: int) -> tuple[np.ndarray, int]:
    # law of -X; cdf[i] = P(X < offset + i), constant outside, no extended atoms
    mass = np.diff(cdf)[::-1]
    new_off = -(offset + cdf.size - 2)
    return np.concatenate(([0.0], np.cumsum(mass))), new_off


def _random_pmf(rng: np.random.Generator, width: int, cap: float) -> np.ndarray:
    p = rng.dirichlet(np.full(width, rng.choice([0.3, 1.0, 3.0])))
    if rng.random() < 0.3:
        # concentrate near the cap to probe the edge of the admissible region
        i = rng.integers(width)
        p = 0.2 * p
        p[i] += 0.8
    top = p.max()
    limit = cap * (1.0 - 1e-9)
    if top > limit:
        lam = (limit - 1.0 / width) / (top - 1.0 / width)
        p = lam * p + (1.0 - lam) / width
    return p / p.sum()


def find_monotonicity_violation(
    step: StepLaw,
    params: ModelParams,
    trials: int,
    seed: int,
    max_increment: float | None = None,
    tol: float = MONO_TOL,
) -> Counterexample | None:
    """Search for an order-reversing pair under one step of the CDF recursion.

    Inputs are restricted to CDFs whose increments (atoms) are below
    ``max_increment``; by default this is ``monotone_region_bound`` when it
    exists and 1 otherwise. The construction from the derivative argument is
    tried first (steps with ``|D| >= 2``), then ``trials`` random ordered pairs
    built as ``lower = min(upper, H)``. Gaps at or below ``tol`` are treated as
    rounding noise.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if max_increment is None:
        bound = monotone_region_bound(step, params)
        max_increment = 1.0 if bound is None else min(1.0, bound)
    cap = min(1.0, max_increment)

    found = _construct(step, params, cap, tol)
    if found is None and step.tail_lt(-1) > 0:
        mirrored = _construct(step.reflected(), params, cap, tol)
        if mirrored is not None:
            # the evolution commutes with reflection, which swaps the order
            up, off = _reflect(mirrored.lower, mirrored.offset)
            lo, _ = _reflect(mirrored.upper, mirrored.offset)
            found = _violation(lo, up, off, step, params, "construction", tol)
    if found is not None:
        return found

    rng = np.random.default_rng(seed)
    for _ in range(trials):
        width = int(rng.integers(2, 10))
        p_up = _random_pmf(rng, width, cap)
        upper = np.concatenate(([0.0], np.cumsum(p_up)))
        if rng.random() < 0.5:
            h = np.concatenate(([0.0], np.cumsum(_random_pmf(rng, width, cap))))
        else:
            # push a little mass one site up
            i = int(rng.integers(width - 1))
            moved = p_up.copy()
            dm = moved[i] * rng.random()
            moved[i] -= dm
            moved[i + 1] += dm
            if moved[i + 1] >= cap:
                continue
            h = np.concatenate(([0.0], np.cumsum(moved)))
        upper[-1] = h[-1] = 1.0
        lower = np.minimum(upper, h)
        found = _violation(lower, upper, 0, step, params, "random", tol)
        if found is not None:
            return found
    return None

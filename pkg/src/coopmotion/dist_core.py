"""Probability distributions on the extended integers Z ∪ {-inf, +inf}.

CDFs follow the strict convention ``F(k) = P(X < k)`` throughout the package.
A distribution is stored as a dense mass array over a window of consecutive
sites plus two extended atoms at -inf and +inf.
"""

from __future__ import annotations

import math
from collections.abc import Callable, Iterable, Mapping, Sequence
from dataclasses import dataclass, field

import numpy as np

MASS_TOL = 1e-12
TRIM_THRESHOLD = 1e-300


class DistributionError(ValueError):
    """Raised when a distribution violates non-negativity or normalization."""


@dataclass(frozen=True)
class ModelParams:
    """Cooperation exponent ``m`` (real, >= 1) and move probability ``q``."""

    m: float
    q: float

    def __post_init__(self) -> None:
        if not (self.m >= 1):
            raise ValueError(f"m must be >= 1, got {self.m}")
        if not (0.0 < self.q < 1.0):
            raise ValueError(f"q must lie in (0, 1), got {self.q}")

    @property
    def integer_m(self) -> bool:
        return float(self.m).is_integer()


@dataclass(frozen=True, eq=False)
class LatticeDist:
    """Law on Z ∪ {-inf, +inf}.

    ``mass[i]`` is ``P(X = offset + i)``; ``mass_neg_inf`` and ``mass_pos_inf``
    are the extended atoms. Instances are immutable: the mass array is copied
    and made read-only on construction.
    """

    offset: int
    mass: np.ndarray
    mass_neg_inf: float = 0.0
    mass_pos_inf: float = 0.0
    _cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        mass = np.array(self.mass, dtype=float).ravel()
        if mass.size and mass.min() < 0:
            raise DistributionError(f"negative mass {mass.min():.3e}")
        if self.mass_neg_inf < 0 or self.mass_pos_inf < 0:
            raise DistributionError("negative extended atom")
        mass, offset = _trim(mass, int(self.offset))
        total = float(mass.sum()) + self.mass_neg_inf + self.mass_pos_inf
        if abs(total - 1.0) > MASS_TOL:
            raise DistributionError(f"total mass {total!r} differs from 1 by more than {MASS_TOL}")
        mass.setflags(write=False)
        cum = np.concatenate(([0.0], np.cumsum(mass)))
        cum.setflags(write=False)
        object.__setattr__(self, "mass", mass)
        object.__setattr__(self, "offset", offset)
        object.__setattr__(self, "mass_neg_inf", float(self.mass_neg_inf))
        object.__setattr__(self, "mass_pos_inf", float(self.mass_pos_inf))
        object.__setattr__(self, "_cum", cum)

    # construction helpers

    @classmethod
    def delta(cls, k: int = 0) -> LatticeDist:
        return cls(k, np.array([1.0]))

    @classmethod
    def uniform(cls, lo: int, hi: int) -> LatticeDist:
        """Uniform law on ``{lo, ..., hi}`` (inclusive)."""
        n = hi - lo + 1
        if n < 1:
            raise ValueError("empty range")
        return cls(lo, np.full(n, 1.0 / n))

    @classmethod
    def from_pairs(
        cls,
        pairs: Mapping[int, float] | Iterable[tuple[int, float]],
        neg_inf: float = 0.0,
        pos_inf: float = 0.0,
    ) -> LatticeDist:
        items = list(pairs.items()) if isinstance(pairs, Mapping) else list(pairs)
        if not items:
            return cls(0, np.zeros(0), neg_inf, pos_inf)
        sites = [int(k) for k, _ in items]
        lo, hi = min(sites), max(sites)
        mass = np.zeros(hi - lo + 1)
        for k, p in items:
            mass[int(k) - lo] += float(p)
        return cls(lo, mass, neg_inf, pos_inf)

    @classmethod
    def from_cdf(cls, cdf: np.ndarray, offset: int) -> LatticeDist:
        """Build from ``cdf[i] = P(X < offset + i)``, constant outside the array.

        ``cdf[0]`` is the -inf atom and ``1 - cdf[-1]`` the +inf atom. Rounding
        noise below ``MASS_TOL`` in the differences is clipped to zero; larger
        decreases raise.
        """
        cdf = np.asarray(cdf, dtype=float)
        mass = np.diff(cdf)
        if mass.size and mass.min() < -MASS_TOL:
            raise DistributionError(f"CDF decreases by {-mass.min():.3e}")
        mass = np.clip(mass, 0.0, None)
        neg = float(cdf[0])
        pos = 1.0 - float(cdf[-1])
        if -MASS_TOL <= pos < 0:
            pos = 0.0
        if -MASS_TOL <= neg < 0:
            neg = 0.0
        return cls(offset, mass, neg, pos)

    # views

    @property
    def support_max(self) -> int:
        """Last site of the window (offset - 1 when the finite part is empty)."""
        return self.offset + self.mass.size - 1

    def pmf(self, k: int) -> float:
        i = k - self.offset
        if 0 <= i < self.mass.size:
            return float(self.mass[i])
        return 0.0

    def cdf(self, k):
        """``P(X < k)`` for an integer or an integer array ``k``."""
        idx = np.clip(np.asarray(k) - self.offset, 0, self.mass.size)
        out = self.mass_neg_inf + self._cum[idx]
        return float(out) if np.ndim(out) == 0 else out

    def cdf_values(self) -> np.ndarray:
        """``F[i] = P(X < offset + i)`` for ``i = 0..len(mass)``."""
        return self.mass_neg_inf + self._cum

    def finite_mass(self) -> float:
        return float(self._cum[-1])

    def items(self) -> list[tuple[int, float]]:
        return [(self.offset + i, float(p)) for i, p in enumerate(self.mass) if p > 0]

    def to_text(self) -> str:
        lines = [f"{k} {p!r}" for k, p in self.items()]
        if self.mass_neg_inf:
            lines.insert(0, f"-inf {self.mass_neg_inf!r}")
        if self.mass_pos_inf:
            lines.append(f"+inf {self.mass_pos_inf!r}")
        return "\n".join(lines) + "\n"

    def allclose(self, other: LatticeDist, atol: float = 1e-12) -> bool:
        lo = min(self.offset, other.offset)
        hi = max(self.support_max, other.support_max)
        ks = np.arange(lo, hi + 2)
        return (
            abs(self.mass_neg_inf - other.mass_neg_inf) <= atol
            and abs(self.mass_pos_inf - other.mass_pos_inf) <= atol
            and bool(np.allclose(self.cdf(ks), other.cdf(ks), rtol=0, atol=atol))
        )

    def __repr__(self) -> str:
        ext = ""
        if self.mass_neg_inf or self.mass_pos_inf:
            ext = f", -inf={self.mass_neg_inf:.6g}, +inf={self.mass_pos_inf:.6g}"
        return f"LatticeDist(offset={self.offset}, n_sites={self.mass.size}{ext})"


def _trim(mass: np.ndarray, offset: int) -> tuple[np.ndarray, int]:
    # negligible edge atoms are folded into the neighbouring kept cell, so the
    # total is unchanged to the last bit
    if mass.size == 0:
        return mass.copy(), offset
    big = np.nonzero(mass >= TRIM_THRESHOLD)[0]
    if big.size == 0:
        # all atoms negligible: keep the largest so the finite mass survives
        if mass.sum() == 0:
            return np.zeros(0), offset
        big = np.array([int(np.argmax(mass))])
    lo, hi = int(big[0]), int(big[-1])
    if lo == 0 and hi == mass.size - 1:
        return mass.copy(), offset
    kept = mass[lo : hi + 1].copy()
    kept[0] += mass[:lo].sum()
    kept[-1] += mass[hi + 1 :].sum()
    return kept, offset + lo


def cdf_at(d: LatticeDist, k: int) -> float:
    """``P(X < k)``, including the mass at -inf."""
    return d.cdf(int(k))


def max_atom(d: LatticeDist) -> float:
    """Largest single atom, the extended atoms included."""
    finite = float(d.mass.max()) if d.mass.size else 0.0
    return max(finite, d.mass_neg_inf, d.mass_pos_inf)


def dominates(d1: LatticeDist, d2: LatticeDist, atol: float = 0.0) -> bool:
    """True iff ``d1`` stochastically dominates ``d2``.

    That is ``P(X1 < k) <= P(X2 < k)`` for every ``k``. Only sites in the joint
    window widened by one on each side need checking, because both CDFs are
    constant outside it.
    """
    lo = min(d1.offset, d2.offset) - 1
    hi = max(d1.support_max, d2.support_max) + 2
    ks = np.arange(lo, hi + 1)
    if np.any(d1.cdf(ks) > d2.cdf(ks) + atol):
        return False
    # the limits at +-inf are the extended atoms
    return (
        d1.mass_neg_inf <= d2.mass_neg_inf + atol
        and 1.0 - d1.mass_pos_inf <= 1.0 - d2.mass_pos_inf + atol
    )


def rescaled_cdf(d: LatticeDist, n: int, m: float, x, factor: float = 1.0):
    """``P(X / (factor * n**(1/(m+1))) < x)``.

    Uses the smallest integer ``k >= x * factor * n**(1/(m+1))``, so
    ``P(X < k)`` is exactly the strict-inequality event. Accepts scalar or
    array ``x``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    scale = factor * n ** (1.0 / (m + 1.0))
    k = np.ceil(np.asarray(x, dtype=float) * scale).astype(np.int64)
    return d.cdf(k)


def sup_distance(
    f: Callable[[float], float], g: Callable[[float], float], grid: Sequence[float]
) -> float:
    grid = list(grid)
    if not grid:
        raise ValueError("empty grid")
    return max(abs(float(f(x)) - float(g(x))) for x in grid)


def sup_distance_arrays(fa: np.ndarray, ga: np.ndarray) -> float:
    fa = np.asarray(fa, dtype=float)
    if fa.size == 0:
        raise ValueError("empty grid")
    return float(np.max(np.abs(fa - np.asarray(ga, dtype=float))))


def _parse_site(token: str) -> int | str:
    t = token.strip().lower()
    if t in ("-inf", "-infinity"):
        return "-inf"
    if t in ("+inf", "inf", "+infinity", "infinity"):
        return "+inf"
    return int(t)


def _assemble(entries: list[tuple[int | str, float]]) -> LatticeDist:
    finite: dict[int, float] = {}
    neg = pos = 0.0
    for site, p in entries:
        if not math.isfinite(p) or p < 0:
            raise DistributionError(f"invalid mass {p!r} at {site}")
        if site == "-inf":
            neg += p
        elif site == "+inf":
            pos += p
        else:
            finite[site] = finite.get(site, 0.0) + p
    return LatticeDist.from_pairs(finite, neg, pos)


def parse_dist(text: str) -> LatticeDist:
    """Parse the line format: ``k p`` per line, plus optional ``-inf p`` / ``+inf p``.

    Blank lines and ``#`` comments are ignored.
    """
    entries = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        if len(parts) != 2:
            raise DistributionError(f"line {lineno}: expected 'site mass', got {raw!r}")
        try:
            entries.append((_parse_site(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise DistributionError(f"line {lineno}: {exc}") from None
    return _assemble(entries)


def parse_pairs(text: str) -> LatticeDist:
    """Parse the inline form ``"0:0.5,1:0.25,+inf:0.25"``."""
    entries = []
    for chunk in text.split(","):
        chunk = chunk.strip()
        if not chunk:
            continue
        site, sep, p = chunk.rpartition(":")
        if not sep:
            raise DistributionError(f"expected site:mass, got {chunk!r}")
        try:
            entries.append((_parse_site(site), float(p)))
        except ValueError as exc:
            raise DistributionError(str(exc)) from None
    return _assemble(entries)

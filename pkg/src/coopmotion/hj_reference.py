"""Reference solutions of ``u_t + q |u_x|^(m+1) = 0``.

Closed forms for step initial data ``a 1{x <= 0} + b 1{x > 0}``, the
Legendre transform of ``H(p) = q |p|^(m+1)``, and grid-based Hopf-Lax and
Legendre evaluators used as independent cross-checks.
"""

from __future__ import annotations

import math
import warnings
from collections.abc import Callable, Sequence
from dataclasses import dataclass

import numpy as np

from .dist_core import ModelParams

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


def profile_coefficient(params: ModelParams) -> float:
    """``c = m q^(-1/m) (m+1)^(-(m+1)/m)``."""
    m, q = params.m, params.q
    return m * q ** (-1.0 / m) * (m + 1.0) ** (-(m + 1.0) / m)


def hamiltonian(p, params: ModelParams):
    return params.q * np.abs(p) ** (params.m + 1.0)


def legendre_closed(p, params: ModelParams):
    """``H*(p) = q^(-1/m) |p|^((m+1)/m) m / (m+1)^((m+1)/m)``."""
    m, q = params.m, params.q
    return q ** (-1.0 / m) * np.abs(p) ** ((m + 1.0) / m) * m / (m + 1.0) ** ((m + 1.0) / m)


def legendre_numeric(
    p: float,
    params: ModelParams,
    grid_half_width: float | None = None,
    grid_points: int = 1_000_001,
) -> float:
    """Grid maximum of ``a p - q |a|^(m+1)`` over ``a`` in ``[-W, W]``.

    With ``grid_half_width=None`` the window starts at 1 and doubles until the
    maximiser is interior.
    """
    if grid_points < 3:
        raise ValueError("need at least 3 grid points")
    adaptive = grid_half_width is None
    W = 1.0 if adaptive else float(grid_half_width)
    if not W > 0:
        raise ValueError("grid half-width must be positive")
    for _ in range(64):
        alpha = np.linspace(-W, W, grid_points)
        vals = alpha * p - hamiltonian(alpha, params)
        i = int(np.argmax(vals))
        if not adaptive or 0 < i < grid_points - 1:
            return float(vals[i])
        W *= 2.0
    raise RuntimeError("Legendre maximiser not bracketed")


def _eval(u0: Callable, y: np.ndarray) -> np.ndarray:
    try:
        out = np.asarray(u0(y), dtype=float)
        if out.shape == y.shape:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([float(u0(v)) for v in y])


def _golden_min(fn: Callable[[float], float], lo: float, hi: float, iters: int = 80):
    a, b = lo, hi
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fn(c), fn(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fn(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fn(d)
    return (c, fc) if fc <= fd else (d, fd)


def transport_scale(t: float, params: ModelParams, budget: float = 1.0) -> float:
    """Speed ``v`` with ``t H*(v) = budget``: displacements beyond ``t v`` cost more than ``budget``."""
    unit = float(legendre_closed(1.0, params))
    return (budget / (t * unit)) ** (params.m / (params.m + 1.0))


def hopf_lax_numeric(
    u0: Callable,
    x: float,
    t: float,
    params: ModelParams,
    y_window: tuple[float, float] | None = None,
    y_points: int = 20001,
) -> float:
    """``inf_y { u0(y) + t H*((x - y) / t) }`` by grid search plus golden-section refinement.

    ``H*`` here is evaluated by the closed form. The default window is
    ``x +- 5 t v`` where ``t H*(v) = 1``, enough for initial data with
    oscillation at most 1. When the grid minimum sits on the window edge the
    window is doubled, at most three times, before giving up.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    if y_points < 3:
        raise ValueError("need at least 3 grid points")
    if y_window is None:
        half = 5.0 * t * transport_scale(t, params)
        lo, hi = x - half, x + half
    else:
        lo, hi = map(float, y_window)
        if not hi > lo:
            raise ValueError("empty y window")

    def cost(y):
        return _eval(u0, np.atleast_1d(y)) + t * legendre_closed((x - np.atleast_1d(y)) / t, params)

    for attempt in range(4):
        y = np.linspace(lo, hi, y_points)
        vals = cost(y)
        i = int(np.argmin(vals))
        if 0 < i < y_points - 1:
            break
        if attempt == 3:
            raise RuntimeError(f"Hopf-Lax minimiser on the window edge at x={x}, t={t}")
        mid, half = (lo + hi) / 2.0, hi - lo
        lo, hi = mid - half, mid + half
        warnings.warn("Hopf-Lax window doubled", RuntimeWarning, stacklevel=2)
    best = float(vals[i])
    _, refined = _golden_min(lambda v: float(cost(v)[0]), float(y[i - 1]), float(y[i + 1]))
    return min(best, refined)


@dataclass(frozen=True)
class PiecewiseSolution:
    """Solution started from ``a 1{x <= 0} + b 1{x > 0}`` (``0 <= a < b <= 1``)."""

    a: float
    b: float
    params: ModelParams

    def __post_init__(self) -> None:
        if not (0.0 <= self.a < self.b <= 1.0):
            raise ValueError(f"need 0 <= a < b <= 1, got a={self.a}, b={self.b}")

    def edge(self, t: float) -> float:
        """Right end of the rising branch: ``c (x^(m+1)/t)^(1/m) = b - a``."""
        m = self.params.m
        c = profile_coefficient(self.params)
        return (t * ((self.b - self.a) / c) ** m) ** (1.0 / (m + 1.0))

    def __call__(self, x, t: float):
        x = np.asarray(x, dtype=float)
        a, b, m = self.a, self.b, self.params.m
        if t == 0:
            out = np.where(x <= 0, a, b)
        elif t < 0:
            raise ValueError("t must be >= 0")
        else:
            c = profile_coefficient(self.params)
            xp = np.clip(x, 0.0, None)
            rise = c * (xp ** (m + 1.0) / t) ** (1.0 / m)
            out = np.where(x <= 0, a, np.where(rise <= b - a, a + rise, b))
        return float(out) if out.ndim == 0 else out


def u_ab_closed(x, t: float, a: float, b: float, params: ModelParams):
    """Three-branch closed form: ``a`` left of 0, ``a + c (x^(m+1)/t)^(1/m)`` while below ``b``, then ``b``."""
    if a >= b:
        raise ValueError("need a < b")
    return PiecewiseSolution(a, b, params)(x, t)


def beta_scale(params: ModelParams) -> float:
    """``(m+1) (q / m^m)^(1/(m+1))``, the right end of the limit law's support."""
    m, q = params.m, params.q
    return (m + 1.0) * (q / m**m) ** (1.0 / (m + 1.0))


def beta_limit_cdf(x, params: ModelParams):
    """CDF of ``beta_scale * B`` with ``B ~ Beta((m+1)/m, 1)``, whose CDF is ``z^((m+1)/m)``.

    Written as ``x^((m+1)/m) / ((m+1)^((m+1)/m) (q/m^m)^(1/m))`` so that for
    ``m = 1`` it is ``x^2 / (4q)`` with no intermediate root; 1 from the edge on.
    """
    m, q = params.m, params.q
    x = np.asarray(x, dtype=float)
    denom = (m + 1.0) ** ((m + 1.0) / m) * (q / m**m) ** (1.0 / m)
    inside = np.clip(x, 0.0, None) ** ((m + 1.0) / m) / denom
    out = np.where(x >= beta_scale(params), 1.0, np.minimum(inside, 1.0))
    return float(out) if out.ndim == 0 else out


def extended_limit_cdf(x, a: float, b: float, params: ModelParams):
    """Limit ``F^{a,b}`` when ``a`` sits at -inf and ``1 - b`` at +inf."""
    if a >= b:
        raise ValueError("need a < b")
    c = profile_coefficient(params)
    xp = np.clip(np.asarray(x, dtype=float), 0.0, None)
    rise = c * xp ** ((params.m + 1.0) / params.m)
    out = np.where(np.asarray(x) <= 0, a, a + np.minimum(rise, b - a))
    return float(out) if out.ndim == 0 else out


def mixture_limit_cdf(x, g: int, pi: Sequence[float], params: ModelParams):
    """Limit CDF of ``X_n / (g n^(1/(m+1)))`` for the g-scaled Bernoulli step.

    Residue class ``r`` carries mass ``pi[r]`` and, given it, the position is
    ``(pi_r / c)^(m/(m+1)) B``; each term ``pi_r * P(...)`` is the finite part
    of ``F^{1 - pi_r, 1}``.
    """
    pi = np.asarray(pi, dtype=float)
    if g < 1 or pi.size != g:
        raise ValueError("pi must have exactly g entries")
    if pi.min() < 0 or abs(pi.sum() - 1.0) > 1e-12:
        raise ValueError("pi must be a probability vector")
    m = params.m
    x = np.asarray(x, dtype=float)
    total = np.zeros_like(x)
    c = profile_coefficient(params)
    for w in pi:
        if w == 0:
            continue
        width = (w / c) ** (m / (m + 1.0))
        z = np.clip(x / width, 0.0, 1.0)
        total = total + w * z ** ((m + 1.0) / m)
    return float(total) if total.ndim == 0 else total


def ramp_solution_quadratic(x, t: float, params: ModelParams):
    """Solution from ``u0 = clamp(x, 0, 1)`` when ``m = 1``.

    With ``H*(p) = p^2 / (4q)``: ``x^2 / (4qt)`` on ``[0, 2qt]``, then
    ``x - q t``, everything capped at 1 (reached by not moving from ``y >= 1``).
    """
    if params.m != 1:
        raise ValueError("closed form only for m = 1")
    q = params.q
    x = np.asarray(x, dtype=float)
    out = np.where(
        x <= 0,
        0.0,
        np.minimum(np.where(x <= 2 * q * t, x**2 / (4 * q * t), x - q * t), 1.0),
    )
    return float(out) if out.ndim == 0 else out

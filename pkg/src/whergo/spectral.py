"""Spectral relation, paired zeros in the tau plane and pole partitions.

The contour Gamma is never represented geometrically: every statement used
by the factorisation engine depends only on which member of each zero pair
{tau0, -1/tau0} is designated "inside".  A PolePartition records exactly
that choice.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegeneratePair, InadmissiblePartition, OutOfChart, ZeroTau
from .poly import poly_eval, poly_mul, poly_shift, poly_trim, quadratic_roots

PAIR_TOL = 1e-10

BRANCH_MINUS = "minus"
BRANCH_PLUS = "plus"


@dataclass(frozen=True)
class SpectralPoint:
    """Weyl coordinates (rho > 0, v) plus the signature flag lambda."""

    rho: float
    v: float
    lam: int = 1

    def __post_init__(self):
        if not self.rho > 0.0:
            raise ValueError(f"rho must be strictly positive, got {self.rho}")
        if self.lam not in (1, -1):
            raise ValueError("lambda must be +1 or -1")


def spectral_map(pt: SpectralPoint, tau) -> complex:
    """omega = v + (lam/2) * rho * (lam - tau^2) / tau."""
    tau = complex(tau)
    if tau == 0:
        raise ZeroTau("spectral map undefined at tau = 0")
    return pt.v + 0.5 * pt.lam * pt.rho * (pt.lam - tau * tau) / tau


def pair_quadratic(pt: SpectralPoint, omega0) -> np.ndarray:
    """Numerator of omega(tau) - omega0 as a quadratic in tau (ascending)."""
    return np.array([pt.rho / 2.0, pt.v - complex(omega0), -pt.rho / 2.0])


@dataclass(frozen=True)
class ZeroPair:
    """One zero pair {tau_in, tau_out = -lam/tau_in} and its omega origin."""

    tau_in: complex
    tau_out: complex
    omega0: complex
    branch: str = BRANCH_MINUS

    def members(self):
        return (self.tau_in, self.tau_out)

    def swapped(self) -> "ZeroPair":
        other = BRANCH_PLUS if self.branch == BRANCH_MINUS else BRANCH_MINUS
        return ZeroPair(self.tau_out, self.tau_in, self.omega0, other)


def zero_pair_for(pt: SpectralPoint, omega0, branch: str = BRANCH_MINUS) -> ZeroPair:
    """Zero pair of the quadratic for omega0, with the chosen branch inside.

    branch "minus" designates (v - omega0 - sqrt((v-omega0)^2 + rho^2))/rho,
    matching the standard Kerr contour convention.  Rejects degenerate pairs,
    i.e. parameter points where v +- i*rho hits omega0.
    """
    if pt.lam != 1:
        raise ValueError("zero pairs are defined for lambda = +1 only")
    if branch not in (BRANCH_MINUS, BRANCH_PLUS):
        raise ValueError(f"unknown branch {branch!r}")
    omega0 = complex(omega0)
    scale = max(1.0, abs(omega0), abs(pt.v), pt.rho)
    if min(abs(omega0 - (pt.v + 1j * pt.rho)), abs(omega0 - (pt.v - 1j * pt.rho))) < 1e-10 * scale:
        raise DegeneratePair(f"v +- i*rho coincides with omega-zero {omega0}")
    q = pair_quadratic(pt, omega0)
    r1, r2 = quadratic_roots(q[2], q[1], q[0])
    s = np.sqrt((pt.v - omega0) ** 2 + pt.rho ** 2 + 0j)
    target = ((pt.v - omega0) - s) / pt.rho if branch == BRANCH_MINUS else ((pt.v - omega0) + s) / pt.rho
    tau_in = r1 if abs(r1 - target) <= abs(r2 - target) else r2
    tau_out = -1.0 / tau_in
    if abs(tau_in - tau_out) < PAIR_TOL * max(1.0, abs(tau_in)):
        raise DegeneratePair(f"zero pair collapsed at tau = {tau_in}")
    return ZeroPair(tau_in, tau_out, omega0, branch)


@dataclass(frozen=True)
class PolePartition:
    """Inside/outside designation for every zero pair; stands in for Gamma."""

    pairs: tuple
    lam: int = 1

    def inside(self):
        return tuple(p.tau_in for p in self.pairs)

    def outside(self):
        return tuple(p.tau_out for p in self.pairs)

    def pair_for(self, omega0, rel=1e-9):
        for p in self.pairs:
            if abs(p.omega0 - complex(omega0)) <= rel * max(1.0, abs(omega0)):
                return p
        raise KeyError(f"no pair for omega0 = {omega0}")


def build_partition(pt: SpectralPoint, omega_zeros, branch_choices=None) -> PolePartition:
    """Build and validate a pole partition for the given omega-plane zeros.

    branch_choices is one tag per zero ("minus"/"plus"); defaults to all
    "minus".  Raises InadmissiblePartition when the chosen inside set
    collides with the outside set, in which case no admissible contour
    separates them.
    """
    omega_zeros = [complex(w) for w in omega_zeros]
    if branch_choices is None:
        branch_choices = [BRANCH_MINUS] * len(omega_zeros)
    if len(branch_choices) != len(omega_zeros):
        raise InadmissiblePartition("one branch choice required per omega zero")
    pairs = tuple(zero_pair_for(pt, w, b) for w, b in zip(omega_zeros, branch_choices))
    inside = [p.tau_in for p in pairs]
    outside = [p.tau_out for p in pairs]
    for i, t in enumerate(inside):
        scale = max(1.0, abs(t))
        for s in outside:
            if abs(t - s) < PAIR_TOL * scale:
                raise InadmissiblePartition(
                    f"inside point {t} collides with an outside point")
        for j, s in enumerate(inside):
            if j != i and abs(t - s) < PAIR_TOL * scale:
                raise InadmissiblePartition(
                    f"two inside points coincide at tau = {t}")
    for t in inside + outside:
        if abs(t) < PAIR_TOL:
            raise InadmissiblePartition("partition point at tau = 0")
    return PolePartition(pairs, pt.lam)


def compose_polynomial(pt: SpectralPoint, coeffs) -> tuple[np.ndarray, int]:
    """Compose p(omega) with the spectral relation.

    Returns (ptilde, k) with p(omega(tau)) = ptilde(tau) / tau^k and
    deg ptilde = 2k for a degree-k input.  Only lambda = +1 is supported.
    """
    if pt.lam != 1:
        raise ValueError("composition implemented for lambda = +1 only")
    p = poly_trim(coeffs)
    k = p.size - 1
    # W(tau) = tau * omega(tau) = rho/2 + v*tau - (rho/2) tau^2
    w = np.array([pt.rho / 2.0, pt.v, -pt.rho / 2.0], dtype=complex)
    acc = np.zeros(2 * k + 1, dtype=complex)
    wpow = np.ones(1, dtype=complex)
    for j in range(k + 1):
        if p[j] != 0:
            term = poly_shift(wpow * p[j], k - j)
            acc[: term.size] += term
        if j < k:
            wpow = poly_mul(wpow, w)
    return poly_trim(acc), k


def compose_polynomial_batch(rho, v, coeffs) -> np.ndarray:
    """Vectorised compose_polynomial over arrays of (rho, v).

    Returns an array of shape rho.shape + (2k+1,) of ptilde coefficients.
    """
    rho = np.asarray(rho, dtype=float)
    v = np.asarray(v, dtype=float)
    p = poly_trim(coeffs)
    k = p.size - 1
    shape = np.broadcast(rho, v).shape
    out = np.zeros(shape + (2 * k + 1,), dtype=complex)
    # running powers of W(tau) as batched coefficient arrays
    wpow = np.ones(shape + (1,), dtype=complex)
    w = np.stack([rho / 2.0 * np.ones(shape), v * np.ones(shape), -rho / 2.0 * np.ones(shape)], axis=-1)
    for j in range(k + 1):
        deg = wpow.shape[-1] - 1
        out[..., k - j: k - j + deg + 1] += p[j] * wpow
        if j < k:
            new = np.zeros(shape + (deg + 3,), dtype=complex)
            for i in range(3):
                new[..., i: i + deg + 1] += w[..., i: i + 1] * wpow
            wpow = new
    return out


def verify_composition(pt: SpectralPoint, coeffs, ptilde, k, n_samples: int = 5,
                       rel: float = 1e-11, seed: int = 2023) -> float:
    """Max relative residual of p(omega(tau)) - ptilde(tau)/tau^k at samples."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        tau = complex(rng.uniform(0.4, 2.0), rng.uniform(-1.0, 1.0))
        lhs = poly_eval(coeffs, spectral_map(pt, tau))
        rhs = poly_eval(ptilde, tau) / tau ** k
        worst = max(worst, abs(lhs - rhs) / max(1.0, abs(lhs)))
    if worst > rel:
        raise ArithmeticError(f"composition residual {worst:.2e} exceeds {rel:.1e}")
    return worst


# ---------------------------------------------------------------------------
# prolate spheroidal charts
# ---------------------------------------------------------------------------


def weyl_from_prolate_4d(u: float, y: float, c: float) -> tuple[float, float]:
    """v = u y, rho = sqrt((u^2 - c^2)(1 - y^2)); exterior chart u > c, |y| < 1."""
    if not (u > c and abs(y) < 1.0):
        raise OutOfChart(f"(u, y) = ({u}, {y}) outside exterior chart (c = {c})")
    return float(np.sqrt((u * u - c * c) * (1.0 - y * y))), u * y


def prolate_from_weyl_4d(rho: float, v: float, c: float) -> tuple[float, float]:
    rp = np.hypot(rho, v + c)
    rm = np.hypot(rho, v - c)
    u = 0.5 * (rp + rm)
    y = (rp - rm) / (2.0 * c)
    if not (u > c and abs(y) < 1.0):
        raise OutOfChart(f"(rho, v) = ({rho}, {v}) outside exterior chart")
    return float(u), float(y)


def weyl_from_prolate_5d(u: float, y: float, alpha: float) -> tuple[float, float]:
    """v = alpha u y, rho = alpha sqrt((u^2 - 1)(1 - y^2)); chart u > 1, |y| < 1."""
    if not (u > 1.0 and abs(y) < 1.0):
        raise OutOfChart(f"(u, y) = ({u}, {y}) outside exterior chart")
    return float(alpha * np.sqrt((u * u - 1.0) * (1.0 - y * y))), alpha * u * y


def prolate_from_weyl_5d(rho: float, v: float, alpha: float) -> tuple[float, float]:
    rp = np.hypot(rho, v + alpha)
    rm = np.hypot(rho, v - alpha)
    u = (rp + rm) / (2.0 * alpha)
    y = (rp - rm) / (2.0 * alpha)
    if not (u > 1.0 and abs(y) < 1.0):
        raise OutOfChart(f"(rho, v) = ({rho}, {v}) outside exterior chart")
    return float(u), float(y)

"""Poincare geometry of the unit disk.

Distances use  d(z, w) = ln((1 + t) / (1 - t)),  t = |z - w| / |1 - z conj(w)|,
and lengths use the matching density 2|dz| / (1 - |z|^2), so the length of a
diameter segment equals the distance between its endpoints.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import BoundaryOverflowError, DomainError

OVERFLOW_TOL = 1e-15
ARC_STEP = 1e-3


def _one_minus_abs2(z):
    r = np.abs(z)
    return (1 - r) * (1 + r)


def mobius_to_zero(a, z):
    """Disk automorphism (z - a) / (1 - conj(a) z) sending a to 0."""
    a = np.asarray(a, dtype=complex)
    z = np.asarray(z, dtype=complex)
    if np.any(np.abs(a) >= 1):
        raise DomainError("automorphism centre must lie in the open unit disk")
    out = (z - a) / (1 - np.conj(a) * z)
    return complex(out) if out.ndim == 0 else out


def distance_parts(z, w):
    """Return (t, 1 - t**2) computed stably.

    1 - t^2 = (1 - |z|^2)(1 - |w|^2) / |1 - z conj(w)|^2 keeps its relative
    accuracy near the boundary, where 1 - t itself would cancel.
    """
    # real-part form: swapping z and w only negates the exactly computed imaginary
    # part, so the distance is bitwise symmetric
    zr, zi, wr, wi = z.real, z.imag, w.real, w.imag
    q = np.hypot(1 - (zr * wr + zi * wi), zi * wr - zr * wi)
    t = np.abs(z - w) / q
    one_minus_t2 = (_one_minus_abs2(z) * _one_minus_abs2(w)) / (q * q)
    return t, one_minus_t2


def distance_unchecked(z, w) -> np.ndarray:
    """Vectorised distance; inf where the pair is numerically on the circle."""
    t, s = distance_parts(z, w)
    one_minus_t = s / (1 + t)
    with np.errstate(divide="ignore"):
        d = 2 * np.log1p(t) - np.log(s)
    return np.where(one_minus_t <= OVERFLOW_TOL, np.inf, d)


def poincare_distance(z, w):
    """Hyperbolic distance between points of the open unit disk."""
    z = np.asarray(z, dtype=complex)
    w = np.asarray(w, dtype=complex)
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(w))):
        raise DomainError("points must be finite")
    if np.any(np.abs(z) >= 1) or np.any(np.abs(w) >= 1):
        raise DomainError("points must lie in the open unit disk")
    d = distance_unchecked(z, w)
    if np.any(np.isinf(d)):
        raise BoundaryOverflowError("points numerically on the unit circle (t >= 1 - 1e-15)")
    return float(d) if d.ndim == 0 else d


def _segment_lengths(z1: np.ndarray, z2: np.ndarray) -> np.ndarray:
    """Exact hyperbolic length of straight segments z1 -> z2.

    With z(s) = z1 + s u, |u| = 1, 0 <= s <= L and b = Re(conj(z1) u) the
    integral of 2 ds / (1 - |z(s)|^2) is
        (2 / sqrt(D)) artanh(L sqrt(D) / (1 - |z1|^2 - b L)),  D = 1 - |z1|^2 + b^2.
    """
    delta = z2 - z1
    L = np.abs(delta)
    nz = L > 0
    out = np.zeros(L.shape)
    u = delta[nz] / L[nz]
    a = z1[nz]
    b = (np.conj(a) * u).real
    c = _one_minus_abs2(a)
    D = c + b * b
    sq = np.sqrt(D)
    out[nz] = (2 / sq) * np.arctanh(L[nz] * sq / (c - b * L[nz]))
    return out


def kobayashi_length(curve) -> float:
    """Hyperbolic length of a polyline given by its vertices (>= 2 points).

    Each straight piece is integrated in closed form, so the result is the
    exact length of the polyline up to rounding.
    """
    pts = np.asarray(curve, dtype=complex).ravel()
    if pts.size < 2:
        raise ValueError("a curve needs at least two sample points")
    if not np.all(np.isfinite(pts)) or np.any(np.abs(pts) >= 1):
        raise DomainError("curve samples must lie in the open unit disk")
    return float(_segment_lengths(pts[:-1], pts[1:]).sum())


def _arg(z: complex) -> float:
    return math.atan2(z.imag, z.real) % (2 * math.pi)


def radial_arc_curve(z0: complex, q: complex, phi: float | None = None,
                     max_step: float = ARC_STEP) -> np.ndarray:
    """Vertices of the path from z0 = rho e^{i psi} along the radius to
    s e^{i psi} (s = |q|), then along the circle |z| = s to q = s e^{i phi}.

    The arc turns through psi - phi with psi taken in [0, 2 pi). Without an
    explicit ``phi`` the shorter arc is used. Chords are at most ``max_step``.
    """
    z0, q = complex(z0), complex(q)
    rho, s, psi = abs(z0), abs(q), _arg(z0)
    if phi is None:
        turn = (psi - _arg(q) + math.pi) % (2 * math.pi) - math.pi
    else:
        if abs(s * complex(np.exp(1j * phi)) - q) > 1e-9:
            raise ValueError("phi is not an argument of q")
        turn = psi - phi
    n_arc = max(1, math.ceil(abs(turn) * s / max_step))
    arc = s * np.exp(1j * (psi - turn * np.arange(n_arc + 1) / n_arc))
    return np.concatenate([[rho * np.exp(1j * psi)], arc])


def radial_arc_bound(m: int, r: float, z0: complex, q: complex,
                     phi: float | None = None) -> float:
    """Hyperbolic length of ``radial_arc_curve(z0, q, phi)``.

    ``q`` must be a preimage level point of the power map of degree ``m`` with
    base modulus ``r``: |q| = r**(1/m**k) for some k, and r <= |q| <= |z0|.
    Since the path joins z0 to q, the result bounds d(z0, q) from above.
    """
    z0, q = complex(z0), complex(q)
    rho, s = abs(z0), abs(q)
    if m < 2 or not 0 < r < 1:
        raise ValueError("need m >= 2 and 0 < r < 1")
    if rho >= 1:
        raise DomainError("z0 must lie in the open unit disk")
    if s > rho * (1 + 1e-12) or s < r * (1 - 1e-12):
        raise ValueError("q must satisfy |p_hat| <= |q| <= |z0|")
    level = math.log(math.log(s) / math.log(r), m)
    if abs(level - round(level)) > 1e-6:
        raise ValueError("|q| is not of the form r**(1/m**k)")
    if z0 == q:
        return 0.0
    return kobayashi_length(radial_arc_curve(z0, q, phi))

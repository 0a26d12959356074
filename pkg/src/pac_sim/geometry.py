"""Fresnel arc integrals, adaptive quadrature and rigid-transform algebra."""

from __future__ import annotations

import heapq
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy.special import fresnel

# Below this |c1| the Fresnel closed form loses digits; use the series instead.
C1_SWITCH = 1e-4

# Gauss-Kronrod 15-point nodes and weights (QUADPACK qk15), positive half.
_XGK = np.array(
    [
        0.991455371120812639206854697526329,
        0.949107912342758524526189684047851,
        0.864864423359769072789712788640926,
        0.741531185599394439863864773280788,
        0.586087235467691130294144845693013,
        0.405845151377397166906606412076961,
        0.207784955007898467600689403773245,
        0.000000000000000000000000000000000,
    ]
)
_WGK = np.array(
    [
        0.022935322010529224963732008058970,
        0.063092092629978553290700663189204,
        0.104790010322250183839876322541518,
        0.140653259715525918745189590510238,
        0.169004726639267902826583426598550,
        0.190350578064785409913256402421014,
        0.204432940075298892414161999234649,
        0.209482141084727828012999174891714,
    ]
)
# 7-point Gauss weights on the odd Kronrod nodes (x[1], x[3], x[5], x[7]).
_WG = np.array(
    [
        0.129484966168869693270611432679082,
        0.279705391489276667901467771423780,
        0.381830050505118944950369775488975,
        0.417959183673469387755102040816327,
    ]
)
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])
_KRONROD = np.concatenate([_WGK[:-1], _WGK[::-1]])
_GAUSS = np.zeros(15)
_GAUSS[[1, 3, 5]] = _WG[:3]
_GAUSS[[13, 11, 9]] = _WG[:3]
_GAUSS[7] = _WG[3]


class QuadratureError(Exception):
    """Raised when adaptive quadrature does not reach its tolerance."""

    def __init__(self, message: str, estimate: object, error: float) -> None:
        super().__init__(message)
        self.estimate = estimate
        self.error = error


@dataclass(frozen=True)
class RigidTransform:
    """Rotation matrix and translation vector of a frame."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    @classmethod
    def identity(cls) -> RigidTransform:
        return cls()


def compose(parent: RigidTransform, child: RigidTransform) -> RigidTransform:
    """Express ``child`` (given in the parent frame) in the parent's reference."""
    return RigidTransform(
        rotation=parent.rotation @ child.rotation,
        translation=parent.rotation @ child.translation + parent.translation,
    )


def alpha_phi_matrices(alpha: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Batched rotation R_z(phi) R_y(alpha), shape ``alpha.shape + (3, 3)``."""
    alpha, phi = np.broadcast_arrays(
        np.asarray(alpha, dtype=float), np.asarray(phi, dtype=float)
    )
    ca, sa = np.cos(alpha), np.sin(alpha)
    cp, sp = np.cos(phi), np.sin(phi)
    out = np.empty(alpha.shape + (3, 3))
    out[..., 0, 0] = ca * cp
    out[..., 0, 1] = -sp
    out[..., 0, 2] = sa * cp
    out[..., 1, 0] = ca * sp
    out[..., 1, 1] = cp
    out[..., 1, 2] = sa * sp
    out[..., 2, 0] = -sa
    out[..., 2, 1] = 0.0
    out[..., 2, 2] = ca
    return out


def rotation_from_alpha_phi(alpha: float, phi: float) -> np.ndarray:
    """Rotation of the frame at angle ``alpha`` in the plane at angle ``phi``."""
    return alpha_phi_matrices(alpha, phi)


def _fresnel_branch(c0: np.ndarray, c1: np.ndarray, s: np.ndarray) -> np.ndarray:
    # alpha(v) = c1/2 (v + c0/c1)^2 - c0^2/(2 c1); negative c1 is the conjugate
    # of the mirrored problem.
    negative = c1 < 0
    a0 = np.where(negative, -c0, c0)
    a1 = np.abs(c1)
    root = np.sqrt(np.pi * a1)
    s0, f0 = fresnel(a0 / root)
    s1, f1 = fresnel((a0 + a1 * s) / root)
    phase = np.exp(-0.5j * a0**2 / a1)
    value = np.sqrt(np.pi / a1) * phase * ((f1 - f0) + 1j * (s1 - s0))
    return np.where(negative, np.conj(value), value)


def _moments(c0: np.ndarray, s: np.ndarray, order: int) -> list[np.ndarray]:
    """M_k = integral_0^s v^k exp(i c0 v) dv for k = 0..order."""
    small = np.abs(c0 * s) < 1.0
    out = []
    # Power series where |c0 s| is small; upward recursion elsewhere.
    series = []
    z = 1j * np.where(small, c0, 0.0) * s
    for k in range(order + 1):
        term = s ** (k + 1) / (k + 1)
        total = term.astype(complex)
        coeff = np.ones_like(total)
        for j in range(1, 40):
            coeff = coeff * z / j
            total = total + coeff * s ** (k + 1) / (k + j + 1)
        series.append(total)
    safe_c0 = np.where(small, 1.0, c0)
    e = np.exp(1j * safe_c0 * s)
    prev = (e - 1.0) / (1j * safe_c0)
    recursion = [prev]
    for k in range(1, order + 1):
        prev = (s**k * e - k * prev) / (1j * safe_c0)
        recursion.append(prev)
    for k in range(order + 1):
        out.append(np.where(small, series[k], recursion[k]))
    return out


def _series_branch(c0: np.ndarray, c1: np.ndarray, s: np.ndarray) -> np.ndarray:
    # exp(i c1 v^2 / 2) expanded to third order in c1.
    m0, _, m2, _, m4, _, m6 = _moments(c0, s, 6)
    h = 0.5 * c1
    return m0 + 1j * h * m2 - 0.5 * h**2 * m4 - 1j * h**3 / 6.0 * m6


def arc_integral(c0: np.ndarray, c1: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Complex integral_0^s exp(i alpha(v)) dv, alpha(v) = c0 v + c1 v^2 / 2.

    Real part is the cosine integral, imaginary part the sine integral. All
    arguments broadcast together.
    """
    c0, c1, s = np.broadcast_arrays(
        np.asarray(c0, dtype=float), np.asarray(c1, dtype=float), np.asarray(s, float)
    )
    shape = c0.shape
    c0, c1, s = c0.ravel(), c1.ravel(), s.ravel()
    out = np.empty(c0.shape, dtype=complex)
    closed = np.abs(c1) >= C1_SWITCH
    if closed.any():
        out[closed] = _fresnel_branch(c0[closed], c1[closed], s[closed])
    if (~closed).any():
        out[~closed] = _series_branch(c0[~closed], c1[~closed], s[~closed])
    return out.reshape(shape)


def affine_arc_integrals(
    c0: float, c1: float, scale: float, s: float
) -> tuple[float, float]:
    """Scaled sine and cosine integrals of the affine-curvature angle."""
    value = complex(arc_integral(c0, c1, s))
    return scale * value.imag, scale * value.real


def _gauss_kronrod(
    f: Callable[[np.ndarray], object], a: float, b: float
) -> tuple[np.ndarray, float]:
    half = 0.5 * (b - a)
    nodes = 0.5 * (a + b) + half * _NODES
    values = np.asarray(f(nodes))
    if values.ndim == 0 or values.shape[0] != nodes.shape[0]:
        values = np.broadcast_to(values, nodes.shape + values.shape)
    kronrod = half * np.tensordot(_KRONROD, values, axes=(0, 0))
    gauss = half * np.tensordot(_GAUSS, values, axes=(0, 0))
    error = float(np.max(np.abs(kronrod - gauss))) if kronrod.size else 0.0
    return kronrod, error


def adaptive_quadrature(
    f: Callable[[np.ndarray], object],
    a: float,
    b: float,
    tol: float = 1e-12,
    limit: int = 2000,
    vectorized: bool = True,
) -> float | np.ndarray:
    """Globally adaptive Gauss-Kronrod (7/15) integration of ``f`` over [a, b].

    ``f`` is called with an array of nodes and may return a scalar per node or
    an array whose leading axis runs over the nodes; the result then has the
    trailing shape. With ``vectorized=False`` a plain scalar callable is
    evaluated node by node.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not vectorized:
        scalar = f
        f = lambda x: np.array([scalar(float(v)) for v in x])  # noqa: E731
    if a == b:
        sample = np.asarray(f(np.array([a])))
        return _finish(np.zeros_like(sample[0] if sample.ndim else sample))
    total, error = _gauss_kronrod(f, a, b)
    heap = [(-error, 0, a, b, total)]
    counter = 1
    total_error = error
    while total_error > tol:
        if len(heap) >= limit:
            raise QuadratureError(
                f"quadrature did not converge: error estimate {total_error:.3e}"
                f" after {len(heap)} intervals",
                estimate=_finish(_heap_sum(heap)),
                error=total_error,
            )
        _, _, lo, hi, _ = heapq.heappop(heap)
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            raise QuadratureError(
                f"quadrature interval collapsed near {lo!r}: error estimate"
                f" {total_error:.3e}",
                estimate=_finish(_heap_sum(heap)),
                error=total_error,
            )
        left, err_left = _gauss_kronrod(f, lo, mid)
        right, err_right = _gauss_kronrod(f, mid, hi)
        heapq.heappush(heap, (-err_left, counter, lo, mid, left))
        heapq.heappush(heap, (-err_right, counter + 1, mid, hi, right))
        counter += 2
        total_error = math.fsum(-item[0] for item in heap)
    return _finish(_heap_sum(heap))


def _heap_sum(heap: list[tuple]) -> np.ndarray:
    return sum((item[4] for item in heap[1:]), start=heap[0][4])


def _finish(total: np.ndarray) -> float | np.ndarray:
    if np.ndim(total) == 0:
        value = complex(total) if np.iscomplexobj(total) else float(total)
        return value
    return total

"""Univariate and tensor-product B-spline bases on clamped knot vectors."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sps

MAX_DERIV = 3


class BasisSpec1D:
    """Clamped B-spline space of degree ``p`` on the knot vector ``knots``.

    Instances are immutable; the knot array is stored read-only.
    """

    __slots__ = ("degree", "knots")

    def __init__(self, degree: int, knots):
        knots = np.array(knots, dtype=float)
        p = int(degree)
        if p < 1:
            raise ValueError(f"degree must be >= 1, got {p}")
        if knots.ndim != 1 or knots.size < 2 * p + 2:
            raise ValueError("knot vector too short for the degree")
        if np.any(np.diff(knots) < 0):
            raise ValueError("knots must be nondecreasing")
        if np.any(knots[: p + 1] != knots[0]) or np.any(knots[-p - 1:] != knots[-1]):
            raise ValueError("first and last knots must have multiplicity p+1")
        if knots[-1] <= knots[0]:
            raise ValueError("knot vector spans an empty interval")
        _, mult = np.unique(knots, return_counts=True)
        if np.any(mult[1:-1] > p) or mult[0] != p + 1 or mult[-1] != p + 1:
            raise ValueError("interior knot multiplicity must lie in [1, p]")
        knots.setflags(write=False)
        object.__setattr__(self, "degree", p)
        object.__setattr__(self, "knots", knots)

    def __setattr__(self, name, value):
        raise AttributeError("BasisSpec1D is immutable")

    def __repr__(self):
        return f"BasisSpec1D(degree={self.degree}, knots={self.knots.tolist()})"

    def __eq__(self, other):
        return (
            isinstance(other, BasisSpec1D)
            and self.degree == other.degree
            and self.knots.shape == other.knots.shape
            and bool(np.all(self.knots == other.knots))
        )

    def __hash__(self):
        return hash((self.degree, self.knots.tobytes()))

    @property
    def dim(self) -> int:
        return self.knots.size - self.degree - 1

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    def breaks(self) -> np.ndarray:
        """Distinct knot values (element boundaries)."""
        return np.unique(self.knots)

    @property
    def n_elements(self) -> int:
        return self.breaks().size - 1

    def interior_multiplicities(self) -> np.ndarray:
        _, mult = np.unique(self.knots, return_counts=True)
        return mult[1:-1]

    @property
    def regularity(self) -> int:
        """Minimum continuity across interior knots (``p`` for a Bezier span)."""
        mult = self.interior_multiplicities()
        if mult.size == 0:
            return self.degree
        return int(self.degree - mult.max())

    def reversed(self) -> "BasisSpec1D":
        a, b = self.domain
        return BasisSpec1D(self.degree, (a + b) - self.knots[::-1])


def uniform_spec(degree: int, regularity: int, n_elements: int, a=0.0, b=1.0) -> BasisSpec1D:
    """Open knot vector with ``n_elements`` equal spans and interior multiplicity ``p - r``."""
    if not 0 <= regularity < degree:
        raise ValueError(f"regularity must satisfy 0 <= r < p, got p={degree}, r={regularity}")
    m = degree - regularity
    inner = np.linspace(a, b, n_elements + 1)[1:-1]
    knots = np.concatenate([[a] * (degree + 1), np.repeat(inner, m), [b] * (degree + 1)])
    return BasisSpec1D(degree, knots)


def find_span(spec: BasisSpec1D, t):
    """Index ``i`` with ``knots[i] <= t < knots[i+1]``.

    The right endpoint maps to the last nonempty span. Accepts a scalar or an
    array of parameters.
    """
    t_arr = np.asarray(t, dtype=float)
    a, b = spec.domain
    if np.any(t_arr < a) or np.any(t_arr > b) or np.any(~np.isfinite(t_arr)):
        raise ValueError(f"parameter outside knot range [{a}, {b}]")
    kv = spec.knots
    p = spec.degree
    span = np.searchsorted(kv, t_arr, side="right") - 1
    span = np.clip(span, p, kv.size - p - 2)
    if span.ndim == 0:
        return int(span)
    return span


def _eval_ders(spec: BasisSpec1D, t: np.ndarray, span: np.ndarray, nd: int) -> np.ndarray:
    # Vectorised form of the classical triangular-table algorithm with derivatives.
    p = spec.degree
    kv = spec.knots
    m = t.size
    ndu = np.zeros((m, p + 1, p + 1))
    ndu[:, 0, 0] = 1.0
    left = np.zeros((m, p + 1))
    right = np.zeros((m, p + 1))
    for j in range(1, p + 1):
        left[:, j] = t - kv[span + 1 - j]
        right[:, j] = kv[span + j] - t
        saved = np.zeros(m)
        for r in range(j):
            ndu[:, j, r] = right[:, r + 1] + left[:, j - r]
            temp = ndu[:, r, j - 1] / ndu[:, j, r]
            ndu[:, r, j] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        ndu[:, j, j] = saved

    ders = np.zeros((m, nd + 1, p + 1))
    ders[:, 0, :] = ndu[:, :, p]
    if nd == 0:
        return ders
    a = np.zeros((m, 2, p + 1))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[:] = 0.0
        a[:, 0, 0] = 1.0
        for k in range(1, nd + 1):
            d = np.zeros(m)
            rk = r - k
            pk = p - k
            if k > p:
                ders[:, k, r] = 0.0
                continue
            if r >= k:
                a[:, s2, 0] = a[:, s1, 0] / ndu[:, pk + 1, rk]
                d = a[:, s2, 0] * ndu[:, rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[:, s2, j] = (a[:, s1, j] - a[:, s1, j - 1]) / ndu[:, pk + 1, rk + j]
                d = d + a[:, s2, j] * ndu[:, rk + j, pk]
            if r <= pk:
                a[:, s2, k] = -a[:, s1, k - 1] / ndu[:, pk + 1, r]
                d = d + a[:, s2, k] * ndu[:, r, pk]
            ders[:, k, r] = d
            s1, s2 = s2, s1
    fac = p
    for k in range(1, nd + 1):
        ders[:, k, :] *= fac
        fac *= p - k
    return ders


def eval_basis(spec: BasisSpec1D, t, max_deriv: int = 0):
    """Nonzero basis functions and derivatives at ``t``.

    Returns ``(span, values)``. For scalar ``t`` values has shape
    ``(max_deriv+1, p+1)``; for array input the point axis leads. Entry
    ``values[k, j]`` is the ``k``-th derivative of ``N_{span-p+j}``.
    """
    if not 0 <= max_deriv <= MAX_DERIV:
        raise ValueError(f"max_deriv must be in [0, {MAX_DERIV}]")
    t_arr = np.atleast_1d(np.asarray(t, dtype=float))
    span = np.atleast_1d(find_span(spec, t_arr))
    vals = _eval_ders(spec, t_arr.ravel(), span.ravel(), max_deriv)
    if np.ndim(t) == 0:
        return int(span[0]), vals[0]
    return span, vals


def collocation_matrix(spec: BasisSpec1D, t, deriv: int = 0) -> sps.csr_matrix:
    """Sparse matrix ``A[k, i] = N_i^{(deriv)}(t_k)``."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    span, vals = eval_basis(spec, t, deriv)
    p = spec.degree
    rows = np.repeat(np.arange(t.size), p + 1)
    cols = (span[:, None] - p + np.arange(p + 1)).ravel()
    return sps.csr_matrix((vals[:, deriv, :].ravel(), (rows, cols)), shape=(t.size, spec.dim))


def evaluate(spec: BasisSpec1D, coeffs, t, deriv: int = 0) -> np.ndarray:
    """Evaluate the spline with coefficients ``coeffs`` (leading axis = basis index)."""
    coeffs = np.asarray(coeffs, dtype=float)
    A = collocation_matrix(spec, t, deriv)
    return A @ coeffs.reshape(coeffs.shape[0], -1) if coeffs.ndim > 1 else A @ coeffs


def greville_points(spec: BasisSpec1D) -> np.ndarray:
    p = spec.degree
    kv = spec.knots
    idx = np.arange(spec.dim)[:, None] + 1 + np.arange(p)[None, :]
    return kv[idx].mean(axis=1)


def insert_knot(spec: BasisSpec1D, coeffs, t: float):
    """Single knot insertion (Boehm). ``coeffs`` may carry trailing axes."""
    coeffs = np.asarray(coeffs, dtype=float)
    p = spec.degree
    kv = spec.knots
    k = find_span(spec, t)
    if t == kv[-1]:
        raise ValueError("cannot insert the end knot")
    new_knots = np.insert(kv, k + 1, t)
    new = np.empty((coeffs.shape[0] + 1,) + coeffs.shape[1:])
    new[: k - p + 1] = coeffs[: k - p + 1]
    new[k + 1:] = coeffs[k:]
    for i in range(k - p + 1, k + 1):
        alpha = (t - kv[i]) / (kv[i + p] - kv[i])
        new[i] = alpha * coeffs[i] + (1.0 - alpha) * coeffs[i - 1]
    return BasisSpec1D(p, new_knots), new


def insert_knots(spec: BasisSpec1D, coeffs, ts):
    for t in sorted(ts):
        spec, coeffs = insert_knot(spec, coeffs, t)
    return spec, np.asarray(coeffs, dtype=float)


def refine_uniform(spec: BasisSpec1D, coeffs):
    """Bisect every nonempty span; the represented function is unchanged."""
    br = spec.breaks()
    mids = 0.5 * (br[:-1] + br[1:])
    return insert_knots(spec, coeffs, mids)


def _interpolate(spec: BasisSpec1D, values_at_greville) -> np.ndarray:
    A = collocation_matrix(spec, greville_points(spec)).toarray()
    v = np.asarray(values_at_greville, dtype=float)
    return np.linalg.solve(A, v.reshape(v.shape[0], -1)).reshape(v.shape)


def elevate_degree(spec: BasisSpec1D, coeffs):
    """Raise the degree by one, keeping regularity at every knot.

    The elevated space contains the old one, so interpolation at its Greville
    abscissae recovers the exact coefficients.
    """
    coeffs = np.asarray(coeffs, dtype=float)
    br, mult = np.unique(spec.knots, return_counts=True)
    new_spec = BasisSpec1D(spec.degree + 1, np.repeat(br, mult + 1))
    g = greville_points(new_spec)
    vals = evaluate(spec, coeffs, g)
    new = _interpolate(new_spec, vals.reshape(g.size, *coeffs.shape[1:]))
    return new_spec, new.reshape((new_spec.dim,) + coeffs.shape[1:])


def gauss_legendre(n: int, a: float = 0.0, b: float = 1.0):
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * x + 0.5 * (a + b), 0.5 * (b - a) * w


def element_quadrature(spec: BasisSpec1D, n: int):
    """Gauss points and weights on every nonempty span, shape ``(n_el, n)``."""
    br = spec.breaks()
    x, w = np.polynomial.legendre.leggauss(n)
    lo, hi = br[:-1, None], br[1:, None]
    pts = 0.5 * (hi - lo) * x[None, :] + 0.5 * (hi + lo)
    wts = 0.5 * (hi - lo) * w[None, :]
    return pts, wts


@dataclass(frozen=True)
class TensorBasisSpec:
    u: BasisSpec1D
    v: BasisSpec1D

    @property
    def shape(self) -> tuple[int, int]:
        return self.u.dim, self.v.dim

    @property
    def dim(self) -> int:
        return self.u.dim * self.v.dim

    @property
    def degrees(self) -> tuple[int, int]:
        return self.u.degree, self.v.degree

    def direction(self, k: int) -> BasisSpec1D:
        return (self.u, self.v)[k]

    def index(self, iu, iv):
        """Flat index of tensor function ``(iu, iv)`` (u-major)."""
        return np.asarray(iu) * self.v.dim + np.asarray(iv)


def tensor_eval(tb: TensorBasisSpec, u, v, max_deriv: int = 2):
    """Tensor basis values at matched point lists ``u[k], v[k]``.

    Returns ``(indices, D)`` where ``indices`` has shape ``(m, nb)`` and
    ``D[(a, b)]`` is the array of ``d^a/du^a d^b/dv^b`` values, shape
    ``(m, nb)``, for ``a + b <= max_deriv``.
    """
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    su, bu = eval_basis(tb.u, u, max_deriv)
    sv, bv = eval_basis(tb.v, v, max_deriv)
    pu, pv = tb.degrees
    iu = su[:, None] - pu + np.arange(pu + 1)[None, :]
    iv = sv[:, None] - pv + np.arange(pv + 1)[None, :]
    idx = (iu[:, :, None] * tb.v.dim + iv[:, None, :]).reshape(u.size, -1)
    D = {}
    for a in range(max_deriv + 1):
        for b in range(max_deriv + 1 - a):
            D[(a, b)] = (bu[:, a, :, None] * bv[:, b, None, :]).reshape(u.size, -1)
    return idx, D

"""Weight psi(x) = | |x| - 2 |^alpha and weighted quadrature on grid cells.

The weight vanishes at r = 2 with a power-law cusp and, for large alpha,
varies by hundreds of orders of magnitude across a single coarse cell.
Weighted integrals therefore run on per-cell Gauss rules: cells with the
cusp at an edge get a Gauss-Jacobi rule that absorbs s^alpha exactly
(plain Gauss converges like h^{alpha+1} there and never reaches
quadrature accuracy for fractional alpha), smooth cells split into one
log-graded subcell per e-fold of weight variation. The same radial rule
backs the one and
two dimensional assembly paths, so a theta-constant field integrates
identically in either reduction up to roundoff.

Evaluation goes through exp(alpha * log|r - 2|); products smaller than the
underflow floor are flushed to exactly 0 so downstream quotients never see
subnormals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

from .errors import ConfigurationError, DomainError
from .geometry import (
    ALPHA_CAP,
    INNER_RADIUS,
    MID_RADIUS,
    OUTER_RADIUS,
    surface_measure,
)

GAUSS_ORDER = 4
# One subcell per e-fold of weight variation keeps the per-subcell Gauss
# error near 1e-9 relative; the log-width term covers fractional alpha,
# whose power-law curvature stays high even where the variation is small.
# The cap only bites where the cell mass has already flushed to zero.
VARIATION_PER_SUBCELL = 1.0
LOG_WIDTH_PER_SUBCELL = 0.3
MAX_SUBCELLS = 256

_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(GAUSS_ORDER)


@dataclass(frozen=True)
class WeightSpec:
    """Exponent alpha and the flush threshold for underflowing weights."""

    alpha: float
    underflow_floor: float = 1e-300

    def __post_init__(self) -> None:
        if not (0.0 <= self.alpha <= ALPHA_CAP):
            raise ConfigurationError(
                f"alpha must lie in [0, {ALPHA_CAP:g}], got {self.alpha!r}"
            )
        if not (1e-300 <= self.underflow_floor <= 1e-30):
            raise ConfigurationError(
                f"underflow floor must lie in [1e-300, 1e-30], got {self.underflow_floor!r}"
            )


def weight_eval(r, spec: WeightSpec):
    """| r - 2 |^alpha on [1, 3], flushed to 0 below the underflow floor.

    Raises DomainError off the annulus. alpha = 0 gives identically 1,
    including at r = 2.
    """
    arr = np.asarray(r, dtype=float)
    if np.any(arr < INNER_RADIUS - 1e-12) or np.any(arr > OUTER_RADIUS + 1e-12):
        raise DomainError("weight is defined on the annulus radii [1, 3] only")
    if spec.alpha == 0.0:
        out = np.ones_like(arr)
        return float(out) if out.ndim == 0 else out
    d = np.abs(arr - MID_RADIUS)
    out = np.zeros_like(d)
    pos = d > 0.0
    out[pos] = np.exp(spec.alpha * np.log(d[pos]))
    out[out < spec.underflow_floor] = 0.0
    return float(out) if out.ndim == 0 else out


def subdivision_count(a: float, b: float, alpha: float) -> int:
    """Subcells needed on [a, b]: one per e-fold of weight variation.

    psi changes by exp(alpha * |ln d(b) - ln d(a)|) across the cell
    (d = distance to r = 2); log-graded subcells hold that to one e-fold
    each, which a 4-point Gauss rule resolves to ~1e-9 relative. Cells
    with the cusp at an edge report the cap; radial_rule never sends
    those here (the Jacobi rule owns them).
    """
    if alpha == 0.0:
        return 1
    da = abs(a - MID_RADIUS)
    db = abs(b - MID_RADIUS)
    lo, hi = min(da, db), max(da, db)
    if lo == 0.0:
        return MAX_SUBCELLS
    log_width = math.log(hi / lo)
    need = max(
        alpha * log_width / VARIATION_PER_SUBCELL,
        log_width / LOG_WIDTH_PER_SUBCELL,
    )
    return min(max(1, math.ceil(need)), MAX_SUBCELLS)


def _smooth_rule(a: float, b: float, alpha: float, refine: int = 1):
    nsub = subdivision_count(a, b, alpha) * max(int(refine), 1)
    if nsub == 1 or alpha == 0.0:
        edges = np.linspace(a, b, nsub + 1)
    else:
        # grade subcell edges log-uniformly in the distance to the cusp,
        # equalizing the weight variation each subcell absorbs
        da = abs(a - MID_RADIUS)
        db = abs(b - MID_RADIUS)
        d_edges = np.exp(np.linspace(math.log(da), math.log(db), nsub + 1))
        edges = MID_RADIUS - d_edges if a < MID_RADIUS else MID_RADIUS + d_edges
        edges[0], edges[-1] = a, b
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    pts = (mid[:, None] + half[:, None] * _GAUSS_X[None, :]).ravel()
    wts = (half[:, None] * _GAUSS_W[None, :]).ravel()
    return pts, wts


def _kink_rule(a: float, b: float, alpha: float, refine: int = 1):
    """Gauss-Jacobi dr-rule for a cell with the cusp of psi at one edge.

    The Jacobi rule integrates s^alpha q(s) exactly for polynomial q, so
    dividing s^alpha back out of its weights (in log space: the pieces
    overflow separately for alpha near the cap, their combination never
    does) yields dr-weights whose product with weight_eval restores the
    exact weighted rule. Callers keep the (points, dr-weights) contract.
    refine multiplies the point count for saturation checks.
    """
    h = b - a
    order = GAUSS_ORDER * max(int(refine), 1)
    x, w = roots_jacobi(order, 0.0, alpha)  # weight (1+x)^alpha
    s = 0.5 * h * (1.0 + x)  # distance to the cusp, in (0, h)
    logw = (alpha + 1.0) * math.log(0.5 * h) + np.log(w) - alpha * np.log(s)
    wts = np.exp(logw)
    pts = MID_RADIUS + s if a == MID_RADIUS else MID_RADIUS - s
    return pts, wts


def radial_rule(a: float, b: float, alpha: float, refine: int = 1):
    """Gauss points and dr-weights on [a, b], adapted to the weight.

    Cells touching r = 2 use the Jacobi rule; straddling cells split
    there first. refine raises the rule order (cusp cells) or multiplies
    the subcell count (smooth cells) for quadrature-saturation checks.
    """
    if not b > a:
        raise ConfigurationError(f"empty radial cell [{a!r}, {b!r}]")
    refine = max(int(refine), 1)
    if a < MID_RADIUS < b:
        pa, wa = radial_rule(a, MID_RADIUS, alpha, refine)
        pb, wb = radial_rule(MID_RADIUS, b, alpha, refine)
        return np.concatenate([pa, pb]), np.concatenate([wa, wb])
    if alpha > 0.0 and (a == MID_RADIUS or b == MID_RADIUS):
        return _kink_rule(a, b, alpha, refine)
    return _smooth_rule(a, b, alpha, refine)


def theta_rule(t0: float, t1: float, refine: int = 1):
    """Gauss points and dtheta-weights on [t0, t1] (integrand smooth)."""
    if not t1 > t0:
        raise ConfigurationError(f"empty angular cell [{t0!r}, {t1!r}]")
    nsub = max(int(refine), 1)
    edges = np.linspace(t0, t1, nsub + 1)
    mid = 0.5 * (edges[:-1] + edges[1:])
    half = 0.5 * np.diff(edges)
    pts = (mid[:, None] + half[:, None] * _GAUSS_X[None, :]).ravel()
    wts = (half[:, None] * _GAUSS_W[None, :]).ravel()
    return pts, wts


def cell_weighted_integral(
    cell,
    spec: WeightSpec,
    f,
    *,
    dim: int = 3,
    measure: str = "sphere",
    refine: int = 1,
) -> float:
    """Integral of psi * f over one grid cell.

    1-D cells are (a, b) with measure "sphere" (omega_{N-1} r^{N-1} dr,
    the full shell integral of a radial f) or "line" (plain dr). 2-D cells
    are ((a, b), (t0, t1)) with the axisymmetric N = 3 measure
    2 pi r^2 sin(theta) dr dtheta; f takes (r, theta) and broadcasts.
    """
    if measure not in ("sphere", "line"):
        raise ConfigurationError(f"unknown measure {measure!r}")
    if np.isscalar(cell[0]):
        a, b = float(cell[0]), float(cell[1])
        pts, wts = radial_rule(a, b, spec.alpha, refine)
        w = weight_eval(pts, spec)
        vals = np.asarray(f(pts), dtype=float)
        if measure == "sphere":
            jac = surface_measure(dim) * pts ** (dim - 1)
        else:
            jac = np.ones_like(pts)
        return float(np.sum(wts * w * vals * jac))
    (a, b), (t0, t1) = cell
    if dim != 3:
        raise ConfigurationError("2-D cells are defined for the N = 3 reduction only")
    if measure != "sphere":
        raise ConfigurationError("2-D cells carry the sphere measure only")
    rp, rw = radial_rule(float(a), float(b), spec.alpha, refine)
    tp, tw = theta_rule(float(t0), float(t1), refine)
    w = weight_eval(rp, spec)
    vals = np.asarray(f(rp[:, None], tp[None, :]), dtype=float)
    row = rw * w * rp**2
    col = tw * np.sin(tp)
    return float(2.0 * math.pi * row @ vals @ col)

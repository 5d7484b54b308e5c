"""Numerical mountain pass between the two boundary bubbles.

The level of interest is

    beta = inf over paths gamma from u0 to u1 of max_t R(gamma(t)),

approximated by a polygonal path of normalized fields whose interior nodes
flow downhill: each sweep moves every interior node along its negative
H1-preconditioned Rayleigh gradient with per-node backtracking (so no
node's quotient ever increases, hence the running path maximum is
non-increasing), and every twentieth sweep the nodes are redistributed
uniformly in energy arc-length to stop them from piling up at the pass.
Three guards keep the discrete maximum an honest pass estimate: descent
directions are projected A-orthogonal to the local path tangent (full
per-node descent would make the whole chain flow into the two basins and
hide the barrier inside one segment), per-sweep displacements are capped
at half the local node spacing, and the redistribution keeps the argmax
node as a node, so re-sampling the polygon never raises the node
maximum. The iteration stops when the
argmax node is an approximate critical point, measured by the same
scaled residual the solvers certify, and the argmax node is periodically
offered the Newton teleport since plain descent crawls near a saddle.

Every path with endpoints in the two half-annulus basins crosses the
balanced set: the sign of E_plus - E_minus flips along it, which is what
path_crossing locates and what makes beta an upper bound certificate for
the balanced level.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import functional as fn
from .errors import (
    ConfigurationError,
    ContractViolationError,
    DegenerateFieldError,
)
from .geometry import DiscreteField, ProblemParams
from .minimize import _newton_polish, _stiffness_factor

MIN_SEGMENTS = 9
REDISTRIBUTE_EVERY = 20
POLISH_EVERY = 25
BACKTRACK_MAX = 8


@dataclass
class PathState:
    """Polygonal path of normalized fields with cached quotients."""

    nodes: list[DiscreteField]
    quotients: np.ndarray
    alpha: float
    p: float

    @property
    def max_index(self) -> int:
        return int(np.argmax(self.quotients))

    @property
    def max_quotient(self) -> float:
        return float(self.quotients[self.max_index])


@dataclass(frozen=True)
class MpassResult:
    """Mountain-pass outcome: the level, the pass field, and certificates."""

    beta: float
    w: DiscreteField
    iterations: int
    converged: bool
    endpoint_levels: tuple[float, float]
    straight_max: float


def _normalized_quotient(field: DiscreteField, alpha: float, p: float):
    u = fn.normalize(field, alpha, p)
    return u, fn.dirichlet_energy(u)


def straight_path(
    u0: DiscreteField, u1: DiscreteField, m: int, alpha: float, p: float
) -> PathState:
    """Affine interpolation zeta(t) = t u1 + (1-t) u0, nodes renormalized."""
    if m < MIN_SEGMENTS:
        raise ConfigurationError(f"need at least {MIN_SEGMENTS} segments, got {m}")
    if u0.grid is not u1.grid:
        raise ConfigurationError("path endpoints live on different grids")
    if u0.is_zero or u1.is_zero:
        raise DegenerateFieldError("path endpoints must be nonzero")
    nodes: list[DiscreteField] = []
    quotients = np.empty(m + 1)
    for k in range(m + 1):
        t = k / m
        blend = u0.with_values((1.0 - t) * u0.values + t * u1.values)
        if blend.is_zero:
            raise DegenerateFieldError(f"interior path node {k} is identically zero")
        node, energy = _normalized_quotient(blend, alpha, p)
        nodes.append(node)
        quotients[k] = energy
    return PathState(nodes=nodes, quotients=quotients, alpha=alpha, p=p)


def path_crossing(path: PathState) -> int:
    """First node index where the sign of E_plus - E_minus flips.

    The crossing node lies on the balanced set up to one path segment, so
    its quotient lower-bounds nothing by itself but upper-bounds the
    balanced level along this path; an exactly balanced node counts as a
    sign change.
    """
    defects = [fn.halfspace_energies(u) for u in path.nodes]
    signs = [math.copysign(1.0, ep - em) if ep != em else 0.0 for ep, em in defects]
    if signs[0] == 0.0 or signs[-1] == 0.0 or signs[0] == signs[-1]:
        raise ContractViolationError(
            "path endpoints do not straddle the balanced set"
        )
    for k in range(1, len(signs)):
        if signs[k] != signs[0]:
            return k
    raise ContractViolationError("no sign change along the path")


def _energy_norm(matrix, values: np.ndarray) -> float:
    return math.sqrt(max(float(values @ (matrix @ values)), 0.0))


def _energy_length(matrix, u: DiscreteField, v: DiscreteField) -> float:
    return _energy_norm(matrix, v.values - u.values)


def _redistribute(path: PathState, matrix, pin: int) -> PathState | None:
    """Equidistribute nodes by energy arc-length on each side of `pin`.

    The argmax node is kept as a node so re-sampling the polygon cannot
    raise the node maximum; the remaining nodes are placed uniformly in
    the energy arc-length of the current polygon, which undoes the
    clustering that per-node descent produces around the pass.
    """
    nodes = path.nodes
    m = len(nodes) - 1
    new_nodes = list(nodes)
    new_quotients = path.quotients.copy()
    for lo, hi in ((0, pin), (pin, m)):
        n_seg = hi - lo
        if n_seg < 2:
            continue
        diffs = [nodes[k + 1].values - nodes[k].values for k in range(lo, hi)]
        lengths = np.array([_energy_norm(matrix, d) for d in diffs])
        total = float(lengths.sum())
        if total <= 0.0:
            continue
        cumulative = np.concatenate(([0.0], np.cumsum(lengths)))
        targets = np.linspace(0.0, total, n_seg + 1)
        for j in range(1, n_seg):
            i = int(np.searchsorted(cumulative, targets[j], side="right") - 1)
            i = min(max(i, 0), n_seg - 1)
            seg = lengths[i]
            t = 0.0 if seg == 0.0 else (targets[j] - cumulative[i]) / seg
            blend = nodes[lo + i].with_values(nodes[lo + i].values + t * diffs[i])
            if blend.is_zero:
                return None
            try:
                node, energy = _normalized_quotient(blend, path.alpha, path.p)
            except DegenerateFieldError:
                return None
            new_nodes[lo + j] = node
            new_quotients[lo + j] = energy
    return PathState(
        nodes=new_nodes,
        quotients=new_quotients,
        alpha=path.alpha,
        p=path.p,
    )


def mountain_pass(
    path: PathState,
    params: ProblemParams,
    step: float = 1.0,
    tol: float = 1e-5,
    maxit: int = 2000,
    trace_csv: str | None = None,
) -> MpassResult:
    """Deform the interior path nodes downhill until the pass is critical.

    Stops when the argmax node's scaled residual (the same quantity
    residual_pde reports for the rescaled field) is at most tol; exceeding
    maxit returns the best path so far with converged False.
    """
    if (params.alpha, params.p) != (path.alpha, path.p):
        raise ConfigurationError("path was built for different (alpha, p)")
    if step <= 0.0:
        raise ConfigurationError(f"step must be positive, got {step}")
    if len(path.nodes) - 1 < MIN_SEGMENTS:
        raise ConfigurationError(f"path needs at least {MIN_SEGMENTS} segments")
    alpha, p = path.alpha, path.p
    grid = path.nodes[0].grid
    matrix, factor = _stiffness_factor(grid)
    free = factor.free
    m = len(path.nodes) - 1
    endpoint_levels = (float(path.quotients[0]), float(path.quotients[m]))
    endpoint_values = (path.nodes[0].values.copy(), path.nodes[m].values.copy())

    straight = straight_path(path.nodes[0], path.nodes[m], m, alpha, p)
    straight_max = straight.max_quotient

    nodes = list(path.nodes)
    quotients = path.quotients.copy()
    running_max = float(quotients.max())
    converged = False
    iterations = 0
    trace = open(trace_csv, "w", encoding="utf-8") if trace_csv else None
    if trace is not None:
        trace.write("iteration,node,quotient\n")

    def argmax_residual() -> float:
        k = int(np.argmax(quotients))
        g = fn.functional_gradient(nodes[k], alpha, p)
        return float(np.linalg.norm(g.values)) / (2.0 * math.sqrt(quotients[k]))

    try:
        last_polish = 0
        while iterations < maxit:
            top_residual = argmax_residual()
            if top_residual <= tol:
                converged = True
                break
            iterations += 1
            top = int(np.argmax(quotients))
            for k in range(1, m):
                g = fn.functional_gradient(nodes[k], alpha, p).values
                d = np.zeros(grid.n_nodes)
                d[free] = factor.solve(-g[free])
                gref = math.sqrt(max(-float(g @ d), 0.0))
                # Tangential treatment along the central-difference chord,
                # both projections in the A inner product. Ordinary nodes
                # drop the along-path component (keeping it makes the whole
                # chain flow into the basins and hide the barrier inside
                # one segment; Cauchy-Schwarz keeps g.d <= 0). The argmax
                # node instead reverses it, the climbing variant: plain
                # descent slides off the saddle whenever the chord
                # misaligns with the unstable direction, while the reversed
                # component is attracted to it.
                tau = nodes[k + 1].values - nodes[k - 1].values
                a_tau = matrix @ tau
                tau_sq = float(tau @ a_tau)
                if tau_sq > 0.0:
                    coef = float(d @ a_tau) / tau_sq
                    d -= (2.0 * coef if k == top else coef) * tau
                dnorm = _energy_norm(matrix, d)
                # Trust region: at most half the local node spacing per
                # sweep, so nodes cannot outrun the polygon and tear the
                # path across the barrier between redistributions.
                cap = 0.5 * min(
                    _energy_length(matrix, nodes[k - 1], nodes[k]),
                    _energy_length(matrix, nodes[k], nodes[k + 1]),
                )
                if dnorm == 0.0 or cap == 0.0:
                    continue
                s = min(step, cap / dnorm)
                for _ in range(BACKTRACK_MAX):
                    trial_vals = nodes[k].values + s * d
                    trial = nodes[k].with_values(trial_vals)
                    if not trial.is_zero:
                        try:
                            cand, energy = _normalized_quotient(trial, alpha, p)
                        except DegenerateFieldError:
                            cand = None
                        if cand is None:
                            s *= 0.5
                            continue
                        if k != top:
                            ok = energy < quotients[k]
                        else:
                            # The climbing node steps only toward
                            # criticality (its preconditioned gradient norm
                            # is the Lyapunov function), never above the
                            # running max. Accepting plain level decreases
                            # here lets it slide below the saddle, after
                            # which the monotone ceiling forbids climbing
                            # back and the iteration deadlocks short of
                            # criticality.
                            gnew = fn.functional_gradient(cand, alpha, p).values
                            dnew = factor.solve(-gnew[free])
                            gcand = math.sqrt(max(-float(gnew[free] @ dnew), 0.0))
                            floor = max(quotients[k - 1], quotients[k + 1])
                            ok = (
                                gcand < gref
                                and energy <= running_max
                                + 1e-10 * max(1.0, running_max)
                                and energy >= floor - 1e-12 * max(1.0, floor)
                            )
                        if ok:
                            nodes[k] = cand
                            quotients[k] = energy
                            break
                    s *= 0.5
            # A saddle starves plain descent, so the argmax node gets the
            # same Newton teleport the solvers use: periodically, and on
            # every sweep once the argmax is near-critical, so Newton can
            # close in from above before the creeping dynamics overshoots
            # the pass level. Accepted only under the running max, above
            # the flanking nodes, and within the local node spacing, else
            # the polygon would tear and the discrete maximum could dodge
            # the pass.
            if p > 2.0 and (
                iterations - last_polish >= POLISH_EVERY or top_residual <= 1e-2
            ):
                last_polish = iterations
                k = int(np.argmax(quotients))
                if 0 < k < m:
                    polished = _newton_polish(
                        grid, matrix, nodes[k], float(quotients[k]), alpha, p
                    )
                    if polished is not None:
                        energy = fn.dirichlet_energy(polished)
                        moved = polished.values - nodes[k].values
                        spacing = max(
                            _energy_length(matrix, nodes[k - 1], nodes[k]),
                            _energy_length(matrix, nodes[k], nodes[k + 1]),
                        )
                        # The pass level cannot lie below the flanking
                        # nodes; a polished field that does has fallen
                        # into a basin, not onto the saddle.
                        floor = max(quotients[k - 1], quotients[k + 1])
                        if (
                            floor - 1e-6 * max(1.0, floor) <= energy
                            and energy <= running_max + 1e-10 * max(1.0, running_max)
                            and _energy_norm(matrix, moved) <= spacing
                        ):
                            nodes[k] = polished
                            quotients[k] = energy
            if iterations % REDISTRIBUTE_EVERY == 0:
                pin = int(np.argmax(quotients))
                if 0 < pin < m:
                    candidate = _redistribute(
                        PathState(nodes, quotients, alpha, p), matrix, pin
                    )
                    if candidate is not None and (
                        candidate.max_quotient
                        <= running_max + 1e-10 * max(1.0, running_max)
                    ):
                        nodes = candidate.nodes
                        quotients = candidate.quotients
            current_max = float(quotients.max())
            assert current_max <= running_max + 1e-10 * max(1.0, running_max), (
                "path maximum increased"
            )
            running_max = min(running_max, current_max)
            if trace is not None:
                for k, q in enumerate(quotients):
                    trace.write(f"{iterations},{k},{q:.17g}\n")
            # Once the maximum sits at a fixed endpoint it stays there:
            # interior levels only decrease, so beta is already final and
            # the remaining sweeps cannot change the outcome.
            if int(np.argmax(quotients)) in (0, m):
                break
    finally:
        if trace is not None:
            trace.close()

    assert np.array_equal(nodes[0].values, endpoint_values[0]), "endpoint moved"
    assert np.array_equal(nodes[m].values, endpoint_values[1]), "endpoint moved"
    k = int(np.argmax(quotients))
    return MpassResult(
        beta=float(quotients[k]),
        w=nodes[k],
        iterations=iterations,
        converged=converged,
        endpoint_levels=endpoint_levels,
        straight_max=straight_max,
    )

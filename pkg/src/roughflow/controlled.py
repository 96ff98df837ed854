"""Controlled paths and rough integration.

A path Y is controlled by the driver lift X when it expands along the
driver's levels with Hoelder remainders:

    Y^(k)_t = sum_{n=k}^{p-1} Y^(n)_s X^(n-k)_st + Y^(k)#_st,
    |Y^(k)#_st| <~ |t - s|^{(p-k) gamma}.

The rough integral of such a Y against X is the sewing of the germ
Xi_st = sum_{n=1}^{p} Y^(n-1)_s X^(n)_st, whose additivity defect is
exactly -sum_k Y^(k-1)#_su X^(k)_ut by the Chen relation, so the germ
sews whenever (p+1) gamma > 1.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, InputError, NumericalError, ParameterError
from .grid import TimeGrid, check_same_grid
from .quadrature import simpson_weights, trapezoid_weights, uniform_nodes
from .roughcore import RoughPath, SewingResult, holder_norm, sewing_integrate
from .smoothfn import SmoothFunction

# Seminorm level above which a path is flagged as effectively uncontrolled.
ILL_CONTROLLED_THRESHOLD = 1.0e6

# Identity-check triples are taken on a submesh of at most this many nodes;
# the identity is algebraic, so a coarse probe already catches construction
# errors without an O(N^3) scan.
_DEFECT_PROBE_NODES = 96


class IllControlledWarning(UserWarning):
    """Remainder seminorm so large that the sewing bound is vacuous."""


class ControlledPath:
    """A scalar path with an expansion along a reference rough path.

    Components Y^(0..p-1) live on the reference grid; the remainder
    arrays Y^(k)#_st are computed once at construction and cached
    (instances are immutable afterwards).
    """

    def __init__(self, reference: RoughPath, components: list[np.ndarray]):
        p = reference.degree
        if len(components) != p:
            raise InputError(
                f"reference of degree {p} requires {p} components, got {len(components)}")
        npts = reference.grid.n_points
        comps = []
        for k, comp in enumerate(components):
            comp = np.asarray(comp, dtype=float)
            if comp.shape != (npts,):
                raise DimensionError(
                    f"component {k} has shape {comp.shape}, expected ({npts},)")
            if not np.all(np.isfinite(comp)):
                raise InputError(f"component {k} contains non-finite values")
            comps.append(comp)
        self.reference = reference
        self.grid = reference.grid
        self.gamma = reference.gamma
        self.degree = p
        self.components = tuple(comps)
        self.remainders = tuple(self._build_remainder(k) for k in range(p))

    def _build_remainder(self, k: int) -> np.ndarray:
        # Y^(k)#_st = Y^(k)_t - sum_{n=k}^{p-1} Y^(n)_s X^(n-k)_st, X^(0) = 1.
        comp = self.components[k]
        rem = comp[None, :] - comp[:, None]
        for n in range(k + 1, self.degree):
            rem -= self.components[n][:, None] * self.reference.level(n - k)
        return np.triu(rem, k=1)

    def component(self, k: int) -> np.ndarray:
        if not 0 <= k < self.degree:
            raise ParameterError(f"component index must lie in [0, {self.degree - 1}], got {k}")
        return self.components[k]

    def remainder(self, k: int) -> np.ndarray:
        """Cached two-parameter remainder array Y^(k)#, upper triangle."""
        if not 0 <= k < self.degree:
            raise ParameterError(f"remainder index must lie in [0, {self.degree - 1}], got {k}")
        return self.remainders[k]

    @property
    def values(self) -> np.ndarray:
        """The underlying path, component 0."""
        return self.components[0]

    def remainder_norms(self) -> list[float]:
        """[||Y^(k)#||_{(p-k) gamma} for k = 0..p-1]."""
        return [holder_norm(self.remainders[k], self.grid, (self.degree - k) * self.gamma)
                for k in range(self.degree)]


@dataclass(frozen=True)
class SignedMeasureOnGrid:
    """Finite signed measure sum_j w_j delta_{x_j} on spatial nodes."""

    nodes: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        if nodes.ndim != 1 or nodes.size == 0:
            raise InputError("nodes must be a non-empty 1-D array")
        if weights.shape != nodes.shape:
            raise DimensionError(
                f"got {weights.shape} weights for {nodes.shape} nodes")
        if not (np.all(np.isfinite(nodes)) and np.all(np.isfinite(weights))):
            raise InputError("measure nodes and weights must be finite")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "weights", weights)

    @property
    def total_variation(self) -> float:
        return float(np.sum(np.abs(self.weights)))

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    @classmethod
    def dirac(cls, x0: float, weight: float = 1.0) -> "SignedMeasureOnGrid":
        return cls(np.array([x0]), np.array([weight]))

    @classmethod
    def from_density(cls, density, lo: float, hi: float, n_nodes: int = 101,
                     rule: str = "simpson") -> "SignedMeasureOnGrid":
        """Quadrature discretization w_j = density(x_j) * quadrature weight."""
        nodes, dx = uniform_nodes(lo, hi, n_nodes)
        if rule == "simpson":
            qw = simpson_weights(n_nodes, dx)
        elif rule == "trapezoid":
            qw = trapezoid_weights(n_nodes, dx)
        else:
            raise ParameterError(f"unknown quadrature rule {rule!r}")
        vals = np.asarray(density(nodes), dtype=float)
        return cls(nodes, vals * qw)


def controlled_seminorm(y: ControlledPath) -> float:
    """sum_k ||Y^(k)#||_{(p-k) gamma} over grid pairs."""
    return float(sum(y.remainder_norms()))


def controlled_distance(y: ControlledPath, z: ControlledPath) -> float:
    """sum_k ||Y^(k)# - Z^(k)#||_{(p-k) gamma}; references may differ."""
    check_same_grid(y.grid, z.grid)
    if y.degree != z.degree:
        raise DimensionError(
            f"controlled paths have degrees {y.degree} and {z.degree}")
    total = 0.0
    for k in range(y.degree):
        diff = y.remainders[k] - z.remainders[k]
        total += holder_norm(diff, y.grid, (y.degree - k) * y.gamma)
    return float(total)


def integral_germ(y: ControlledPath, x: RoughPath | None = None) -> np.ndarray:
    """Germ Xi_st = sum_{n=1}^{p} Y^(n-1)_s X^(n)_st as an upper-triangular array."""
    if x is None:
        x = y.reference
    check_same_grid(y.grid, x.grid)
    if x.degree != y.degree:
        raise DimensionError(
            f"driver degree {x.degree} does not match controlled degree {y.degree}")
    xi = np.zeros((y.grid.n_points, y.grid.n_points))
    for n in range(1, y.degree + 1):
        xi += y.components[n - 1][:, None] * x.level(n)
    return xi


def additivity_defect(y: ControlledPath, x: RoughPath | None = None,
                      max_nodes: int = _DEFECT_PROBE_NODES) -> float:
    """Max gap between delta Xi_sut and -sum_k Y^(k-1)#_su X^(k)_ut.

    The two sides agree identically (a consequence of the Chen relation),
    so any gap beyond roundoff flags an inconsistent construction.  The
    probe runs over all ordered triples of a submesh of at most max_nodes
    nodes; coarseness is harmless because the identity is pointwise.
    """
    if x is None:
        x = y.reference
    xi = integral_germ(y, x)
    npts = y.grid.n_points
    stride = max(1, (npts - 1) // max(1, max_nodes - 1))
    idx = np.arange(0, npts, stride)
    if idx[-1] != npts - 1:
        idx = np.append(idx, npts - 1)
    worst = 0.0
    for j, u in enumerate(idx[1:-1], start=1):
        s = idx[:j + 1]
        t = idx[j:]
        delta = xi[np.ix_(s, t)] - xi[s, u][:, None] - xi[u, t][None, :]
        predicted = np.zeros_like(delta)
        for n in range(1, y.degree + 1):
            predicted -= y.remainders[n - 1][s, u][:, None] * x.level(n)[u, t][None, :]
        worst = max(worst, float(np.max(np.abs(delta - predicted))))
    return worst


def rough_integral(y: ControlledPath, x: RoughPath | None = None,
                   defect_tol: float = 1e-10) -> SewingResult:
    """Rough integral of Y against X by sewing the order-p germ.

    Returns the SewingResult whose values array is the integral path
    t -> int_0^t Y dX on the grid.
    """
    if x is None:
        x = y.reference
    beta = (y.degree + 1) * y.gamma
    if beta <= 1.0:
        raise ParameterError(
            f"(p+1)*gamma = {beta:.3f} <= 1: germ defect too rough to sew")
    seminorm = controlled_seminorm(y)
    if seminorm > ILL_CONTROLLED_THRESHOLD:
        warnings.warn(
            f"remainder seminorm {seminorm:.3e} exceeds {ILL_CONTROLLED_THRESHOLD:.0e}; "
            "integrand is effectively uncontrolled and the sewing bound is vacuous",
            IllControlledWarning)
    defect = additivity_defect(y, x)
    scale = max(1.0, seminorm) * max(1.0, max(x.holder_norms()))
    if defect > defect_tol * scale:
        raise NumericalError(
            f"germ additivity defect {defect:.3e} exceeds tolerance "
            f"{defect_tol:.1e} (x {scale:.2e} data scale)")
    xi = integral_germ(y, x)
    return sewing_integrate(xi, y.grid, y.gamma, beta)


def constant_controlled(reference: RoughPath, value: float = 1.0) -> ControlledPath:
    """The constant path as a controlled path (all remainders vanish)."""
    npts = reference.grid.n_points
    comps = [np.full(npts, value)]
    comps += [np.zeros(npts) for _ in range(reference.degree - 1)]
    return ControlledPath(reference, comps)


def smooth_consistency_check(y_values: np.ndarray, x_values: np.ndarray,
                             grid: TimeGrid, gamma: float) -> tuple[float, float, float]:
    """Rough integral vs Riemann-Stieltjes quadrature of a smooth pair.

    Lifts X geometrically, treats Y as controlled with zero higher
    components (enough for a smooth driver: the residual Y increments
    are Lipschitz, hence within every (p-k) gamma <= 1 Hoelder class),
    and compares the sewn endpoint against the trapezoid Stieltjes sum
    sum (Y_i + Y_{i+1})/2 (X_{i+1} - X_i).  Returns (rough value,
    quadrature value, absolute gap); the gap is first order in the mesh.
    """
    from .roughcore import geometric_lift

    y_values = np.asarray(y_values, dtype=float)
    x_values = np.asarray(x_values, dtype=float)
    if y_values.shape != (grid.n_points,) or x_values.shape != (grid.n_points,):
        raise DimensionError("paths must be sampled on the grid")
    x = geometric_lift(x_values, grid, gamma)
    comps = [y_values] + [np.zeros(grid.n_points) for _ in range(x.degree - 1)]
    y = ControlledPath(x, comps)
    rough = rough_integral(y).endpoint
    dx = np.diff(x_values)
    quad = float(np.sum(0.5 * (y_values[:-1] + y_values[1:]) * dx))
    return rough, quad, abs(rough - quad)


def lift_composition(eta: SmoothFunction, phi, x: RoughPath) -> ControlledPath:
    """Controlled lift of eta(phi_t) for a flow phi driven by X.

    Components are Y^(k)_t = eta^(k)(phi_t) for k = 0..p-1; eta must
    supply derivatives up to order p+1 (the Taylor-remainder orders its
    Hoelder bounds depend on), or a parameter error is raised.  phi may
    be a plain sampled path or any object with a values attribute.
    """
    phi_values = np.asarray(getattr(phi, "values", phi), dtype=float)
    if phi_values.shape != (x.grid.n_points,):
        raise DimensionError(
            f"flow path has shape {phi_values.shape}, expected ({x.grid.n_points},)")
    p = x.degree
    if eta.max_order is not None and eta.max_order < p + 1:
        raise ParameterError(
            f"lift of degree {p} needs eta derivatives to order {p + 1}, "
            f"{eta.name} stops at {eta.max_order}")
    comps = [eta(phi_values, order=k) for k in range(p)]
    return ControlledPath(x, comps)


def measure_lift(eta: SmoothFunction, flows, mu: SignedMeasureOnGrid,
                 x: RoughPath) -> ControlledPath:
    """Controlled lift of t -> int eta(phi_t(x)) mu(dx) over grid flows.

    flows holds one solved path per measure node, as an array of shape
    (n_nodes, n_points) or a sequence of paths / objects with a values
    attribute.  Components are mu-weighted sums of the per-node lift
    components; since remainders are linear in the components, the
    remainder of the sum equals the weighted sum of per-node remainders
    exactly, without building the per-node lifts.
    """
    if hasattr(flows, "values") and not isinstance(flows, np.ndarray):
        flow_matrix = np.asarray(flows.values, dtype=float)
    else:
        rows = [np.asarray(getattr(f, "values", f), dtype=float) for f in flows]
        flow_matrix = np.vstack(rows) if rows else np.empty((0, x.grid.n_points))
    if flow_matrix.ndim != 2 or flow_matrix.shape[1] != x.grid.n_points:
        raise DimensionError(
            f"flow matrix has shape {flow_matrix.shape}, expected "
            f"(n_nodes, {x.grid.n_points})")
    if flow_matrix.shape[0] != mu.n_nodes:
        raise DimensionError(
            f"got {flow_matrix.shape[0]} flows for {mu.n_nodes} measure nodes")
    p = x.degree
    if eta.max_order is not None and eta.max_order < p + 1:
        raise ParameterError(
            f"lift of degree {p} needs eta derivatives to order {p + 1}, "
            f"{eta.name} stops at {eta.max_order}")
    comps = [mu.weights @ eta(flow_matrix, order=k) for k in range(p)]
    return ControlledPath(x, comps)

"""Problem model: box domains, scalar fields, perturbation schedules, maximum
classification, and assembly of the N-dependent exponent.

All types are immutable after construction and safe to share between
concurrent workers; classification is single-threaded numpy and therefore
deterministic regardless of the caller's worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import optimize

from .errors import (
    AmbiguousMaximumError,
    DefinitenessError,
    DomainError,
    FieldEvaluationError,
    NonUniqueMaximumError,
    SweepRangeError,
)

INTERIOR = "interior_a"
BOUNDARY = "boundary_b"

_ORTHO_TOL = 1e-12
_GRAD_TOL = 1e-8
_TIE_TOL = 1e-10


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class BoxDomain:
    """Axis-aligned box, optionally rotated into ambient coordinates.

    The domain is {rotation @ z : lower <= z <= upper}.  ``lower``/``upper``
    live in the box frame; all grid machinery works in that frame.
    """

    lower: np.ndarray
    upper: np.ndarray
    rotation: np.ndarray | None = None

    def __post_init__(self):
        lo = _freeze(np.atleast_1d(np.asarray(self.lower, dtype=float)))
        up = _freeze(np.atleast_1d(np.asarray(self.upper, dtype=float)))
        if lo.shape != up.shape or lo.ndim != 1:
            raise ValueError("lower/upper must be 1-d arrays of equal length")
        if not np.all(lo < up):
            raise ValueError("lower[i] < upper[i] is required for every axis")
        m = lo.size
        rot = self.rotation
        rot = np.eye(m) if rot is None else np.asarray(rot, dtype=float)
        if rot.shape != (m, m):
            raise ValueError("rotation must be an m-by-m matrix")
        if np.max(np.abs(rot.T @ rot - np.eye(m))) > _ORTHO_TOL:
            raise ValueError("rotation is not orthogonal to 1e-12")
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", up)
        object.__setattr__(self, "rotation", _freeze(rot))

    @property
    def dimension(self) -> int:
        return self.lower.size

    @property
    def edges(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def volume(self) -> float:
        return float(np.prod(self.edges))

    @property
    def has_identity_rotation(self) -> bool:
        return bool(np.array_equal(self.rotation, np.eye(self.dimension)))

    def to_ambient(self, z):
        z = np.asarray(z, dtype=float)
        return z @ self.rotation.T

    def to_box(self, x):
        x = np.asarray(x, dtype=float)
        return x @ self.rotation

    def contains_z(self, z, tol: float = 1e-12) -> bool:
        z = np.asarray(z, dtype=float)
        return bool(np.all(z >= self.lower - tol) and np.all(z <= self.upper + tol))

    def contains_box(self, other: "BoxDomain", tol: float = 1e-12) -> bool:
        if not np.allclose(other.rotation, self.rotation, atol=1e-14):
            return False
        return bool(
            np.all(other.lower >= self.lower - tol)
            and np.all(other.upper <= self.upper + tol)
        )

    def grid_axes(self, grid_res: int) -> list[np.ndarray]:
        """Per-axis nodes; grid_res cells => grid_res+1 nodes, so a doubled
        resolution nests the coarse grid (monotone refinement)."""
        return [
            np.linspace(self.lower[i], self.upper[i], grid_res + 1)
            for i in range(self.dimension)
        ]

    def grid_points(self, grid_res: int) -> np.ndarray:
        axes = self.grid_axes(grid_res)
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.reshape(-1) for m in mesh], axis=-1)

    def clip(self, z):
        return np.clip(np.asarray(z, dtype=float), self.lower, self.upper)


@dataclass(frozen=True)
class ScalarField:
    """Scalar function with optional analytic derivative handles.

    ``evaluate`` takes a point of shape (m,) or a batch (..., m) and returns
    a scalar / (...) array.  ``gradient`` maps to (..., m), ``hessian`` to
    (..., m, m) and ``third_tensor`` to (..., m, m, m).
    """

    evaluate: Callable
    gradient: Optional[Callable] = None
    hessian: Optional[Callable] = None
    third_tensor: Optional[Callable] = None
    name: str = ""

    @property
    def has_analytic(self) -> bool:
        return (
            self.gradient is not None
            and self.hessian is not None
            and self.third_tensor is not None
        )


def field_values(fld: ScalarField, pts: np.ndarray) -> np.ndarray:
    """Evaluate a field on a batch of points, falling back to a python loop
    for callables that only accept single points."""
    pts = np.asarray(pts, dtype=float)
    try:
        out = np.asarray(fld.evaluate(pts), dtype=float)
        if out.shape == pts.shape[:-1]:
            return out
    except Exception:
        pass
    flat = pts.reshape(-1, pts.shape[-1])
    out = np.array([float(fld.evaluate(p)) for p in flat])
    return out.reshape(pts.shape[:-1])


def field_value(fld: ScalarField, x) -> float:
    val = float(np.asarray(fld.evaluate(np.asarray(x, dtype=float))))
    return val


def constant_field(c: float, name: str = "const") -> ScalarField:
    def ev(pts):
        pts = np.asarray(pts, dtype=float)
        return np.full(pts.shape[:-1], float(c))

    def gr(pts):
        pts = np.asarray(pts, dtype=float)
        return np.zeros(pts.shape)

    def he(pts):
        pts = np.asarray(pts, dtype=float)
        m = pts.shape[-1]
        return np.zeros(pts.shape[:-1] + (m, m))

    def th(pts):
        pts = np.asarray(pts, dtype=float)
        m = pts.shape[-1]
        return np.zeros(pts.shape[:-1] + (m, m, m))

    return ScalarField(ev, gr, he, th, name=name)


def polynomial_field(terms, name: str = "poly") -> ScalarField:
    """Multivariate polynomial sum(c * prod(x_i ** e_i)) with analytic
    derivatives; ``terms`` is a list of (coeff, powers) pairs."""
    terms = [(float(c), tuple(int(e) for e in p)) for c, p in terms]
    if not terms:
        raise ValueError("polynomial needs at least one term")
    m = len(terms[0][1])
    if any(len(p) != m for _, p in terms):
        raise ValueError("all power tuples must have the same length")

    def _eval_terms(tms, pts):
        pts = np.asarray(pts, dtype=float)
        out = np.zeros(pts.shape[:-1])
        for c, powers in tms:
            if c == 0.0:
                continue
            term = np.full(pts.shape[:-1], c)
            for i, e in enumerate(powers):
                if e:
                    term = term * pts[..., i] ** e
            out = out + term
        return out

    def _diff(tms, axis):
        out = []
        for c, powers in tms:
            if powers[axis] > 0:
                q = list(powers)
                q[axis] -= 1
                out.append((c * powers[axis], tuple(q)))
        return out

    grads = [_diff(terms, i) for i in range(m)]
    hesss = [[_diff(grads[i], j) for j in range(m)] for i in range(m)]
    thirds = [[[_diff(hesss[i][j], k) for k in range(m)] for j in range(m)] for i in range(m)]

    def ev(pts):
        return _eval_terms(terms, pts)

    def gr(pts):
        pts = np.asarray(pts, dtype=float)
        return np.stack([_eval_terms(grads[i], pts) for i in range(m)], axis=-1)

    def he(pts):
        pts = np.asarray(pts, dtype=float)
        rows = [
            np.stack([_eval_terms(hesss[i][j], pts) for j in range(m)], axis=-1)
            for i in range(m)
        ]
        return np.stack(rows, axis=-2)

    def th(pts):
        pts = np.asarray(pts, dtype=float)
        planes = []
        for i in range(m):
            rows = [
                np.stack([_eval_terms(thirds[i][j][k], pts) for k in range(m)], axis=-1)
                for j in range(m)
            ]
            planes.append(np.stack(rows, axis=-2))
        return np.stack(planes, axis=-3)

    return ScalarField(ev, gr, he, th, name=name)


def exponential_field(scale: float, linear, offset: float = 0.0, name: str = "exp") -> ScalarField:
    """scale * exp(linear . x + offset) with analytic derivatives."""
    a = np.asarray(linear, dtype=float)

    def ev(pts):
        pts = np.asarray(pts, dtype=float)
        return scale * np.exp(pts @ a + offset)

    def gr(pts):
        v = ev(pts)
        return v[..., None] * a

    def he(pts):
        v = ev(pts)
        return v[..., None, None] * np.outer(a, a)

    def th(pts):
        v = ev(pts)
        return v[..., None, None, None] * np.einsum("i,j,k->ijk", a, a, a)

    return ScalarField(ev, gr, he, th, name=name)


def add_fields(f1: ScalarField, f2: Optional[ScalarField], w2: float, name: str = "") -> ScalarField:
    """f1 + w2 * f2 with derivative handles composed linearly when both
    components provide them."""
    if f2 is None or w2 == 0.0:
        return ScalarField(
            f1.evaluate, f1.gradient, f1.hessian, f1.third_tensor, name or f1.name
        )

    def combine(h1, h2):
        if h1 is None or h2 is None:
            return None

        def handle(pts):
            return np.asarray(h1(pts)) + w2 * np.asarray(h2(pts))

        return handle

    def ev(pts):
        return np.asarray(f1.evaluate(pts)) + w2 * np.asarray(f2.evaluate(pts))

    return ScalarField(
        ev,
        combine(f1.gradient, f2.gradient),
        combine(f1.hessian, f2.hessian),
        combine(f1.third_tensor, f2.third_tensor),
        name=name or f"{f1.name}+{w2}*{f2.name}",
    )


def rotated_view(fld: ScalarField, rotation: np.ndarray) -> ScalarField:
    """Box-frame view z -> fld(R z) with chain-ruled derivative handles."""
    R = np.asarray(rotation, dtype=float)
    if np.array_equal(R, np.eye(R.shape[0])):
        return fld

    def ev(pts):
        return fld.evaluate(np.asarray(pts, dtype=float) @ R.T)

    gr = he = th = None
    if fld.gradient is not None:
        def gr(pts):
            g = np.asarray(fld.gradient(np.asarray(pts, dtype=float) @ R.T))
            return g @ R
    if fld.hessian is not None:
        def he(pts):
            H = np.asarray(fld.hessian(np.asarray(pts, dtype=float) @ R.T))
            return np.einsum("...ab,ai,bj->...ij", H, R, R)
    if fld.third_tensor is not None:
        def th(pts):
            T = np.asarray(fld.third_tensor(np.asarray(pts, dtype=float) @ R.T))
            return np.einsum("...abc,ai,bj,ck->...ijk", T, R, R, R)

    return ScalarField(ev, gr, he, th, name=f"{fld.name}@box")


@dataclass(frozen=True)
class EpsilonSchedule:
    """Decay schedule of the exponent perturbation; evaluate(N) >= 0 and
    tends to zero on every sweep we certify."""

    evaluate: Callable[[int], float]
    decay_class: str = "generic"  # zero | o_one_over_sqrtN | generic

    def __post_init__(self):
        if self.decay_class not in ("zero", "o_one_over_sqrtN", "generic"):
            raise ValueError(f"unknown decay_class {self.decay_class!r}")

    def validate_on(self, sweep) -> None:
        vals = [float(self.evaluate(int(n))) for n in sweep]
        if any(v < 0 for v in vals):
            raise ValueError("epsilon must be nonnegative")
        if any(b > a + 1e-15 for a, b in zip(vals, vals[1:])):
            raise ValueError("epsilon must be nonincreasing on the sweep")
        if self.decay_class == "o_one_over_sqrtN":
            scaled = [v * math.sqrt(n) for v, n in zip(vals, sweep)]
            if any(b > a + 1e-15 for a, b in zip(scaled, scaled[1:])):
                raise ValueError("epsilon * sqrt(N) must be nonincreasing on the sweep")


def zero_epsilon() -> EpsilonSchedule:
    return EpsilonSchedule(lambda n: 0.0, "zero")


def power_epsilon(exponent: float, scale: float = 1.0) -> EpsilonSchedule:
    if exponent >= 0:
        raise ValueError("epsilon exponent must be negative")
    cls = "o_one_over_sqrtN" if exponent < -0.5 else "generic"

    def ev(n):
        return scale * float(n) ** exponent

    return EpsilonSchedule(ev, cls)


@dataclass(frozen=True)
class MaximumInfo:
    kind: str
    x_star: np.ndarray
    x_star_of_N: Callable[[int], np.ndarray]
    neighborhood: BoxDomain
    boundary_axis: Optional[int] = None

    def __post_init__(self):
        if self.kind not in (INTERIOR, BOUNDARY):
            raise ValueError(f"unknown maximum kind {self.kind!r}")
        if self.kind == BOUNDARY and self.boundary_axis is None:
            raise ValueError("boundary maximum needs boundary_axis")
        object.__setattr__(self, "x_star", _freeze(np.atleast_1d(self.x_star)))


@dataclass(frozen=True)
class ProblemSpec:
    """One Laplace problem: integral of g(x) exp(N f(x, N)) over the domain,
    with f(x, N) = f_limit(x) + epsilon(N) * sigma(x)."""

    name: str
    dimension: int
    domain: BoxDomain
    f_limit: ScalarField
    g: ScalarField
    maximum: MaximumInfo
    sigma: Optional[ScalarField] = None
    epsilon: EpsilonSchedule = field(default_factory=zero_epsilon)
    n_zero: int = 1
    exact_integral: Optional[Callable[[int], float]] = None

    def __post_init__(self):
        if self.dimension != self.domain.dimension:
            raise ValueError("dimension mismatch with domain")
        if self.n_zero < 1:
            raise ValueError("n_zero must be a positive integer")
        if not self.domain.contains_box(self.maximum.neighborhood):
            raise ValueError("neighborhood must be contained in the domain")

    # box-frame views ------------------------------------------------------
    @property
    def f_limit_box(self) -> ScalarField:
        return rotated_view(self.f_limit, self.domain.rotation)

    @property
    def sigma_box(self) -> Optional[ScalarField]:
        if self.sigma is None:
            return None
        return rotated_view(self.sigma, self.domain.rotation)

    @property
    def g_box(self) -> ScalarField:
        return rotated_view(self.g, self.domain.rotation)

    @property
    def z_star(self) -> np.ndarray:
        return self.domain.to_box(self.maximum.x_star)

    def z_star_of_N(self, N: int) -> np.ndarray:
        return self.domain.to_box(self.maximum.x_star_of_N(int(N)))

    def f_of(self, N: int) -> ScalarField:
        return assemble_f(self, N)

    def f_of_box(self, N: int, check_range: bool = False) -> ScalarField:
        return rotated_view(
            assemble_f(self, N, check_range=check_range), self.domain.rotation
        )


def assemble_f(spec: ProblemSpec, N: int, check_range: bool = True) -> ScalarField:
    """f(x, N) = f_limit(x) + epsilon(N) * sigma(x); derivative handles
    compose linearly when both components provide them.

    ``check_range=False`` skips the N > n_zero gate (reference integration
    and maximizer location are meaningful at any N; the certified
    approximations are not)."""
    N = int(N)
    if check_range and N <= spec.n_zero:
        raise SweepRangeError(
            f"N={N} must exceed n_zero={spec.n_zero} for problem {spec.name!r}"
        )
    eps = float(spec.epsilon.evaluate(N))
    if spec.sigma is None or eps == 0.0:
        base = spec.f_limit
        return ScalarField(
            base.evaluate, base.gradient, base.hessian, base.third_tensor,
            name=f"{spec.name}:f(N={N})",
        )
    return add_fields(spec.f_limit, spec.sigma, eps, name=f"{spec.name}:f(N={N})")


# ---------------------------------------------------------------------------
# numeric maximization helpers (box frame)
# ---------------------------------------------------------------------------

def _fd_gradient(fld: ScalarField, z, box: BoxDomain, h: float) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    m = z.size
    g = np.zeros(m)
    for i in range(m):
        room_up = box.upper[i] - z[i]
        room_dn = z[i] - box.lower[i]
        e = np.zeros(m)
        e[i] = 1.0
        if room_up >= h and room_dn >= h:
            g[i] = (field_value(fld, z + h * e) - field_value(fld, z - h * e)) / (2 * h)
        elif room_up >= 2 * h:
            g[i] = (
                -1.5 * field_value(fld, z)
                + 2.0 * field_value(fld, z + h * e)
                - 0.5 * field_value(fld, z + 2 * h * e)
            ) / h
        else:
            g[i] = (
                1.5 * field_value(fld, z)
                - 2.0 * field_value(fld, z - h * e)
                + 0.5 * field_value(fld, z - 2 * h * e)
            ) / h
    return g


def gradient_at(fld: ScalarField, z, box: BoxDomain, h: Optional[float] = None) -> np.ndarray:
    if fld.gradient is not None:
        return np.asarray(fld.gradient(np.asarray(z, dtype=float)), dtype=float)
    if h is None:
        h = 1e-6 * float(np.min(box.edges))
    return _fd_gradient(fld, z, box, h)


def hessian_at(fld: ScalarField, z, box: BoxDomain, h: Optional[float] = None) -> np.ndarray:
    if fld.hessian is not None:
        return np.asarray(fld.hessian(np.asarray(z, dtype=float)), dtype=float)
    from .derivatives import bundle_at  # local import to avoid a cycle

    if h is None:
        h = 1e-4 * float(np.min(box.edges))
    return bundle_at(fld, np.asarray(z, dtype=float), h, box=box).hessian


def locate_maximum(
    fld: ScalarField,
    box: BoxDomain,
    start,
    fixed_axes: Optional[dict[int, float]] = None,
    gtol: float = 1e-12,
):
    """Maximize a field over a box (box frame), optionally with some
    coordinates pinned (used for face-restricted maxima).  L-BFGS-B first,
    then a projected Newton polish for high-accuracy critical points.

    Returns (z, value)."""
    fixed_axes = dict(fixed_axes or {})
    m = box.dimension
    free = [i for i in range(m) if i not in fixed_axes]
    z0 = np.asarray(start, dtype=float).copy()
    for i, v in fixed_axes.items():
        z0[i] = v

    def embed(zf):
        z = z0.copy()
        z[free] = zf
        return z

    if free:
        def neg(zf):
            return -field_value(fld, embed(zf))

        jac = None
        if fld.gradient is not None:
            def jac(zf):
                g = np.asarray(fld.gradient(embed(zf)), dtype=float)
                return -g[free]

        bounds = [(box.lower[i], box.upper[i]) for i in free]
        res = optimize.minimize(
            neg, z0[free], jac=jac, method="L-BFGS-B", bounds=bounds,
            options={"maxiter": 500, "ftol": 1e-16, "gtol": 1e-11},
        )
        z = embed(res.x)
    else:
        z = z0

    # Newton polish on coordinates that are strictly inside the box.
    h_g = 1e-6 * float(np.min(box.edges))
    for _ in range(40):
        inner = [
            i for i in free
            if z[i] > box.lower[i] + 1e-13 and z[i] < box.upper[i] - 1e-13
        ]
        if not inner:
            break
        g = gradient_at(fld, z, box, h_g)[inner]
        if np.max(np.abs(g)) <= gtol:
            break
        H = hessian_at(fld, z, box)[np.ix_(inner, inner)]
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            break
        if not np.all(np.isfinite(step)):
            break
        # limit the step to stay well-behaved, then clip into the box
        nstep = float(np.max(np.abs(step)))
        if nstep > 0.25 * float(np.min(box.edges)):
            step *= 0.25 * float(np.min(box.edges)) / nstep
        z_new = z.copy()
        z_new[inner] = z[inner] + step
        z_new = box.clip(z_new)
        if field_value(fld, z_new) < field_value(fld, z) - 1e-9:
            break
        if np.max(np.abs(z_new - z)) < 1e-15:
            z = z_new
            break
        z = z_new
    return z, field_value(fld, z)


# ---------------------------------------------------------------------------
# defaults for the certified neighborhood and the admissible-N threshold
# ---------------------------------------------------------------------------

def default_neighborhood(
    domain: BoxDomain,
    z_star: np.ndarray,
    boundary_axis: Optional[int] = None,
    boundary_side: Optional[int] = None,
) -> BoxDomain:
    """Half-width min(0.25 * edge, distance from the maximizer to the nearest
    non-maximizing face), anchored at the face for boundary problems."""
    z_star = np.asarray(z_star, dtype=float)
    m = domain.dimension
    dists = []
    for j in range(m):
        for side, bound in ((0, domain.lower[j]), (1, domain.upper[j])):
            if boundary_axis is not None and j == boundary_axis and side == boundary_side:
                continue
            dists.append(abs(z_star[j] - bound))
    d = min(dists)
    lo = np.array(domain.lower)
    up = np.array(domain.upper)
    out_lo, out_up = np.empty(m), np.empty(m)
    for i in range(m):
        hw = min(0.25 * (up[i] - lo[i]), d)
        if boundary_axis is not None and i == boundary_axis:
            if boundary_side == 0:
                out_lo[i], out_up[i] = lo[i], min(up[i], lo[i] + hw)
            else:
                out_lo[i], out_up[i] = max(lo[i], up[i] - hw), up[i]
        else:
            out_lo[i] = max(lo[i], z_star[i] - hw)
            out_up[i] = min(up[i], z_star[i] + hw)
    return BoxDomain(out_lo, out_up, domain.rotation)


def window_radius(kind: str, N: int) -> float:
    """Radius of the shrinking window around the maximizer used by the
    remainder decompositions."""
    n = float(N)
    return n ** (-1.0 / 3.0) if kind == INTERIOR else n ** (-0.5)


def window_fits(
    neighborhood: BoxDomain,
    z_star_N: np.ndarray,
    kind: str,
    N: int,
    domain: Optional[BoxDomain] = None,
) -> bool:
    """Ball of the window radius around z*(N), intersected with the domain,
    must fit inside the neighborhood box."""
    r = window_radius(kind, N)
    z = np.asarray(z_star_N, dtype=float)
    for i in range(neighborhood.dimension):
        lo_need = z[i] - r
        up_need = z[i] + r
        if domain is not None:
            lo_need = max(lo_need, domain.lower[i])
            up_need = min(up_need, domain.upper[i])
        if lo_need < neighborhood.lower[i] - 1e-12 or up_need > neighborhood.upper[i] + 1e-12:
            return False
    return True


def default_n_zero(
    domain: BoxDomain,
    neighborhood: BoxDomain,
    kind: str,
    z_star_of_N: Callable[[int], np.ndarray],
    n_max: int = 10**9,
) -> int:
    """Smallest admissible threshold: the first N whose window fits inside
    the neighborhood, minus one (so that N > n_zero admits it).  The window
    radius and the maximizer drift both shrink with N, so exponential search
    plus bisection suffices."""

    def fits(n: int) -> bool:
        return window_fits(neighborhood, z_star_of_N(n), kind, n, domain)

    hi = 1
    while not fits(hi):
        hi *= 2
        if hi > n_max:
            raise DomainError(f"no N <= {n_max} fits the window inside the neighborhood")
    lo = hi // 2  # lo does not fit (or hi == 1)
    while hi - lo > 1 and lo >= 1:
        mid = (lo + hi) // 2
        if fits(mid):
            hi = mid
        else:
            lo = mid
    return max(1, hi - 1)


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

def verify_unique_maximum(spec: ProblemSpec, grid_res: int = 64, N: Optional[int] = None) -> None:
    """Grid falsification of maximizer uniqueness: no node outside the
    certified neighborhood may come within 1e-10 of the maximum."""
    fld = spec.f_limit_box if N is None else spec.f_of_box(N)
    pts = spec.domain.grid_points(grid_res)
    vals = field_values(fld, pts)
    if not np.all(np.isfinite(vals)):
        raise FieldEvaluationError("non-finite field value on the uniqueness grid")
    vmax = float(np.max(vals))
    nb = spec.maximum.neighborhood
    inside = np.all(
        (pts >= nb.lower - 1e-12) & (pts <= nb.upper + 1e-12), axis=1
    )
    outside_near = (~inside) & (vals >= vmax - _TIE_TOL)
    if np.any(outside_near):
        raise NonUniqueMaximumError(
            f"{int(np.sum(outside_near))} grid nodes outside the neighborhood tie the maximum"
        )


def classify_maximum(spec: ProblemSpec, grid_res: int = 64) -> MaximumInfo:
    """Locate and classify the limit maximizer of f over the domain and
    package it with a default certified neighborhood.

    Raises AmbiguousMaximumError when the maximizer hugs a face but neither
    the interior nor the boundary criteria hold, and NonUniqueMaximumError
    when non-adjacent grid cells tie."""
    if grid_res < 8:
        raise ValueError("grid_res must be at least 8 per axis")
    box = spec.domain
    m = box.dimension
    fld = spec.f_limit_box
    axes = box.grid_axes(grid_res)
    pts = box.grid_points(grid_res)
    vals = field_values(fld, pts)
    if not np.all(np.isfinite(vals)):
        raise FieldEvaluationError("non-finite field value on the classification grid")
    shape = tuple(len(a) for a in axes)
    vgrid = vals.reshape(shape)
    flat_arg = int(np.argmax(vals))
    arg_idx = np.array(np.unravel_index(flat_arg, shape))
    vmax = float(vals[flat_arg])

    tied = np.argwhere(vgrid >= vmax - _TIE_TOL)
    if len(tied) > 1:
        cheb = np.max(np.abs(tied - arg_idx), axis=1)
        if np.any(cheb > 1):
            raise NonUniqueMaximumError(
                "non-adjacent grid cells tie the maximum within 1e-10"
            )

    start = pts[flat_arg]
    z, _ = locate_maximum(fld, box, start)
    cell = box.edges / grid_res

    near = []
    for j in range(m):
        if z[j] - box.lower[j] < cell[j]:
            near.append((j, 0))
        if box.upper[j] - z[j] < cell[j]:
            near.append((j, 1))

    scale = max(1.0, float(np.max(np.abs(vals))))
    h_g = 1e-6 * float(np.min(box.edges))

    def make_info(kind, z_at, axis=None, side=None):
        nb = default_neighborhood(box, z_at, axis, side)
        fixed = {axis: z_at[axis]} if kind == BOUNDARY else None

        def x_star_of_N(N, _fixed=fixed, _z=np.array(z_at)):
            f_n = spec.f_of_box(int(N))
            zn, _ = locate_maximum(f_n, box, _z, fixed_axes=_fixed)
            return box.to_ambient(zn)

        n0 = default_n_zero(box, nb, kind, lambda n: box.to_box(x_star_of_N(n)))
        info = MaximumInfo(
            kind=kind,
            x_star=box.to_ambient(z_at),
            x_star_of_N=x_star_of_N,
            neighborhood=nb,
            boundary_axis=axis,
        )
        _verify_per_n(spec, info, n0, side)
        return info, n0

    if not near:
        g = gradient_at(fld, z, box, h_g)
        if np.linalg.norm(g) > _GRAD_TOL * scale:
            raise AmbiguousMaximumError(
                f"interior maximizer with gradient norm {np.linalg.norm(g):.3e}"
            )
        H = hessian_at(fld, z, box)
        if np.max(np.linalg.eigvalsh(0.5 * (H + H.T))) >= 0:
            raise DefinitenessError("Hessian at the interior maximizer is not negative definite")
        info, _ = make_info(INTERIOR, z)
        return info

    if len(near) > 1:
        raise AmbiguousMaximumError(
            "maximizer binds more than one face (corner maxima are unsupported)"
        )

    axis, side = near[0]
    face_val = box.lower[axis] if side == 0 else box.upper[axis]
    z_face = z.copy()
    z_face[axis] = face_val
    z_face, _ = locate_maximum(fld, box, z_face, fixed_axes={axis: face_val})

    g = gradient_at(fld, z_face, box, h_g)
    tang = np.delete(g, axis)
    inward_sign = 1.0 if side == 0 else -1.0
    inward = inward_sign * g[axis]
    if tang.size and np.linalg.norm(tang) > _GRAD_TOL * scale:
        raise AmbiguousMaximumError(
            f"tangential gradient {np.linalg.norm(tang):.3e} at the face maximizer"
        )
    if inward < -_GRAD_TOL * scale:
        # strictly decreasing into the domain: genuine boundary maximum
        if m > 1:
            Ht = np.delete(np.delete(hessian_at(fld, z_face, box), axis, 0), axis, 1)
            if np.max(np.linalg.eigvalsh(0.5 * (Ht + Ht.T))) >= 0:
                raise DefinitenessError(
                    "tangent Hessian at the boundary maximizer is not negative definite"
                )
        info, _ = make_info(BOUNDARY, z_face, axis, side)
        return info
    # not boundary-critical; accept interior only if the free maximizer is
    # critical and clearly detached from the face
    g_free = gradient_at(fld, z, box, h_g)
    if (
        np.linalg.norm(g_free) <= _GRAD_TOL * scale
        and abs(z[axis] - face_val) > 1e-6 * box.edges[axis]
    ):
        H = hessian_at(fld, z, box)
        if np.max(np.linalg.eigvalsh(0.5 * (H + H.T))) >= 0:
            raise DefinitenessError("Hessian at the interior maximizer is not negative definite")
        info, _ = make_info(INTERIOR, z)
        return info
    raise AmbiguousMaximumError(
        "maximizer within one grid cell of a face but the gradient test is inconclusive"
    )


def _verify_per_n(spec: ProblemSpec, info: MaximumInfo, n0: int, side) -> None:
    """Spot-check the classified maximum at sample N beyond the threshold:
    the drifting maximizer stays in the neighborhood and keeps the
    kind-specific derivative signature."""
    box = spec.domain
    nb = info.neighborhood
    h_g = 1e-6 * float(np.min(box.edges))
    for n in (n0 + 1, 4 * (n0 + 1)):
        z_n = box.to_box(info.x_star_of_N(n))
        if not nb.contains_z(z_n, tol=1e-9):
            raise AmbiguousMaximumError(
                f"maximizer at N={n} escapes the default neighborhood"
            )
        f_n = spec.f_of_box(n)
        g = gradient_at(f_n, z_n, box, h_g)
        scale = max(1.0, abs(float(np.asarray(f_n.evaluate(z_n)))))
        if info.kind == INTERIOR:
            if np.linalg.norm(g) > _GRAD_TOL * scale:
                raise AmbiguousMaximumError(
                    f"maximizer at N={n} is not a critical point"
                )
            H = hessian_at(f_n, z_n, box)
            if np.max(np.linalg.eigvalsh(0.5 * (H + H.T))) >= 0:
                raise DefinitenessError(
                    f"Hessian at the N={n} maximizer is not negative definite"
                )
        else:
            tang = np.delete(g, info.boundary_axis)
            inward = (1.0 if side == 0 else -1.0) * g[info.boundary_axis]
            if tang.size and np.linalg.norm(tang) > _GRAD_TOL * scale:
                raise AmbiguousMaximumError(
                    f"tangential gradient does not vanish at the N={n} maximizer"
                )
            if inward >= -_GRAD_TOL * scale:
                raise AmbiguousMaximumError(
                    f"inward derivative is not strictly negative at N={n}"
                )


def boundary_side(spec: ProblemSpec) -> int:
    """0 if the maximizing face is the lower bound of the boundary axis."""
    axis = spec.maximum.boundary_axis
    z = spec.z_star
    if abs(z[axis] - spec.domain.lower[axis]) <= abs(z[axis] - spec.domain.upper[axis]):
        return 0
    return 1


def rotate_problem(spec: ProblemSpec, R) -> ProblemSpec:
    """Physically rotated copy: domain rotation composed with R and fields
    pulled back, so the box frame (and classification) is unchanged."""
    R = np.asarray(R, dtype=float)
    dom = BoxDomain(spec.domain.lower, spec.domain.upper, R @ spec.domain.rotation)
    Rt = R.T

    def pull(fld: ScalarField) -> ScalarField:
        return rotated_view(fld, Rt)

    old_max = spec.maximum
    new_max = MaximumInfo(
        kind=old_max.kind,
        x_star=old_max.x_star @ R.T,
        x_star_of_N=lambda n: old_max.x_star_of_N(n) @ R.T,
        neighborhood=BoxDomain(
            old_max.neighborhood.lower, old_max.neighborhood.upper, dom.rotation
        ),
        boundary_axis=old_max.boundary_axis,
    )
    return ProblemSpec(
        name=spec.name + "_rotated",
        dimension=spec.dimension,
        domain=dom,
        f_limit=pull(spec.f_limit),
        g=pull(spec.g),
        maximum=new_max,
        sigma=None if spec.sigma is None else pull(spec.sigma),
        epsilon=spec.epsilon,
        n_zero=spec.n_zero,
        exact_integral=spec.exact_integral,
    )

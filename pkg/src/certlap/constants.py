"""Certified numeric derivative bounds over the neighborhood, the domain
complement, and the N-sweep.

Sup-type constants are grid maxima multiplied by the safety factor; inf-type
constants are grid minima divided by it.  The quantifier over all N > n_zero
is replaced by the finite sweep actually certified (recorded in the report),
and grids nest under doubling so refinement is monotone by construction.
Grid sweeps reduce through order-independent max/min, so results do not
depend on how a caller partitions the work.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .derivatives import default_fd_step, gradients_on, hessians_on, third_norms_on
from .errors import AssumptionViolationError, DefinitenessError, FieldEvaluationError
from .problems import (
    BOUNDARY,
    ProblemSpec,
    field_values,
    locate_maximum,
)


@dataclass(frozen=True)
class ConstantsReport:
    F2: float
    F2_prime: float
    F2_prime_Omega: float
    F3: float
    G: float
    G1: float
    lambda_det: float
    Lambda_det: float
    F1_prime: Optional[float]
    F1_prime_Omega: Optional[float]
    grid_res: int
    n_sweep: tuple[int, ...]
    safety_factor: float
    fd_step: float
    boundary_axis: Optional[int]
    problem: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["n_sweep"] = list(self.n_sweep)
        return d

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, **kw)


def _tangent(H: np.ndarray, axis: int) -> np.ndarray:
    return np.delete(np.delete(H, axis, axis=-2), axis, axis=-1)


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise FieldEvaluationError(f"non-finite {what} on the constants grid")


def estimate_constants(
    spec: ProblemSpec,
    grid_res: int = 64,
    n_sweep=(25, 100, 400, 1600),
    safety_factor: float = 1.1,
) -> ConstantsReport:
    """Certified bounds on the derivative constants of one problem.

    Boundary problems use the tangent Hessian (coordinates of the maximizing
    face) for the inverse-Hessian and determinant constants and the inward
    orthogonal first derivative for F1_prime; the full Hessian norm backs F2
    in both cases.
    """
    if grid_res < 16:
        raise ValueError("grid_res must be at least 16 per axis")
    n_sweep = tuple(int(n) for n in n_sweep)
    if not n_sweep:
        raise ValueError("n_sweep must be nonempty")
    if any(n <= spec.n_zero for n in n_sweep):
        raise ValueError(f"every sweep N must exceed n_zero={spec.n_zero}")
    if safety_factor < 1.0:
        raise ValueError("safety_factor must be at least 1")

    box = spec.domain
    nb = spec.maximum.neighborhood
    m = box.dimension
    boundary = spec.maximum.kind == BOUNDARY
    axis = spec.maximum.boundary_axis
    h = default_fd_step(box)

    nb_pts = nb.grid_points(grid_res)
    om_pts = box.grid_points(grid_res)
    outside = ~np.all(
        (om_pts >= nb.lower - 1e-12) & (om_pts <= nb.upper + 1e-12), axis=1
    )
    has_outside = bool(np.any(outside))
    out_pts = om_pts[outside]

    g_box = spec.g_box
    g_abs = np.abs(field_values(g_box, om_pts))
    _check_finite(g_abs, "g")
    G = float(np.max(g_abs))
    g_grads = gradients_on(g_box, nb_pts, box, h)
    _check_finite(g_grads, "grad g")
    G1 = float(np.max(np.linalg.norm(g_grads, axis=-1)))

    n_independent = spec.sigma is None or spec.epsilon.decay_class == "zero"
    sweep_eval = n_sweep[:1] if n_independent else n_sweep

    F2 = F3 = Lam = -math.inf
    F2p = lam = F1p = math.inf
    gap2 = gap1 = math.inf

    for N in sweep_eval:
        f_n = spec.f_of_box(N)
        H = hessians_on(f_n, nb_pts, box, h)
        _check_finite(H, "Hessian")
        eigs = np.linalg.eigvalsh(0.5 * (H + np.swapaxes(H, -1, -2)))
        F2 = max(F2, float(np.max(np.abs(eigs))))
        T = third_norms_on(f_n, nb_pts, box, 10 * h)
        _check_finite(T, "third tensor")
        F3 = max(F3, float(np.max(T)))

        Ht = _tangent(H, axis) if boundary else H
        if Ht.shape[-1] > 0:
            eig_t = np.linalg.eigvalsh(0.5 * (Ht + np.swapaxes(Ht, -1, -2)))
            if float(np.max(eig_t)) >= 0.0:
                where = "tangent Hessian" if boundary else "Hessian"
                raise DefinitenessError(
                    f"{where} not negative definite on the neighborhood grid (N={N})"
                )
            F2p = min(F2p, float(np.min(np.abs(eig_t))))
            dets = np.abs(np.linalg.det(Ht))
            lam = min(lam, float(np.min(dets)))
            Lam = max(Lam, float(np.max(dets)))
        else:
            # one-dimensional boundary problem: empty tangent space
            lam = min(lam, 1.0)
            Lam = max(Lam, 1.0)

        if boundary:
            grads = gradients_on(f_n, nb_pts, box, h)
            _check_finite(grads, "gradient")
            F1p = min(F1p, float(np.min(np.abs(grads[..., axis]))))

    for N in n_sweep:
        f_n = spec.f_of_box(N)
        z_star_n = spec.z_star_of_N(N)
        fixed = {axis: z_star_n[axis]} if boundary else None
        z_opt, f_star = locate_maximum(f_n, box, z_star_n, fixed_axes=fixed)
        if has_outside:
            f_out = field_values(f_n, out_pts)
            _check_finite(f_out, "f on the complement grid")
            gap = f_star - float(np.max(f_out))
            dists = np.linalg.norm(out_pts - z_opt, axis=1)
            dmax = float(np.max(dists))
            gap2 = min(gap2, gap / dmax**2)
            gap1 = min(gap1, gap / dmax)
        if n_independent:
            break  # the gap is N-independent too

    sf = float(safety_factor)
    F2 *= sf
    F3 *= sf
    G *= sf
    G1 *= sf
    Lam *= sf
    F2p /= sf
    lam /= sf
    F2pO = min(F2p, gap2 / sf) if has_outside else F2p
    if boundary:
        F1p /= sf
        F1pO = min(F1p, gap1 / sf) if has_outside else F1p
    else:
        F1p = F1pO = None

    for name, val in (
        ("F2_prime", F2p),
        ("F2_prime_Omega", F2pO),
        ("lambda", lam),
        ("F1_prime", F1p),
        ("F1_prime_Omega", F1pO),
    ):
        if val is not None and not val > 0.0:
            raise AssumptionViolationError(name, f"certified value {val} is not positive")

    return ConstantsReport(
        F2=F2,
        F2_prime=F2p,
        F2_prime_Omega=F2pO,
        F3=F3,
        G=G,
        G1=G1,
        lambda_det=lam,
        Lambda_det=Lam,
        F1_prime=F1p,
        F1_prime_Omega=F1pO,
        grid_res=grid_res,
        n_sweep=n_sweep,
        safety_factor=sf,
        fd_step=h,
        boundary_axis=axis if boundary else None,
        problem=spec.name,
    )


def refine_constants(report: ConstantsReport, spec: ProblemSpec) -> ConstantsReport:
    """Recompute on a doubled (nested) grid; sup-type estimates can only
    grow and inf-type estimates can only shrink."""
    return estimate_constants(
        spec,
        grid_res=2 * report.grid_res,
        n_sweep=report.n_sweep,
        safety_factor=report.safety_factor,
    )


def audit_constants(
    spec: ProblemSpec,
    report: ConstantsReport,
    n_points: int = 1000,
    seed: int = 0,
    slack: float = 1.0001,
) -> dict:
    """Random-point soundness audit of every report field.

    Draws points in the neighborhood (and the complement for the gap-type
    constants) and checks the pointwise inequalities each certified constant
    claims, with multiplicative tolerance ``slack``.  Returns a dict with
    ``ok`` and any failures."""
    rng = np.random.default_rng(seed)
    box = spec.domain
    nb = spec.maximum.neighborhood
    m = box.dimension
    boundary = spec.maximum.kind == BOUNDARY
    axis = report.boundary_axis
    h = report.fd_step

    pts = rng.uniform(nb.lower, nb.upper, size=(n_points, m))
    om = rng.uniform(box.lower, box.upper, size=(4 * n_points, m))
    inside = np.all((om >= nb.lower - 1e-12) & (om <= nb.upper + 1e-12), axis=1)
    out_pts = om[~inside][:n_points]

    failures: list[str] = []

    def check(cond, label):
        if not cond:
            failures.append(label)

    g_box = spec.g_box
    check(float(np.max(np.abs(field_values(g_box, om)))) <= report.G * slack, "G")
    gg = gradients_on(g_box, pts, box, h)
    check(float(np.max(np.linalg.norm(gg, axis=-1))) <= report.G1 * slack, "G1")

    for N in report.n_sweep:
        f_n = spec.f_of_box(N)
        H = hessians_on(f_n, pts, box, h)
        eigs = np.linalg.eigvalsh(0.5 * (H + np.swapaxes(H, -1, -2)))
        check(float(np.max(np.abs(eigs))) <= report.F2 * slack, f"F2@N={N}")
        T = third_norms_on(f_n, pts, box, 10 * h)
        check(float(np.max(T)) <= report.F3 * slack + 1e-12, f"F3@N={N}")

        Ht = _tangent(H, axis) if boundary else H
        if Ht.shape[-1] > 0:
            eig_t = np.linalg.eigvalsh(0.5 * (Ht + np.swapaxes(Ht, -1, -2)))
            check(
                float(np.min(np.abs(eig_t))) >= report.F2_prime / slack,
                f"F2_prime@N={N}",
            )
            dets = np.abs(np.linalg.det(Ht))
            check(float(np.min(dets)) >= report.lambda_det / slack, f"lambda@N={N}")
            check(float(np.max(dets)) <= report.Lambda_det * slack, f"Lambda@N={N}")

        if boundary:
            grads = gradients_on(f_n, pts, box, h)
            check(
                float(np.min(np.abs(grads[..., axis]))) >= report.F1_prime / slack,
                f"F1_prime@N={N}",
            )

        if len(out_pts):
            z_star_n = spec.z_star_of_N(N)
            fixed = {axis: z_star_n[axis]} if boundary else None
            z_opt, f_star = locate_maximum(f_n, box, z_star_n, fixed_axes=fixed)
            f_out = field_values(f_n, out_pts)
            d = np.linalg.norm(out_pts - z_opt, axis=1)
            drop = f_star - f_out
            check(
                bool(np.all(drop >= report.F2_prime_Omega * d**2 / slack)),
                f"F2_prime_Omega@N={N}",
            )
            if boundary:
                check(
                    bool(np.all(drop >= report.F1_prime_Omega * d / slack)),
                    f"F1_prime_Omega@N={N}",
                )

    return {
        "ok": not failures,
        "failures": failures,
        "n_points": n_points,
        "problem": spec.name,
    }

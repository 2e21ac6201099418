"""Probability harness for the Gibbs measure with density proportional to
exp(N f(x, N)) on the domain: moment-generating-function checks for the law
of large numbers and for the fluctuation limits, the maximizer drift bound,
the tilted-maximizer estimates, and an exact rejection sampler.

Sign conventions (the source formulas leave two ambiguous):
  * the limiting covariance is (-D^2 f(x*))^{-1}, the only positive definite
    reading at a maximum;
  * the boundary fluctuation coordinate is N * (X_1 - x_1*) measured inward
    (nonnegative), so its limit is a standard exponential with rate
    |f'(x*)| and MGF rate / (rate - xi_1).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.special import ndtr

from .constants import ConstantsReport
from .errors import (
    AssumptionViolationError,
    DomainError,
    EnvelopeFailureError,
    InsufficientSampleError,
    MgfPoleError,
    TheoremMismatchError,
    TiltTooLargeError,
)
from .oracle import integrate
from .problems import (
    BOUNDARY,
    INTERIOR,
    BoxDomain,
    ProblemSpec,
    boundary_side,
    field_values,
    gradient_at,
    hessian_at,
    locate_maximum,
)

GAUSSIAN_INTERIOR = "gaussian_interior"
EXP_TIMES_GAUSSIAN_BOUNDARY = "exp_times_gaussian_boundary"


# ---------------------------------------------------------------------------
# measure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GibbsMeasure:
    spec: ProblemSpec
    N: int
    log_normalizer: float
    tol: float = 1e-10


def gibbs_measure(spec: ProblemSpec, N: int, tol: float = 1e-10) -> GibbsMeasure:
    from .problems import constant_field

    z = integrate(spec, N, tol=tol, weight=constant_field(1.0))
    return GibbsMeasure(spec=spec, N=int(N), log_normalizer=z.log_abs_value, tol=tol)


def measure_of(measure: GibbsMeasure, box: BoxDomain) -> float:
    """Probability of a sub-box under the Gibbs measure (oracle ratio)."""
    from .problems import constant_field

    spec = measure.spec
    if not spec.domain.contains_box(box):
        raise DomainError("box escapes the problem domain")
    num = integrate(
        spec, measure.N, tol=measure.tol, weight=constant_field(1.0),
        domain=box, center=spec.z_star_of_N(measure.N),
    )
    if num.value == 0.0:
        return 0.0
    return math.exp(num.log_abs_value - measure.log_normalizer)


# ---------------------------------------------------------------------------
# MGF reports
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MgfReport:
    xi: np.ndarray
    N: int
    mgf_value: float
    limit_prediction: float
    residual: float
    expected_decay: float
    kind: str
    hypothesis_violated: bool = False

    def to_dict(self) -> dict:
        return {
            "xi": list(np.atleast_1d(self.xi)),
            "N": self.N,
            "mgf_value": self.mgf_value,
            "limit_prediction": self.limit_prediction,
            "residual": self.residual,
            "expected_decay": self.expected_decay,
            "kind": self.kind,
            "hypothesis_violated": self.hypothesis_violated,
        }


def _limit_covariance(spec: ProblemSpec) -> np.ndarray:
    """(-D^2 f_limit(x*))^{-1} in the box frame, tangent coordinates only
    for boundary problems."""
    H = hessian_at(spec.f_limit_box, spec.z_star, spec.domain)
    if spec.maximum.kind == BOUNDARY:
        a = spec.maximum.boundary_axis
        H = np.delete(np.delete(H, a, 0), a, 1)
    if H.size == 0:
        return np.zeros((0, 0))
    return np.linalg.inv(-H)


def _limit_rate(spec: ProblemSpec) -> float:
    g = gradient_at(spec.f_limit_box, spec.z_star, spec.domain)
    return abs(float(g[spec.maximum.boundary_axis]))


def _check_tilt_inside(spec: ProblemSpec, N: int, tilt_gradient: np.ndarray, what: str):
    """The tilted exponent must still peak strictly inside the certified
    neighborhood; returns the tilted maximizer (box frame)."""
    from .problems import add_fields, polynomial_field

    f_n = spec.f_of_box(N)
    lin = polynomial_field(
        [(float(tilt_gradient[i]), tuple(1 if j == i else 0 for j in range(spec.dimension)))
         for i in range(spec.dimension)],
        name="tilt",
    )
    tilted = add_fields(f_n, lin, 1.0, name="tilted")
    z0 = spec.z_star_of_N(N)
    fixed = None
    if spec.maximum.kind == BOUNDARY and abs(tilt_gradient[spec.maximum.boundary_axis]) < 1e-15:
        fixed = {spec.maximum.boundary_axis: z0[spec.maximum.boundary_axis]}
    z_t, _ = locate_maximum(tilted, spec.domain, z0, fixed_axes=fixed)
    nb = spec.maximum.neighborhood
    margin = 1e-9 * np.min(spec.domain.edges)
    inside = np.all(z_t >= nb.lower - margin) and np.all(z_t <= nb.upper + margin)
    if not inside:
        raise TiltTooLargeError(
            f"{what}: tilted maximizer {z_t} leaves the certified neighborhood"
        )
    return z_t, tilted


def _eps_sqrt_n_violated(spec: ProblemSpec, N: int) -> bool:
    """True when eps(N) sqrt(N) is not decaying at N (checked on N, 4N, 16N)."""
    eps = spec.epsilon
    vals = [float(eps.evaluate(n)) * math.sqrt(n) for n in (N, 4 * N, 16 * N)]
    if all(v == 0.0 for v in vals):
        return False
    return not (vals[0] >= vals[1] >= vals[2] and vals[2] < vals[0])


def mgf_X(measure: GibbsMeasure, xi) -> MgfReport:
    """MGF of the identity vector under the Gibbs measure, as a quadrature
    ratio, against the constant-limit prediction exp(xi . x*)."""
    from .problems import constant_field

    spec = measure.spec
    N = measure.N
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    xi_box = spec.domain.to_box(xi)
    z_t, _ = _check_tilt_inside(spec, N, xi_box / N, "mgf_X")

    def log_w(pts):
        pts = np.asarray(pts, dtype=float)
        return pts @ xi_box

    # the measure carries no g-weight, hence the explicit constant weight
    num = integrate(
        spec, N, tol=measure.tol, weight=constant_field(1.0), log_weight=log_w, center=z_t,
    )
    mgf = math.exp(num.log_abs_value - measure.log_normalizer)
    pred = math.exp(float(xi @ spec.maximum.x_star))
    eps_n = float(spec.epsilon.evaluate(N))
    return MgfReport(
        xi=xi,
        N=N,
        mgf_value=mgf,
        limit_prediction=pred,
        residual=abs(mgf / pred - 1.0),
        expected_decay=max(1.0 / math.sqrt(N), eps_n),
        kind="lln",
    )


def mgf_Y(measure: GibbsMeasure, xi) -> MgfReport:
    """MGF of the rescaled fluctuation vector.

    Interior: Y = sqrt(N) (X - x*), prediction exp(xi' Sigma xi / 2) with
    Sigma = (-D^2 f(x*))^{-1}.  Boundary: the boundary coordinate is scaled
    by N and measured inward; prediction rate/(rate - xi_1) times the
    tangential Gaussian factor."""
    from .problems import constant_field

    spec = measure.spec
    N = measure.N
    m = spec.dimension
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    if xi.size != m:
        raise ValueError("xi must have the problem dimension")
    xi_box = spec.domain.to_box(xi)
    sqrtN = math.sqrt(N)
    violated = _eps_sqrt_n_violated(spec, N)
    eps_n = float(spec.epsilon.evaluate(N))
    expected = max(1.0 / sqrtN, eps_n * sqrtN)
    z_star = spec.z_star

    if spec.maximum.kind == INTERIOR:
        tilt_grad = xi_box / sqrtN
        z_t, _ = _check_tilt_inside(spec, N, tilt_grad, "mgf_Y")

        def log_w(pts):
            pts = np.asarray(pts, dtype=float)
            return sqrtN * ((pts - z_star) @ xi_box)

        num = integrate(spec, N, tol=measure.tol, weight=constant_field(1.0),
                        log_weight=log_w, center=z_t)
        mgf = math.exp(num.log_abs_value - measure.log_normalizer)
        Sigma = _limit_covariance(spec)
        pred = math.exp(0.5 * float(xi_box @ Sigma @ xi_box))
        return MgfReport(xi, N, mgf, pred, abs(mgf / pred - 1.0), expected,
                         "fluctuation_interior", violated)

    axis = spec.maximum.boundary_axis
    side = boundary_side(spec)
    s = 1.0 if side == 0 else -1.0
    rate = _limit_rate(spec)
    xi1 = float(xi_box[axis])
    if abs(xi1) >= rate * (1.0 - 1e-3):
        raise MgfPoleError(
            f"boundary tilt xi_1={xi1} at or beyond the exponential pole (rate {rate})"
        )
    tilt_grad = np.array(xi_box, dtype=float) / sqrtN
    tilt_grad[axis] = xi1 * s  # N-scaled on the boundary axis: gradient xi1 * s
    z_t, _ = _check_tilt_inside(spec, N, tilt_grad, "mgf_Y")
    if abs(z_t[axis] - spec.z_star[axis]) > 1e-7 * spec.domain.edges[axis]:
        raise TiltTooLargeError("boundary tilt pushed the maximizer off the face")

    xi_hat = np.delete(xi_box, axis)

    def log_w(pts):
        pts = np.asarray(pts, dtype=float)
        t = s * (pts[..., axis] - z_star[axis])
        d_hat = np.delete(pts - z_star, axis, axis=-1)
        return N * xi1 * t + sqrtN * (d_hat @ xi_hat)

    num = integrate(spec, N, tol=measure.tol, weight=constant_field(1.0),
                    log_weight=log_w, center=z_t)
    mgf = math.exp(num.log_abs_value - measure.log_normalizer)
    Sigma_hat = _limit_covariance(spec)
    gauss = math.exp(0.5 * float(xi_hat @ Sigma_hat @ xi_hat)) if xi_hat.size else 1.0
    pred = rate / (rate - xi1) * gauss
    return MgfReport(xi, N, mgf, pred, abs(mgf / pred - 1.0), expected,
                     "fluctuation_boundary", violated)


def fluctuation_sweep(spec: ProblemSpec, n_sweep, xi, tol: float = 1e-10) -> dict:
    """mgf_Y residuals over a sweep, with the hypothesis flag (schedule-based)
    and an empirical non-decay flag."""
    rows = []
    for N in n_sweep:
        meas = gibbs_measure(spec, N, tol=tol)
        rows.append(mgf_Y(meas, xi))
    residuals = [r.residual for r in rows]
    nondecay = len(residuals) >= 2 and residuals[-1] >= residuals[0]
    return {
        "rows": rows,
        "residuals": residuals,
        "hypothesis_violated": any(r.hypothesis_violated for r in rows),
        "residual_nondecaying": bool(nondecay),
        "flagged": bool(nondecay or any(r.hypothesis_violated for r in rows)),
    }


# ---------------------------------------------------------------------------
# drift of the maximizer
# ---------------------------------------------------------------------------

def maximum_drift_check(spec: ProblemSpec, consts: ConstantsReport, n_sweep) -> list[dict]:
    """Per-N check of |x*(N) - x*| <= eps(N) |D sigma(x*)| / F2_prime."""
    if spec.sigma is None:
        raise ValueError("drift check needs a nonzero sigma perturbation")
    if all(float(spec.epsilon.evaluate(int(n))) == 0.0 for n in n_sweep):
        raise ValueError("drift check needs epsilon > 0 somewhere on the sweep")
    box = spec.domain
    nb = spec.maximum.neighborhood
    z_star = spec.z_star
    axis = spec.maximum.boundary_axis
    boundary = spec.maximum.kind == BOUNDARY

    dsig = gradient_at(spec.sigma_box, z_star, box)
    if boundary:
        dsig = np.delete(dsig, axis)
    dsig_norm = float(np.linalg.norm(dsig))

    rows = []
    for N in n_sweep:
        N = int(N)
        f_n = spec.f_of_box(N)
        fixed = {axis: z_star[axis]} if boundary else None
        z_n, _ = locate_maximum(f_n, box, z_star, fixed_axes=fixed)
        if not (np.all(z_n >= nb.lower - 1e-9) and np.all(z_n <= nb.upper + 1e-9)):
            raise AssumptionViolationError(
                "maximizer_drift", f"x*(N) left the certified neighborhood at N={N}"
            )
        drift_vec = z_n - z_star
        if boundary:
            drift_vec = np.delete(drift_vec, axis)
        drift = float(np.linalg.norm(drift_vec))
        bound = float(spec.epsilon.evaluate(N)) * dsig_norm / consts.F2_prime
        rows.append(
            {
                "N": N,
                "drift": drift,
                "bound": bound,
                "ok": drift <= bound * (1.0 + 1e-6) + 1e-12,
            }
        )
    return rows


# ---------------------------------------------------------------------------
# tilted-maximizer estimates
# ---------------------------------------------------------------------------

def tilted_maximizer_check(
    spec: ProblemSpec, consts: ConstantsReport, xi, n_sweep
) -> list[dict]:
    """Per-N bounded-ratio statistics for the tilted exponent
    f~(x, N) = f(x, N) + xi . (x - x*) / sqrt(N) at an interior maximum:

      (i)   ||x~*(N) - x*(N) - Sigma xi / sqrt(N)|| * N,
      (ii)  |f~(x~*) - f(x*(N), N) - xi' Sigma xi / (2N)| * min(N^{3/2}, sqrt(N)/eps),
      (iii) |sqrt(|det H(x*(N))| / |det H~(x~*)|) - 1| * sqrt(N),

    with Sigma = (-D^2 f(x*))^{-1}."""
    if spec.maximum.kind != INTERIOR:
        raise TheoremMismatchError("tilted-maximizer estimates require an interior maximum")
    xi = np.atleast_1d(np.asarray(xi, dtype=float))
    sweep = [int(n) for n in n_sweep]
    eps_scaled = [float(spec.epsilon.evaluate(n)) * math.sqrt(n) for n in sweep]
    if any(b > a + 1e-12 for a, b in zip(eps_scaled, eps_scaled[1:])):
        raise AssumptionViolationError(
            "epsilon_sqrtN", "eps(N) sqrt(N) must be nonincreasing on the sweep"
        )
    box = spec.domain
    xi_box = box.to_box(xi)
    z_star = spec.z_star
    Sigma = _limit_covariance(spec)

    rows = []
    for N in sweep:
        sqrtN = math.sqrt(N)
        f_n = spec.f_of_box(N)
        z_n, f_star_n = locate_maximum(f_n, box, spec.z_star_of_N(N))
        z_t, tilted = _check_tilt_inside(spec, N, xi_box / sqrtN, "tilted estimates")
        # tilt value relative to x*: f~ = f + xi.(x - x*)/sqrt(N)
        f_tilde_val = float(np.asarray(f_n.evaluate(z_t))) + float(
            xi_box @ (z_t - z_star)
        ) / sqrtN
        drift_pred = Sigma @ xi_box / sqrtN
        s1 = float(np.linalg.norm(z_t - z_n - drift_pred)) * N
        quad = 0.5 * float(xi_box @ Sigma @ xi_box) / N
        eps_n = float(spec.epsilon.evaluate(N))
        scale2 = N**1.5 if eps_n == 0.0 else min(N**1.5, sqrtN / eps_n)
        s2 = abs(f_tilde_val - f_star_n - quad) * scale2
        H_n = hessian_at(f_n, z_n, box)
        H_t = hessian_at(f_n, z_t, box)  # tilt is linear: same Hessian field
        ratio = math.sqrt(abs(np.linalg.det(H_n)) / abs(np.linalg.det(H_t)))
        s3 = abs(ratio - 1.0) * sqrtN
        rows.append({"N": N, "stat_drift": s1, "stat_value": s2, "stat_det": s3})
    return rows


# ---------------------------------------------------------------------------
# exact rejection sampler
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SampleBatch:
    draws: np.ndarray  # (count, m) ambient coordinates
    N: int
    seed: int
    workers: int
    proposed: int
    acceptance_rate: float
    mean: np.ndarray
    cov: np.ndarray
    problem: str
    spec: ProblemSpec

    @property
    def count(self) -> int:
        return self.draws.shape[0]

    def to_csv(self, path) -> None:
        m = self.draws.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{i + 1}" for i in range(m)])
            for row in self.draws:
                writer.writerow([format(v, ".17g") for v in row])


@dataclass(frozen=True)
class FluctuationModel:
    kind: str
    covariance: np.ndarray
    rate: Optional[float] = None


def build_fluctuation_model(spec: ProblemSpec) -> FluctuationModel:
    cov = _limit_covariance(spec)
    if spec.maximum.kind == INTERIOR:
        return FluctuationModel(GAUSSIAN_INTERIOR, cov)
    return FluctuationModel(EXP_TIMES_GAUSSIAN_BOUNDARY, cov, rate=_limit_rate(spec))


class _Envelope:
    """Certified dominating bound for rejection sampling, assembled from the
    constants report plus pointwise quantities at x*(N).

    Proposal: Gaussian at x*(N) with covariance 4 (-H)^{-1} / N (interior),
    or inward exponential with rate N F1'/2 times the tangential Gaussian
    (boundary), mixed with a uniform component on the domain.  The log bound
    is a closed-form supremum of certified exponent estimates, so the
    accept test is exact."""

    UNIFORM_WEIGHT = 0.05

    def __init__(self, spec: ProblemSpec, consts: ConstantsReport, N: int):
        self.spec = spec
        self.N = int(N)
        self.c = consts
        box = spec.domain
        m = box.dimension
        self.m = m
        self.boundary = spec.maximum.kind == BOUNDARY
        self.axis = spec.maximum.boundary_axis
        self.side = boundary_side(spec) if self.boundary else None
        self.z_n = spec.z_star_of_N(N)
        f_n = spec.f_of_box(N)
        self.f_n = f_n
        self.f_star = float(np.asarray(f_n.evaluate(self.z_n)))
        H = hessian_at(f_n, self.z_n, box)
        self.w = self.UNIFORM_WEIGHT
        self.log_vol = math.log(box.volume)
        nb = spec.maximum.neighborhood
        self.nb = nb

        if self.boundary:
            Ht = np.delete(np.delete(H, self.axis, 0), self.axis, 1)
            self.neg_Ht = -Ht
            self.rate_t = N * consts.F1_prime / 2.0
            # certified exponent bound inside the neighborhood:
            #   f - f* <= -F1' t + M_cross t s - (F2'/2) s^2
            self.cross = self._cross_bound()
            if m > 1:
                self.chol_t = np.linalg.cholesky(np.linalg.inv(self.neg_Ht) * 4.0 / N)
                lam_max = float(np.max(np.linalg.eigvalsh(self.neg_Ht)))
                _, logdet = np.linalg.slogdet(self.neg_Ht * N / (8.0 * math.pi))
                self.log_cg = 0.5 * logdet
            else:
                self.chol_t = np.zeros((0, 0))
                lam_max = 0.0
                self.log_cg = 0.0
            T = nb.edges[self.axis]
            S = self._tangent_radius()
            cs = consts.F2_prime / 2.0 - lam_max / 8.0
            sup = self._sup_boundary_core(consts.F1_prime / 2.0, self.cross, cs, T, S)
            log_core_norm = math.log(self.rate_t) + self.log_cg
            self.log_m_core = N * sup - math.log(1.0 - self.w) - log_core_norm
        else:
            self.neg_H = -H
            self.chol = np.linalg.cholesky(np.linalg.inv(self.neg_H) * 4.0 / N)
            lam_max = float(np.max(np.linalg.eigvalsh(self.neg_H)))
            _, logdet = np.linalg.slogdet(self.neg_H * N / (8.0 * math.pi))
            self.log_cg = 0.5 * logdet
            kappa = lam_max / 8.0 - consts.F2_prime / 2.0
            r_max = self._neighborhood_radius()
            sup = max(0.0, kappa) * r_max**2
            self.log_m_core = N * sup - math.log(1.0 - self.w) - self.log_cg

        self.log_m_out = -math.inf
        R = _complement_distance_local(spec)
        if R is not None:
            # the certified drop is measured from x*(N); shrink the
            # limit-based face distance by the maximizer drift
            R_n = max(0.0, R - float(np.linalg.norm(self.z_n - spec.z_star)))
            if self.boundary:
                drop = consts.F1_prime_Omega * R_n
            else:
                drop = consts.F2_prime_Omega * R_n**2
            self.log_m_out = -N * drop - math.log(self.w) + self.log_vol
        self.log_m = max(self.log_m_core, self.log_m_out)

    # -- geometry helpers --------------------------------------------------
    def _neighborhood_radius(self) -> float:
        nb = self.nb
        corners = np.stack([nb.lower, nb.upper])
        dmax = 0.0
        for idx in range(2**self.m):
            corner = np.array(
                [corners[(idx >> i) & 1, i] for i in range(self.m)]
            )
            dmax = max(dmax, float(np.linalg.norm(corner - self.z_n)))
        return dmax

    def _tangent_radius(self) -> float:
        nb = self.nb
        z = np.delete(self.z_n, self.axis)
        lo = np.delete(nb.lower, self.axis)
        up = np.delete(nb.upper, self.axis)
        return float(np.linalg.norm(np.maximum(np.abs(z - lo), np.abs(up - z)))) if z.size else 0.0

    def _cross_bound(self) -> float:
        """Certified sup of the mixed second derivatives coupling the
        boundary axis to the tangent block (grid + safety, like the report
        constants)."""
        spec, c = self.spec, self.c
        pts = self.nb.grid_points(min(c.grid_res, 32))
        from .derivatives import hessians_on

        sup = 0.0
        sweep = c.n_sweep if (spec.sigma is not None and spec.epsilon.decay_class != "zero") else c.n_sweep[:1]
        for N in sweep:
            H = hessians_on(spec.f_of_box(N), pts, spec.domain, c.fd_step)
            row = np.delete(H[..., self.axis, :], self.axis, axis=-1)
            if row.shape[-1]:
                sup = max(sup, float(np.max(np.linalg.norm(row, axis=-1))))
        return sup * c.safety_factor

    @staticmethod
    def _sup_boundary_core(half_rate, cross, cs, T, S) -> float:
        """max over 0<=t<=T, 0<=s<=S of -half_rate*t + cross*t*s - cs*s^2."""
        if S <= 0.0 or not math.isfinite(cs):
            # no tangential extent (or infinitely strong certified curvature):
            # the profile reduces to -half_rate * t <= 0
            return 0.0

        def val(t, s):
            return -half_rate * t + cross * t * s - cs * s * s

        best = 0.0
        for t in (0.0, T):
            cands = [0.0, S]
            if cs > 0:
                cands.append(min(S, max(0.0, cross * t / (2.0 * cs))))
            for s in cands:
                best = max(best, val(t, s))
        # the maximum over t of the s-maximized profile is at an endpoint
        # (convex quadratic in t when cs > 0), already covered above
        return best

    # -- densities ----------------------------------------------------------
    def log_q(self, z: np.ndarray) -> np.ndarray:
        """Log mixture proposal density at box-frame points (k, m)."""
        z = np.atleast_2d(z)
        if self.boundary:
            t = (1.0 if self.side == 0 else -1.0) * (z[:, self.axis] - self.z_n[self.axis])
            log_exp = np.where(
                t >= 0, math.log(self.rate_t) - self.rate_t * t, -np.inf
            )
            if self.m > 1:
                d = np.delete(z - self.z_n, self.axis, axis=1)
                quad = np.einsum("ki,ij,kj->k", d, self.neg_Ht, d)
                log_gauss = self.log_cg - (self.N / 8.0) * quad
            else:
                log_gauss = 0.0
            log_core = log_exp + log_gauss
        else:
            d = z - self.z_n
            quad = np.einsum("ki,ij,kj->k", d, self.neg_H, d)
            log_core = self.log_cg - (self.N / 8.0) * quad
        log_unif = math.log(self.w) - self.log_vol
        return np.logaddexp(math.log(1.0 - self.w) + log_core, log_unif)

    def propose(self, rng: np.random.Generator, k: int) -> np.ndarray:
        box = self.spec.domain
        m = self.m
        out = np.empty((k, m))
        pick_unif = rng.uniform(size=k) < self.w
        n_unif = int(np.sum(pick_unif))
        out[pick_unif] = rng.uniform(box.lower, box.upper, size=(n_unif, m))
        n_core = k - n_unif
        if self.boundary:
            t = rng.exponential(1.0 / self.rate_t, size=n_core)
            core = np.tile(self.z_n, (n_core, 1))
            sgn = 1.0 if self.side == 0 else -1.0
            core[:, self.axis] += sgn * t
            if m > 1:
                zhat = rng.standard_normal(size=(n_core, m - 1)) @ self.chol_t.T
                tang_axes = [i for i in range(m) if i != self.axis]
                core[:, tang_axes] += zhat
            out[~pick_unif] = core
        else:
            out[~pick_unif] = self.z_n + rng.standard_normal(size=(n_core, m)) @ self.chol.T
        return out


def _complement_distance_local(spec: ProblemSpec) -> Optional[float]:
    from .laplace import _complement_distance

    return _complement_distance(spec)


def sample(
    measure_or_spec,
    count: int,
    seed: int,
    consts: Optional[ConstantsReport] = None,
    N: Optional[int] = None,
    workers: int = 1,
) -> SampleBatch:
    """Exact i.i.d. draws from the Gibbs measure by rejection against a
    certified envelope.  Deterministic for a fixed (seed, workers): the
    count splits across worker streams seeded from (seed, worker index)."""
    if isinstance(measure_or_spec, GibbsMeasure):
        spec = measure_or_spec.spec
        N = measure_or_spec.N
    else:
        spec = measure_or_spec
        if N is None:
            raise ValueError("sampling from a ProblemSpec needs N")
    if count < 1:
        raise ValueError("count must be at least 1")
    if consts is None:
        from .constants import estimate_constants

        consts = estimate_constants(spec, grid_res=32, n_sweep=(int(N),))
    env = _Envelope(spec, consts, int(N))
    box = spec.domain

    counts = [count // workers] * workers
    for i in range(count % workers):
        counts[i] += 1

    chunks = []
    proposed_total = 0
    for widx, want in enumerate(counts):
        if want == 0:
            continue
        rng = np.random.default_rng([seed, widx])
        got: list[np.ndarray] = []
        n_have = 0
        proposed = 0
        while n_have < want:
            k = max(1024, 2 * (want - n_have))
            z = env.propose(rng, k)
            u = rng.uniform(size=k)
            inside = np.all((z >= box.lower) & (z <= box.upper), axis=1)
            proposed += k
            zi = z[inside]
            if len(zi):
                log_target = env.N * (field_values(env.f_n, zi) - env.f_star)
                log_ratio = log_target - env.log_q(zi)
                if np.any(log_ratio > env.log_m + 1e-9):
                    raise EnvelopeFailureError(
                        "certified envelope exceeded by a drawn point",
                        acceptance_rate=n_have / max(proposed, 1),
                    )
                acc = np.log(u[inside]) <= log_ratio - env.log_m
                sel = zi[acc]
                got.append(sel)
                n_have += len(sel)
            if proposed >= 4096 and n_have / proposed < 1e-4:
                raise EnvelopeFailureError(
                    f"acceptance rate {n_have / proposed:.2e} below 1e-4",
                    acceptance_rate=n_have / proposed,
                )
        chunks.append(np.concatenate(got)[:want])
        proposed_total += proposed

    z_draws = np.concatenate(chunks)
    x_draws = box.to_ambient(z_draws)
    acc_rate = count / proposed_total
    mean = np.mean(x_draws, axis=0)
    cov = np.cov(x_draws.T) if count > 1 else np.zeros((spec.dimension, spec.dimension))
    return SampleBatch(
        draws=x_draws,
        N=int(N),
        seed=seed,
        workers=workers,
        proposed=proposed_total,
        acceptance_rate=acc_rate,
        mean=np.atleast_1d(mean),
        cov=np.atleast_2d(cov),
        problem=spec.name,
        spec=spec,
    )


# ---------------------------------------------------------------------------
# empirical fluctuation tests
# ---------------------------------------------------------------------------

def ks_statistic(values, cdf) -> float:
    """One-sample Kolmogorov-Smirnov statistic against a cdf callable."""
    x = np.sort(np.asarray(values, dtype=float))
    n = len(x)
    F = np.asarray(cdf(x), dtype=float)
    upper = np.max(np.arange(1, n + 1) / n - F)
    lower = np.max(F - np.arange(0, n) / n)
    return float(max(upper, lower))


def transform_to_fluctuations(batch: SampleBatch) -> np.ndarray:
    """Case-appropriate rescaling of draws: sqrt(N) in Gaussian directions,
    N (inward) on the boundary axis.  Box-frame output, boundary axis first
    for boundary problems."""
    spec = batch.spec
    z = spec.domain.to_box(batch.draws)
    z_star = spec.z_star
    N = batch.N
    if spec.maximum.kind == INTERIOR:
        return math.sqrt(N) * (z - z_star)
    axis = spec.maximum.boundary_axis
    s = 1.0 if boundary_side(spec) == 0 else -1.0
    y1 = N * s * (z[:, axis] - z_star[axis])
    yhat = math.sqrt(N) * np.delete(z - z_star, axis, axis=1)
    return np.column_stack([y1, yhat]) if yhat.size else y1[:, None]


def empirical_limit_test(batch: SampleBatch, model: FluctuationModel) -> dict:
    """Kolmogorov-Smirnov statistics of the rescaled draws against the
    marginals of the limit model (whitened normal; unit-rate exponential on
    the boundary axis)."""
    if batch.count < 100:
        raise InsufficientSampleError("need at least 100 samples")
    Y = transform_to_fluctuations(batch)
    n = batch.count
    stats = []
    if model.kind == GAUSSIAN_INTERIOR:
        L = np.linalg.cholesky(model.covariance)
        Z = np.linalg.solve(L, Y.T).T
        for j in range(Z.shape[1]):
            stats.append(("normal", ks_statistic(Z[:, j], ndtr)))
    else:
        if model.rate is None or model.rate <= 0:
            raise ValueError("boundary model needs a positive rate")
        e = model.rate * Y[:, 0]
        stats.append(("exponential", ks_statistic(e, lambda t: -np.expm1(-np.maximum(t, 0.0)))))
        if Y.shape[1] > 1:
            L = np.linalg.cholesky(model.covariance)
            Z = np.linalg.solve(L, Y[:, 1:].T).T
            for j in range(Z.shape[1]):
                stats.append(("normal", ks_statistic(Z[:, j], ndtr)))
    return {
        "count": n,
        "marginals": [
            {"law": law, "ks": ks, "sqrt_n_ks": ks * math.sqrt(n)} for law, ks in stats
        ],
        "max_ks": max(ks for _, ks in stats),
    }

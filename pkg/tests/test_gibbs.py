import math

import numpy as np
import pytest
from scipy.special import erf

from certlap import (
    BoxDomain,
    build_fluctuation_model,
    empirical_limit_test,
    estimate_constants,
    fluctuation_sweep,
    get_problem,
    gibbs_measure,
    ks_statistic,
    maximum_drift_check,
    measure_of,
    mgf_X,
    mgf_Y,
    sample,
    tilted_maximizer_check,
    transform_to_fluctuations,
)
from certlap.errors import (
    DomainError,
    InsufficientSampleError,
    MgfPoleError,
    TheoremMismatchError,
    TiltTooLargeError,
)

SWEEP = (25, 100, 400, 1600)


class TestMeasure:
    def test_normalization(self, specs):
        for name in ("gauss1d", "exp1d", "mixed2d", "drift1d"):
            spec = specs[name]
            m = gibbs_measure(spec, 100, tol=1e-11)
            p = measure_of(m, spec.domain)
            assert abs(p - 1.0) <= 10 * 1e-11, name

    def test_gauss1d_one_sigma_scale(self, specs):
        # N = 100: X is nearly N(0, 1/100); P(|X| <= 0.01) = P(|Z| <= 0.1)
        m = gibbs_measure(specs["gauss1d"], 100, tol=1e-12)
        p = measure_of(m, BoxDomain([-0.01], [0.01]))
        expected = erf(0.1 / math.sqrt(2.0))
        assert p == pytest.approx(expected, abs=1e-4)
        assert p == pytest.approx(0.0797, abs=2e-4)

    def test_exp1d_truncated_exponential(self, specs):
        m = gibbs_measure(specs["exp1d"], 50, tol=1e-12)
        p = measure_of(m, BoxDomain([0.0], [1.0 / 50.0]))
        expected = (1 - math.exp(-1.0)) / (1 - math.exp(-50.0))
        assert p == pytest.approx(expected, rel=1e-9)
        assert p == pytest.approx(0.6321, abs=1e-4)

    def test_box_escape(self, specs):
        m = gibbs_measure(specs["gauss1d"], 100)
        with pytest.raises(DomainError):
            measure_of(m, BoxDomain([-2.0], [0.0]))


class TestMgfX:
    def test_zero_tilt_is_one(self, specs):
        for name in ("gauss1d", "exp1d", "mixed2d"):
            m = gibbs_measure(specs[name], 100)
            r = mgf_X(m, np.zeros(specs[name].dimension))
            assert r.mgf_value == pytest.approx(1.0, rel=1e-10)
            assert r.residual <= 1e-10

    def test_gauss1d_residual_decay(self, specs):
        # closed form: residual = exp(xi^2 / 2N) - 1, so a 4x step in N
        # shrinks it 4x (faster than the certified 1/sqrt(N) rate)
        residuals = []
        for n in (25, 100, 400):
            m = gibbs_measure(specs["gauss1d"], n, tol=1e-12)
            residuals.append(mgf_X(m, [0.5]).residual)
        for n, r in zip((25, 100, 400), residuals):
            # up to the exponentially small domain truncation
            assert r == pytest.approx(math.exp(0.125 / n) - 1.0, rel=2e-4)
        assert residuals[1] <= 0.3 * residuals[0]
        assert residuals[2] <= 0.3 * residuals[1]

    def test_exp1d_closed_form(self, specs):
        n, xi = 200, 0.5
        m = gibbs_measure(specs["exp1d"], n, tol=1e-12)
        r = mgf_X(m, [xi])
        closed = (n / (n - xi)) * (-math.expm1(-(n - xi))) / (-math.expm1(-n))
        assert r.mgf_value == pytest.approx(closed, rel=1e-10)
        assert r.limit_prediction == 1.0

    def test_expected_decay_field(self, specs):
        m = gibbs_measure(specs["eps1d"], 100)
        r = mgf_X(m, [0.5])
        assert r.expected_decay == pytest.approx(max(0.1, 100 ** -0.75))

    def test_tilt_too_large(self, specs):
        m = gibbs_measure(specs["gauss1d"], 25)
        with pytest.raises(TiltTooLargeError):
            mgf_X(m, [60.0])  # tilted maximizer at 60/25 > neighborhood


class TestMgfY:
    def test_gauss1d_fluctuation(self, specs):
        m = gibbs_measure(specs["gauss1d"], 400, tol=1e-12)
        r = mgf_Y(m, [1.0])
        assert r.limit_prediction == pytest.approx(math.exp(0.5), rel=1e-12)
        assert abs(r.mgf_value - math.exp(0.5)) <= 0.06
        assert r.residual <= 1.0 / math.sqrt(400)

    def test_exp1d_boundary_fluctuation(self, specs):
        n = 200
        m = gibbs_measure(specs["exp1d"], n, tol=1e-12)
        r = mgf_Y(m, [0.5])
        # truncated-exponential closed form for E exp(xi N X): the remaining
        # inward slope is N (1 - xi)
        closed = (1.0 / 0.5) * (-math.expm1(-0.5 * n)) / (-math.expm1(-n))
        assert r.mgf_value == pytest.approx(closed, rel=1e-10)
        assert r.limit_prediction == pytest.approx(2.0, rel=1e-12)

    def test_zero_tilt(self, specs):
        for name in ("gauss1d", "exp1d", "mixed2d"):
            m = gibbs_measure(specs[name], 100)
            r = mgf_Y(m, np.zeros(specs[name].dimension))
            assert r.mgf_value == pytest.approx(1.0, rel=1e-9)
            assert r.limit_prediction == 1.0

    def test_pole_error(self, specs):
        m = gibbs_measure(specs["exp1d"], 100)
        with pytest.raises(MgfPoleError):
            mgf_Y(m, [1.0])

    def test_mixed2d_tangent_marginal_prediction(self, specs):
        m = gibbs_measure(specs["mixed2d"], 400, tol=1e-11)
        r = mgf_Y(m, [0.0, 1.0])
        assert r.limit_prediction == pytest.approx(math.exp(0.5), rel=1e-12)
        assert r.residual <= 0.06

    def test_rotated_problem_mgf(self, specs):
        # ambient tilt on a rotated copy agrees with the box-frame value
        from certlap import rotate_problem

        th = math.pi / 7.0
        R = np.array([[math.cos(th), -math.sin(th)], [math.sin(th), math.cos(th)]])
        rotated = rotate_problem(specs["mixed2d"], R)
        m0 = gibbs_measure(specs["mixed2d"], 100, tol=1e-11)
        m1 = gibbs_measure(rotated, 100, tol=1e-11)
        xi_box = np.array([0.0, 1.0])
        r0 = mgf_Y(m0, xi_box)
        r1 = mgf_Y(m1, R @ xi_box)
        assert r1.mgf_value == pytest.approx(r0.mgf_value, rel=1e-8)
        assert r1.limit_prediction == pytest.approx(r0.limit_prediction, rel=1e-12)

    def test_fluctuation_decay_and_violation_flag(self, specs):
        ok = fluctuation_sweep(specs["eps1d"], (25, 100, 400), [1.0], tol=1e-10)
        assert not ok["flagged"]
        assert ok["residuals"][-1] < ok["residuals"][0]
        bad = fluctuation_sweep(specs["viol1d"], (25, 100, 400), [1.0], tol=1e-10)
        assert bad["flagged"]
        assert bad["hypothesis_violated"]
        assert bad["residual_nondecaying"]


class TestDrift:
    def test_quadratic_shift_exact(self, specs, consts_cache):
        rows = maximum_drift_check(specs["drift1d"], consts_cache("drift1d"), SWEEP)
        for row in rows:
            assert row["ok"]
            assert row["drift"] == pytest.approx(1.0 / row["N"], abs=1e-10)

    def test_constant_sigma_no_drift(self):
        from dataclasses import replace

        from certlap import constant_field, power_epsilon

        spec = get_problem("gauss1d")
        spec = replace(spec, sigma=constant_field(2.0), epsilon=power_epsilon(-0.75))
        c = estimate_constants(spec, grid_res=32, n_sweep=(25, 100))
        rows = maximum_drift_check(spec, c, (25, 100))
        for row in rows:
            assert row["drift"] <= 1e-10
            assert row["ok"]

    def test_boundary_tangential_drift(self):
        # mixed2d + sigma = x2: drift only along the face, bounded by
        # eps / F2_prime
        from dataclasses import replace

        from certlap import polynomial_field, power_epsilon

        base = get_problem("mixed2d")
        spec = replace(
            base,
            sigma=polynomial_field([(1.0, (0, 1))]),
            epsilon=power_epsilon(-0.75),
            exact_integral=None,
        )
        c = estimate_constants(spec, grid_res=32, n_sweep=(25, 100, 400))
        rows = maximum_drift_check(spec, c, (25, 100, 400))
        for row in rows:
            assert row["ok"]
            n = row["N"]
            assert row["drift"] == pytest.approx(n ** -0.75, rel=1e-6)

    def test_requires_perturbation(self, specs, consts_cache):
        with pytest.raises(ValueError):
            maximum_drift_check(specs["gauss1d"], consts_cache("gauss1d"), SWEEP)

    def test_every_perturbed_catalog_problem(self, specs, consts_cache):
        for name, spec in specs.items():
            if spec.sigma is None:
                continue
            rows = maximum_drift_check(spec, consts_cache(name), SWEEP)
            assert all(row["ok"] for row in rows), name


class TestTiltedEstimates:
    def test_gauss1d_quadratic_exactness(self, specs, consts_cache):
        rows = tilted_maximizer_check(specs["gauss1d"], consts_cache("gauss1d"), [1.0], SWEEP)
        for row in rows:
            # estimate (drift of the tilted maximizer) is exact: residual 0
            assert row["stat_drift"] / row["N"] <= 1e-8
            assert row["stat_det"] <= 1e-6

    def test_quartic_bounded_ratios(self, specs, consts_cache):
        rows = tilted_maximizer_check(
            specs["quartic1d"], consts_cache("quartic1d"), [1.0], SWEEP
        )
        first = rows[0]
        for row in rows[1:]:
            for key in ("stat_drift", "stat_value", "stat_det"):
                assert row[key] <= 3.0 * first[key] + 1e-9

    def test_cubic_statistics_settle_to_constants(self, specs, consts_cache):
        # nonzero third derivative: the scaled statistics approach nonzero
        # constants (xi^2/2, ~xi^3, xi/2)
        rows = tilted_maximizer_check(specs["cubic1d"], consts_cache("cubic1d"), [1.0], SWEEP)
        last = rows[-1]
        assert last["stat_drift"] == pytest.approx(0.5, rel=0.15)
        assert last["stat_det"] == pytest.approx(0.5, rel=0.15)

    def test_interior_only(self, specs, consts_cache):
        with pytest.raises(TheoremMismatchError):
            tilted_maximizer_check(specs["exp1d"], consts_cache("exp1d"), [1.0], SWEEP)


class TestSampler:
    def test_determinism(self, specs, consts_cache):
        m = gibbs_measure(specs["gauss1d"], 100)
        c = consts_cache("gauss1d")
        b1 = sample(m, 4000, seed=9, consts=c)
        b2 = sample(m, 4000, seed=9, consts=c)
        assert np.array_equal(b1.draws, b2.draws)
        b3 = sample(m, 4000, seed=10, consts=c)
        assert not np.array_equal(b1.draws, b3.draws)

    def test_worker_split_reproducible(self, specs, consts_cache):
        m = gibbs_measure(specs["gauss1d"], 100)
        c = consts_cache("gauss1d")
        b1 = sample(m, 4000, seed=9, consts=c, workers=4)
        b2 = sample(m, 4000, seed=9, consts=c, workers=4)
        assert np.array_equal(b1.draws, b2.draws)

    def test_gauss1d_mean(self, specs, consts_cache):
        m = gibbs_measure(specs["gauss1d"], 100)
        b = sample(m, 100_000, seed=0, consts=consts_cache("gauss1d"))
        # CLT scale of the empirical mean: 4 / sqrt(N * count)
        assert abs(b.mean[0]) <= 4.0 * 10 ** -3.5

    def test_exp1d_moments(self, specs, consts_cache):
        m = gibbs_measure(specs["exp1d"], 100)
        b = sample(m, 100_000, seed=0, consts=consts_cache("exp1d"))
        assert b.draws.min() >= 0.0
        assert np.mean(100 * b.draws[:, 0]) == pytest.approx(1.0, abs=4 / math.sqrt(100_000))

    def test_sampler_vs_oracle_boxes(self, specs, consts_cache):
        spec = specs["mixed2d"]
        m = gibbs_measure(spec, 100, tol=1e-10)
        b = sample(m, 50_000, seed=3, consts=consts_cache("mixed2d"))
        rng = np.random.default_rng(12)
        z = b.draws
        for _ in range(10):
            lo = spec.domain.lower + rng.uniform(0.0, 0.05, 2)
            hi = lo + rng.uniform(0.05, 0.4, 2)
            hi = np.minimum(hi, spec.domain.upper)
            box = BoxDomain(lo, hi)
            p = measure_of(m, box)
            emp = float(np.mean(np.all((z >= lo) & (z <= hi), axis=1)))
            se = math.sqrt(max(p * (1 - p), 1e-12) / b.count)
            assert abs(emp - p) <= 5 * se + 1e-9

    def test_csv_export(self, specs, consts_cache, tmp_path):
        m = gibbs_measure(specs["mixed2d"], 100)
        b = sample(m, 500, seed=1, consts=consts_cache("mixed2d"))
        path = tmp_path / "draws.csv"
        b.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "x1,x2"
        assert len(lines) == 501


class TestEmpiricalLimits:
    def test_ks_statistic_basics(self):
        from scipy.special import ndtr

        rng = np.random.default_rng(0)
        z = rng.standard_normal(10_000)
        d = ks_statistic(z, ndtr)
        assert d <= 0.02
        d_bad = ks_statistic(z + 1.0, ndtr)
        assert d_bad > 0.3

    def test_self_test_exact_sampler(self):
        # the null distribution: sqrt(n) KS within the 99% quantile
        from scipy.special import ndtr

        rng = np.random.default_rng(2024)
        n = 100_000
        z = rng.standard_normal(n)
        d = ks_statistic(z, ndtr)
        assert d * math.sqrt(n) <= 1.63

    def test_gauss1d_whitened_normal(self, specs, consts_cache):
        spec = specs["gauss1d"]
        m = gibbs_measure(spec, 400)
        b = sample(m, 100_000, seed=5, consts=consts_cache("gauss1d"))
        out = empirical_limit_test(b, build_fluctuation_model(spec))
        assert out["max_ks"] <= 0.02

    def test_exp1d_exponential_marginal(self, specs, consts_cache):
        spec = specs["exp1d"]
        m = gibbs_measure(spec, 400)
        b = sample(m, 100_000, seed=5, consts=consts_cache("exp1d"))
        out = empirical_limit_test(b, build_fluctuation_model(spec))
        assert out["marginals"][0]["law"] == "exponential"
        assert out["max_ks"] <= 0.02

    def test_fluctuation_transform_shapes(self, specs, consts_cache):
        spec = specs["mixed2d"]
        m = gibbs_measure(spec, 100)
        b = sample(m, 1000, seed=1, consts=consts_cache("mixed2d"))
        y = transform_to_fluctuations(b)
        assert y.shape == (1000, 2)
        assert np.all(y[:, 0] >= 0.0)  # inward scaling is nonnegative

    def test_insufficient_sample(self, specs, consts_cache):
        spec = specs["gauss1d"]
        m = gibbs_measure(spec, 100)
        b = sample(m, 50, seed=1, consts=consts_cache("gauss1d"))
        with pytest.raises(InsufficientSampleError):
            empirical_limit_test(b, build_fluctuation_model(spec))

"""Acceptance gate for the whole package.

Each test prints one PASS/FAIL line per criterion.  The Monte-Carlo
criteria share targeted benchmark runs through module-scoped fixtures; all
runs use the 64-antenna, 50%-sampling, 100-samples-per-trial configuration
with diffuse signals on the reference angular support ((-0.2, 0.2) in
sine-angle units, which is (-0.1, 0.1) in per-antenna-cycle units; both
readings of the published support were benchmarked and this one reproduces
the reference levels).

Run with ``pytest tests/test_acceptance.py -v -s``.  Total runtime is
dominated by the grid-size-512 cells (several minutes).
"""

import itertools
import time

import numpy as np
import pytest
from scipy import integrate

from mmvdec import cli, covsolve, estimate, harness, model, verify

# Reference aggregate NMSE levels for the benchmark configuration.
ORACLE_REFERENCE = {0.0: 0.3403, 20.0: 0.01124, 40.0: 6.23e-4}
L21_GRID64_REFERENCE_40DB = 0.0441


def _report(criterion: str, passed: bool, detail: str) -> None:
    print(f"[{criterion}] {'PASS' if passed else 'FAIL'} - {detail}")


def _solver_options(tolerance):
    return covsolve.SolveOptions(
        max_sweeps=250,
        coordinate_tolerance=tolerance,
        full_sweep_period=5,
        final_polish=False,
    )


def _benchmark(methods, grid_sizes, snr_db, trials, tolerance=1e-4):
    config = harness.full_benchmark_config(
        methods=methods,
        grid_sizes=grid_sizes,
        snr_db=snr_db,
        trials=trials,
        g_options=_solver_options(tolerance),
        ml_options=_solver_options(tolerance),
    )
    return harness.run_experiment(config)


@pytest.fixture(scope="module")
def oracle_run():
    return _benchmark(("oracle-mmse",), (64,), (0.0, 20.0, 40.0), trials=50)


@pytest.fixture(scope="module")
def l21_grid64_run():
    return _benchmark(("l21-cd",), (64,), (30.0, 40.0), trials=24)


@pytest.fixture(scope="module")
def l21_grid128_run():
    return _benchmark(("l21-cd",), (128,), (40.0,), trials=24)


@pytest.fixture(scope="module")
def l21_grid512_run():
    return _benchmark(("l21-cd",), (512,), (40.0,), trials=10, tolerance=3e-4)


@pytest.fixture(scope="module")
def ml_grid128_run():
    return _benchmark(("ml",), (128,), (40.0,), trials=24)


class TestCriterion1Decoupling:
    def test_identity_suite_and_negative_controls(self):
        start = time.perf_counter()
        records = verify.run_suite(seed=7)
        elapsed = time.perf_counter() - start
        worst_gamma = max(r.gamma_err for r in records)
        worst_estimate = max(r.estimate_err for r in records)
        weakest_control = min(
            min(r.control_gamma_err, r.control_estimate_err) for r in records
        )
        ok = (
            len(records) == 20
            and worst_gamma < 1e-3
            and worst_estimate < 1e-3
            and weakest_control > 0.1
            and elapsed < 120.0
        )
        _report(
            "criterion 1: decoupling identities",
            ok,
            f"20 instances, worst gamma {worst_gamma:.2e}, worst estimate "
            f"{worst_estimate:.2e}, weakest control {weakest_control:.2f}, "
            f"{elapsed:.0f}s",
        )
        assert len(records) == 20
        assert worst_gamma < 1e-3
        assert worst_estimate < 1e-3
        assert weakest_control > 0.1
        assert elapsed < 120.0


class TestCriterion2OracleCurve:
    def test_oracle_levels(self, oracle_run):
        values = {
            snr: oracle_run.mean_nmse("oracle-mmse", 0, snr)
            for snr in ORACLE_REFERENCE
        }
        deviations = {
            snr: values[snr] / ORACLE_REFERENCE[snr] - 1.0 for snr in values
        }
        ok = all(abs(dev) <= 0.25 for dev in deviations.values())
        detail = ", ".join(
            f"{snr:g}dB {values[snr]:.4g} ({deviations[snr]:+.0%} vs "
            f"{ORACLE_REFERENCE[snr]:g})"
            for snr in sorted(values)
        )
        _report("criterion 2: oracle MMSE curve +-25%", ok, detail)
        for snr, dev in deviations.items():
            assert abs(dev) <= 0.25, (
                f"oracle NMSE at {snr:g} dB is {values[snr]:.4g}, outside +-25% of "
                f"{ORACLE_REFERENCE[snr]:g}; the exact genie-MMSE expectation for "
                "this model sits above the reference tail (see the high-SNR "
                "analysis in the project notes)"
            )


class TestOracleDynamicRange:
    def test_high_snr_beats_low_snr_hundredfold(self, oracle_run):
        low = oracle_run.mean_nmse("oracle-mmse", 0, 0.0)
        high = oracle_run.mean_nmse("oracle-mmse", 0, 40.0)
        assert low / high >= 100.0


class TestCriterion3MismatchSaturation:
    def test_grid64_saturates(self, l21_grid64_run):
        at40 = l21_grid64_run.mean_nmse("l21-cd", 64, 40.0)
        at30 = l21_grid64_run.mean_nmse("l21-cd", 64, 30.0)
        ratio = at40 / at30
        level_ok = abs(at40 / L21_GRID64_REFERENCE_40DB - 1.0) <= 0.5
        ratio_ok = 0.8 <= ratio <= 1.3
        _report(
            "criterion 3: mismatch saturation (G=64)",
            level_ok and ratio_ok,
            f"40dB {at40:.4g} (ref {L21_GRID64_REFERENCE_40DB} +-50%), "
            f"40/30dB ratio {ratio:.3f} in [0.8, 1.3]",
        )
        assert level_ok
        assert ratio_ok


class TestCriterion4OversamplingGain:
    def test_grid128_beats_grid64(self, l21_grid64_run, l21_grid128_run):
        g64 = l21_grid64_run.mean_nmse("l21-cd", 64, 40.0)
        g128 = l21_grid128_run.mean_nmse("l21-cd", 128, 40.0)
        ok = g128 <= g64 / 3.0
        _report(
            "criterion 4: 2x oversampling gain",
            ok,
            f"G=64 {g64:.4g} vs G=128 {g128:.4g} (ratio {g64 / g128:.1f}x >= 3x)",
        )
        assert ok


class TestCriterion5DiminishingReturns:
    def test_grid512_close_to_grid128(self, l21_grid128_run, l21_grid512_run):
        g128 = l21_grid128_run.mean_nmse("l21-cd", 128, 40.0)
        g512 = l21_grid512_run.mean_nmse("l21-cd", 512, 40.0)
        ok = abs(g512 / g128 - 1.0) <= 0.3
        _report(
            "criterion 5: diminishing returns past 2x",
            ok,
            f"G=128 {g128:.4g} vs G=512 {g512:.4g} ({g512 / g128 - 1.0:+.0%}, "
            "within +-30%)",
        )
        assert ok


class TestCriterion6MLImprovement:
    def test_ml_between_oracle_and_convex_path(
        self, oracle_run, l21_grid128_run, ml_grid128_run
    ):
        oracle = oracle_run.mean_nmse("oracle-mmse", 0, 40.0)
        ml = ml_grid128_run.mean_nmse("ml", 128, 40.0)
        l21 = l21_grid128_run.mean_nmse("l21-cd", 128, 40.0)
        near_oracle = ml <= 2.0 * oracle
        beats_l21 = ml <= l21 / 5.0
        _report(
            "criterion 6: likelihood covariance fit",
            near_oracle and beats_l21,
            f"ml {ml:.4g} vs oracle {oracle:.4g} ({ml / oracle:.2f}x <= 2x) "
            f"and vs l21-cd {l21:.4g} ({l21 / ml:.1f}x >= 5x)",
        )
        assert near_oracle
        assert beats_l21


class TestCriterion7Properties:
    def test_sherman_morrison(self):
        rng = np.random.default_rng(0)
        worst = 0.0
        for _ in range(20):
            m = 6
            raw = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
            sigma = raw @ raw.conj().T + 0.3 * np.eye(m)
            a = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            inv = np.linalg.inv(sigma)
            q = float(np.real(a.conj() @ inv @ a))
            d = rng.uniform(-0.9 / q, 2.0)
            updated = covsolve.rank_one_inverse_update(inv, a, d)
            direct = np.linalg.inv(sigma + d * np.outer(a, a.conj()))
            worst = max(
                worst, np.linalg.norm(updated - direct) / np.linalg.norm(direct)
            )
        _report("criterion 7a: rank-1 inverse update", worst < 1e-9, f"worst rel {worst:.1e}")
        assert worst < 1e-9

    def test_convexity_chords(self):
        sketches, proj, dictionary = _small_instance(1)
        rng = np.random.default_rng(2)
        worst = -np.inf
        for _ in range(25):
            g1 = rng.uniform(0.0, 1.0, dictionary.size)
            g2 = rng.uniform(0.0, 1.0, dictionary.size)
            t = rng.uniform(0.05, 0.95)
            mid = covsolve.eval_g(
                covsolve.GammaVector(t * g1 + (1 - t) * g2), sketches, proj, dictionary
            )
            chord = t * covsolve.eval_g(
                covsolve.GammaVector(g1), sketches, proj, dictionary
            ) + (1 - t) * covsolve.eval_g(
                covsolve.GammaVector(g2), sketches, proj, dictionary
            )
            worst = max(worst, mid - chord)
        _report("criterion 7b: convexity chords", worst <= 1e-10, f"worst gap {worst:.1e}")
        assert worst <= 1e-10

    def test_derivatives_match_finite_differences(self):
        for seed, likelihood in ((3, False), (4, True)):
            sketches, proj, dictionary = _small_instance(seed)
            rng = np.random.default_rng(seed)
            gamma_values = rng.uniform(0.1, 0.8, dictionary.size)
            weight = 0.2 if likelihood else sketches.regularization
            state = covsolve.SolverState.initialize(sketches, proj, dictionary, weight)
            state.gamma = gamma_values.copy()
            state.sigma_inv = np.linalg.inv(covsolve._build_sigmas(state))
            eps, d0 = 1e-6, 0.07
            worst = 0.0
            for k in range(0, dictionary.size, 3):
                up = gamma_values.copy()
                up[k] += d0 + eps
                down = gamma_values.copy()
                down[k] += d0 - eps
                if likelihood:
                    fd = (
                        covsolve.eval_l(covsolve.GammaVector(up), sketches, proj, dictionary, weight)
                        - covsolve.eval_l(covsolve.GammaVector(down), sketches, proj, dictionary, weight)
                    ) / (2 * eps)
                    got = covsolve.lk_derivative(d0, k, state, sketches)
                else:
                    fd = (
                        covsolve.eval_g(covsolve.GammaVector(up), sketches, proj, dictionary)
                        - covsolve.eval_g(covsolve.GammaVector(down), sketches, proj, dictionary)
                    ) / (2 * eps)
                    got = covsolve.gk_derivative(d0, k, state, sketches)
                worst = max(worst, abs(got - fd) / max(abs(fd), 1e-9))
            label = "likelihood" if likelihood else "convex"
            _report(
                f"criterion 7c: {label} derivative vs finite differences",
                worst < 1e-6,
                f"worst rel {worst:.1e}",
            )
            assert worst < 1e-6

    def test_group_shrinkage_prox_optimality(self):
        rng = np.random.default_rng(5)
        values = rng.standard_normal((6, 3)) + 1j * rng.standard_normal((6, 3))
        threshold = 0.9
        out = estimate.group_soft_threshold(
            estimate.CoefficientMatrix(values), threshold
        ).values
        worst = 0.0
        for i in range(values.shape[0]):
            row = values[i]
            norm = np.linalg.norm(row)
            direction = row / norm

            def cost(z):
                return 0.5 * np.linalg.norm(z - row) ** 2 + threshold * np.linalg.norm(z)

            best = min(cost(direction * s) for s in np.linspace(0, 2 * norm, 20001))
            worst = max(worst, cost(out[i]) - best)
        _report("criterion 7d: group shrinkage is the exact prox", worst <= 1e-6, f"worst gap {worst:.1e}")
        assert worst <= 1e-6

    def test_solve_g_matches_grid_search(self):
        rng = np.random.default_rng(6)
        n, m, t, grid = 4, 2, 6, 3
        cov = model.diffuse_covariance(n, (-0.4, 0.4))
        signals = model.sample_signals(cov, t, rng)
        proj = model.sample_selection_projections(n, m, t, rng)
        sketches = model.sketch(signals, proj, 0.1, rng)
        dictionary = model.build_grid_dictionary(n, grid)
        gamma = covsolve.solve_g(sketches, proj, dictionary)
        lo = np.zeros(grid)
        hi = np.full(grid, max(1.0, 2.0 * gamma.values.max()))
        for _ in range(4):
            axes = [np.linspace(lo[i], hi[i], 11) for i in range(grid)]
            best_val, best_pt = np.inf, None
            for point in itertools.product(*axes):
                val = covsolve.eval_g(
                    covsolve.GammaVector(np.array(point)), sketches, proj, dictionary
                )
                if val < best_val:
                    best_val, best_pt = val, np.array(point)
            span = (hi - lo) / 10.0
            lo = np.maximum(best_pt - span, 0.0)
            hi = best_pt + span
        resolution = float(np.max(span))
        gap = float(np.max(np.abs(gamma.values - best_pt)))
        ok = gap <= 2 * resolution + 1e-3
        _report(
            "criterion 7e: solve_g vs exhaustive grid search",
            ok,
            f"max deviation {gap:.2e} at grid resolution {resolution:.1e}",
        )
        assert ok

    def test_diffuse_covariance_vs_quadrature(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for _ in range(6):
            a = rng.uniform(-1.0, 0.7)
            b = rng.uniform(a + 0.1, 1.0)
            cov = model.diffuse_covariance(5, (a, b))
            p, q = rng.integers(0, 5, size=2)
            delta = p - q
            real = integrate.quad(
                lambda xi: np.cos(np.pi * delta * xi) / (b - a), a, b, epsabs=1e-12
            )[0]
            imag = integrate.quad(
                lambda xi: np.sin(np.pi * delta * xi) / (b - a), a, b, epsabs=1e-12
            )[0]
            worst = max(worst, abs(cov.sigma_h[p, q] - (real + 1j * imag)))
        _report("criterion 7f: diffuse kernel vs quadrature", worst < 1e-8, f"worst abs {worst:.1e}")
        assert worst < 1e-8

    def test_all_three_solvers_descend_monotonically(self):
        sketches, proj, dictionary = _small_instance(8)
        slack = lambda h: np.diff(h) <= 1e-12 * np.maximum(1.0, np.abs(h[:-1]))

        gamma = covsolve.solve_g(sketches, proj, dictionary)
        g_ok = bool(np.all(slack(np.asarray(gamma.info.cost_history))))

        ml = covsolve.solve_ml(sketches, proj, dictionary, sketches.noise_variance)
        ml_ok = bool(np.all(slack(np.asarray(ml.info.cost_history))))

        try:
            estimate.l21_ls_direct(
                sketches, proj, dictionary,
                opts=estimate.DirectOptions(max_iters=40, tolerance=1e-30),
            )
            direct_ok = False
            trace_len = 0
        except covsolve.SolverError as err:
            trace = np.asarray(err.objective_trace)
            direct_ok = bool(np.all(slack(trace)))
            trace_len = trace.size
        ok = g_ok and ml_ok and direct_ok
        _report(
            "criterion 7g: monotone descent of all three solvers",
            ok,
            f"convex {g_ok}, likelihood {ml_ok}, direct {direct_ok} "
            f"({trace_len} recorded objectives)",
        )
        assert ok


class TestCriterion8Determinism:
    def test_repeated_run_byte_identical(self, tmp_path):
        argv = [
            "run", "--n", "16", "--m-fraction", "0.5", "--t", "20",
            "--trials", "2", "--snr", "0,40", "--grid-sizes", "16,32",
            "--methods", "oracle-mmse,l21-cd,l21-direct,ml",
            "--seed", "1", "--no-plot",
        ]
        out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert cli.main(argv + ["--out", str(out_a)]) == 0
        assert cli.main(argv + ["--out", str(out_b)]) == 0

        def rows_without_timing(path):
            rows = path.read_text().splitlines()
            return [
                ",".join(v for i, v in enumerate(line.split(",")) if i != 5)
                for line in rows
            ]

        trial_ok = rows_without_timing(out_a) == rows_without_timing(out_b)
        agg_ok = (tmp_path / "a.agg.csv").read_bytes() == (tmp_path / "b.agg.csv").read_bytes()
        _report(
            "criterion 8: determinism",
            trial_ok and agg_ok,
            "trial rows identical outside the wall-clock column; aggregate "
            "files byte-identical",
        )
        assert trial_ok
        assert agg_ok


def _small_instance(seed, n=8, m=4, t=6, grid=10, snr_db=12.0):
    rng = np.random.default_rng(seed)
    cov = model.diffuse_covariance(n, (-0.3, 0.3))
    signals = model.sample_signals(cov, t, rng)
    proj = model.sample_selection_projections(n, m, t, rng)
    sketches = model.sketch(signals, proj, 10.0 ** (-snr_db / 10.0), rng)
    dictionary = model.build_grid_dictionary(n, grid)
    return sketches, proj, dictionary

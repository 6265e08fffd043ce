import json

import numpy as np
import pytest

from flfosr.errors import InvalidInputError
from flfosr.simulate import (
    SimulationDesign,
    load_design,
    simulate_dataset,
    write_simulation,
)


class TestSimulateDataset:
    def test_reference_design_defaults(self):
        d = SimulationDesign()
        assert (d.sigma2_alpha, d.sigma2_gamma, d.sigma2_omega, d.sigma2_eps) == (
            1.0,
            1.0,
            1.0,
            10.0,
        )
        assert (d.T, d.K0) == (144, 15)

    def test_noise_free_limit_recovers_fixed_effects(self):
        # the basis amplifies coefficient noise by sqrt(max d) ~ 1e4, so
        # the deviation at variance v is ~ sqrt(v) * 1e4: at 1e-12 that
        # allows ~5e-2; by 1e-20 the curves match within 1e-4
        for var, tol in ((1e-12, 5e-2), (1e-20, 1e-4)):
            design = SimulationDesign(
                n=3,
                m=2,
                L=2,
                T=24,
                K0=5,
                degree=2,
                sigma2_gamma=var,
                sigma2_omega=var,
                sigma2_eps=var,
                seed=8,
            )
            ds, truth = simulate_dataset(design)
            expected = (ds.X @ truth.alpha) @ truth.basis.B.T
            assert np.max(np.abs(ds.curves - expected)) < tol

    def test_same_seed_byte_identical(self):
        a, ta = simulate_dataset(SimulationDesign(n=4, m=3, L=2, T=20, K0=5, degree=3, seed=33))
        b, tb = simulate_dataset(SimulationDesign(n=4, m=3, L=2, T=20, K0=5, degree=3, seed=33))
        np.testing.assert_array_equal(a.curves, b.curves)
        np.testing.assert_array_equal(a.X, b.X)
        np.testing.assert_array_equal(ta.alpha, tb.alpha)
        np.testing.assert_array_equal(ta.noise, tb.noise)

    def test_decomposes_into_fit_plus_stored_noise(self):
        design = SimulationDesign(n=3, m=2, L=1, T=16, K0=4, degree=2, seed=12)
        ds, truth = simulate_dataset(design)
        subject_of = ds.subject_of
        beta = ds.X @ truth.alpha + truth.gamma[subject_of] + truth.omega
        np.testing.assert_array_equal(ds.curves - beta @ truth.basis.B.T, truth.noise)

    def test_truth_functions_are_exact_basis_expansion(self):
        ds, truth = simulate_dataset(SimulationDesign(n=2, m=2, L=1, T=16, K0=4, degree=2, seed=3))
        np.testing.assert_array_equal(
            truth.alpha_functions, (truth.basis.B @ truth.alpha.T).T
        )

    def test_intercept_coefficients_pinned_at_one(self):
        _, truth = simulate_dataset(SimulationDesign(n=2, m=2, L=2, T=16, K0=4, degree=2, seed=5))
        np.testing.assert_array_equal(truth.alpha[0], 1.0)

    def test_covariates_constant_within_subject(self):
        ds, _ = simulate_dataset(SimulationDesign(n=4, m=3, L=2, T=12, K0=4, degree=2, seed=9))
        for i in range(ds.n):
            block = ds.X[ds.subject_of == i, 1:]
            assert np.all(block == block[0])

    def test_replicate_law_varies_within_subject(self):
        ds, _ = simulate_dataset(
            SimulationDesign(
                n=4, m=3, L=2, T=12, K0=4, degree=2, seed=9, covariate_law="replicate_normal"
            )
        )
        varying = any(
            not np.all(ds.X[ds.subject_of == i, 1:] == ds.X[ds.subject_of == i, 1:][0])
            for i in range(ds.n)
        )
        assert varying

    def test_omega_empirical_variance_within_two_percent(self):
        # >= 1e5 replicate-coefficient draws
        design = SimulationDesign(n=1000, m=7, L=1, T=16, K0=15, sigma2_omega=1.7, seed=1)
        ds, truth = simulate_dataset(design)
        assert truth.omega.size >= 100_000
        emp = truth.omega.var()
        assert abs(emp - 1.7) / 1.7 < 0.02

    def test_raw_basis_generation_flag(self):
        design = SimulationDesign(
            n=2, m=2, L=1, T=16, K0=4, degree=2, seed=3, generate_on_raw_basis=True
        )
        ds, truth = simulate_dataset(design)
        assert truth.generated_on_raw
        assert truth.alpha.shape[1] == truth.basis.source.K0
        beta = ds.X @ truth.alpha + truth.gamma[ds.subject_of] + truth.omega
        np.testing.assert_array_equal(
            ds.curves - beta @ truth.basis.source.B0.T, truth.noise
        )

    def test_invalid_designs_rejected(self):
        with pytest.raises(InvalidInputError):
            SimulationDesign(n=0)
        with pytest.raises(InvalidInputError):
            SimulationDesign(sigma2_eps=0.0)
        with pytest.raises(InvalidInputError):
            SimulationDesign(covariate_law="cauchy")


class TestWriteSimulation:
    def test_emits_dataset_truth_and_design(self, tmp_path):
        design = SimulationDesign(n=2, m=2, L=1, T=8, K0=4, degree=2, seed=6)
        ds, truth = simulate_dataset(design)
        write_simulation(tmp_path, ds, truth, design)
        for name in ("curves.csv", "covariates.csv", "grid.csv", "truth.csv", "design.json"):
            assert (tmp_path / name).exists()
        back = load_design(tmp_path / "design.json")
        assert back == design
        header = (tmp_path / "truth.csv").read_text().splitlines()[0]
        assert header == "covariate,t,tau,value"
        rows = (tmp_path / "truth.csv").read_text().splitlines()[1:]
        assert len(rows) == (design.L + 1) * design.T

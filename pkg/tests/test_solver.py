import numpy as np
import pytest

from ktrecon.kernels import build_dictionary, default_specs
from ktrecon.model import (FactorState, Hyperparams, ModelConfig, forward, objective)
from ktrecon.sampling import apply_sampling, cartesian_mask
from ktrecon.solver import (DivergenceError, gamma_step, multi_restart, sca_solve,
                            soft_threshold, update_A1, update_Aq, update_B, update_X,
                            update_Z, write_trace_csv)
from ktrecon.tensors import (DataDims, dft2_frames, matrix_to_tensor, temporal_dft,
                             tensor_to_matrix)

import oracles
from instances import crandn, random_dictionary, random_instance


def random_problem(rng, **kwargs):
    cfg, kernels, state = random_instance(rng, **kwargs)
    kspace = crandn(rng, *cfg.dims.shape)
    mask = (rng.random(cfg.dims.shape) > 0.4).astype(np.uint8)
    mask[..., mask.sum(axis=(0, 1)) == 0] = 1  # no empty frames
    kspace = apply_sampling(mask, kspace)
    k = dft2_frames(matrix_to_tensor(state.X, cfg.dims), "forward")
    sampled = mask != 0
    k[sampled] = kspace[sampled]
    state.X = tensor_to_matrix(dft2_frames(k, "inverse"))  # consistent start
    return cfg, kernels, state, mask, kspace


class TestGammaStep:
    def test_hand_values(self):
        assert gamma_step(1.0, 0.5) == pytest.approx(0.5)
        assert gamma_step(0.5, 0.5) == pytest.approx(0.375)

    def test_strictly_decreasing_positive(self):
        for zeta in (0.1, 0.5, 0.9):
            gamma = 1.0
            for _ in range(200):
                nxt = gamma_step(gamma, zeta)
                assert 0.0 < nxt < gamma
                gamma = nxt

    def test_domain_checks(self):
        with pytest.raises(ValueError):
            gamma_step(0.0, 0.5)
        with pytest.raises(ValueError):
            gamma_step(0.5, 1.0)


class TestSoftThreshold:
    def test_real_scalar(self):
        assert soft_threshold(3.0, 1.0) == pytest.approx(2.0)

    def test_complex_at_threshold(self):
        assert soft_threshold(3.0 + 4.0j, 5.0) == pytest.approx(0.0)

    def test_zero_stays_zero(self):
        assert soft_threshold(0.0, 1.0) == 0.0

    def test_phase_preserved(self):
        z = 2.0 * np.exp(1j * 0.7)
        out = complex(soft_threshold(z, 0.5))
        assert abs(out) == pytest.approx(1.5)
        assert np.angle(out) == pytest.approx(0.7)


class TestUpdateX:
    def test_unconstrained_returns_prediction(self):
        rng = np.random.default_rng(0)
        cfg, kernels, state, _, kspace = random_problem(rng)
        hp = Hyperparams(lambda2=0.0, tau_x=0.0)
        empty = np.zeros(cfg.dims.shape, dtype=np.uint8)
        out = update_X(state, kernels, empty, kspace, hp)
        ref = forward(state, kernels)
        assert np.linalg.norm(out - ref) / np.linalg.norm(ref) < 1e-12

    def test_full_mask_pins_to_data(self):
        rng = np.random.default_rng(1)
        cfg, kernels, state, _, _ = random_problem(rng)
        kspace = crandn(rng, *cfg.dims.shape)
        full = np.ones(cfg.dims.shape, dtype=np.uint8)
        out = update_X(state, kernels, full, kspace, Hyperparams())
        ref = tensor_to_matrix(dft2_frames(kspace, "inverse"))
        assert np.allclose(out, ref, atol=1e-12)

    def test_matches_projected_gradient_oracle(self):
        rng = np.random.default_rng(2)
        for _ in range(5):
            cfg, kernels, state, mask, kspace = random_problem(rng)
            hp = Hyperparams(lambda2=float(rng.uniform(0.1, 2.0)),
                             tau_x=float(rng.uniform(0.01, 1.0)))
            out = update_X(state, kernels, mask, kspace, hp)
            ref = oracles.projected_gradient_X(state, kernels, mask, kspace, hp)
            assert np.linalg.norm(out - ref) / np.linalg.norm(ref) < 1e-8

    def test_proximal_dominance(self):
        # a consistent previous image stays fixed when its weight dominates
        rng = np.random.default_rng(34)
        cfg, kernels, state, mask, kspace = random_problem(rng)
        out = update_X(state, kernels, mask, kspace, Hyperparams(tau_x=1e12))
        assert np.linalg.norm(out - state.X) / np.linalg.norm(state.X) < 1e-4

    def test_first_order_optimality(self):
        rng = np.random.default_rng(3)
        cfg, kernels, state, mask, kspace = random_problem(rng)
        hp = Hyperparams(lambda2=0.8, tau_x=0.2)
        star = update_X(state, kernels, mask, kspace, hp)
        prediction = forward(state, kernels)

        def sub_objective(x):
            return (0.5 * np.linalg.norm(x - prediction) ** 2
                    + 0.5 * hp.lambda2 * np.linalg.norm(
                        state.Z - temporal_dft(x, "forward")) ** 2
                    + 0.5 * hp.tau_x * np.linalg.norm(x - state.X) ** 2)

        base = sub_objective(star)
        sampled = mask != 0
        for _ in range(100):
            d = crandn(rng, *star.shape)
            k = dft2_frames(matrix_to_tensor(d, cfg.dims), "forward")
            k[sampled] = 0.0  # stay inside the consistency set
            d = tensor_to_matrix(dft2_frames(k, "inverse"))
            d *= 1e-3 / np.linalg.norm(d)
            assert sub_objective(star + d) >= base - 1e-12 * max(base, 1.0)


class TestUpdateZ:
    def test_matches_scalar_oracle(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            lambda2 = float(rng.uniform(0.1, 2.0))
            lambda3 = float(rng.uniform(0.01, 1.0))
            tau_z = float(rng.uniform(0.01, 1.0))
            cfg = ModelConfig(dims=DataDims(1, 1, 1), n_l=1, m=1, q=1)
            x = crandn(rng, 1, 1)
            z_hat = crandn(rng, 1, 1)
            state = FactorState(config=cfg, X=x, Z=z_hat,
                                a1=np.zeros((1, 1), dtype=complex), a_blocks=[],
                                b_blocks=[np.ones((1, 1), dtype=complex)])
            hp = Hyperparams(lambda2=lambda2, lambda3=lambda3, tau_z=tau_z)
            out = complex(update_Z(state, hp)[0, 0])
            # the temporal DFT of a single frame is the identity
            ref = oracles.scalar_Z_minimizer(complex(x[0, 0]), complex(z_hat[0, 0]),
                                             lambda2, lambda3, tau_z)
            assert abs(out - ref) <= 1e-8 * max(abs(ref), 1.0)

    def test_zero_weight_rejected(self):
        rng = np.random.default_rng(5)
        cfg, kernels, state, _, _ = random_problem(rng)
        with pytest.raises(ValueError):
            update_Z(state, Hyperparams(lambda2=0.0, tau_z=0.0))

    def test_first_order_optimality(self):
        rng = np.random.default_rng(6)
        cfg, kernels, state, mask, kspace = random_problem(rng)
        hp = Hyperparams(lambda2=1.0, lambda3=0.3, tau_z=0.2)
        star = update_Z(state, hp)
        spectrum = temporal_dft(state.X, "forward")

        def sub_objective(z):
            return (0.5 * hp.lambda2 * np.linalg.norm(z - spectrum) ** 2
                    + hp.lambda3 * np.sum(np.abs(z))
                    + 0.5 * hp.tau_z * np.linalg.norm(z - state.Z) ** 2)

        base = sub_objective(star)
        for _ in range(100):
            d = crandn(rng, *star.shape)
            d *= 1e-3 / np.linalg.norm(d)
            assert sub_objective(star + d) >= base - 1e-12 * max(base, 1.0)

    def test_proximal_dominance(self):
        rng = np.random.default_rng(7)
        cfg, kernels, state, _, _ = random_problem(rng)
        out = update_Z(state, Hyperparams(tau_z=1e12))
        assert np.linalg.norm(out - state.Z) / np.linalg.norm(state.Z) < 1e-4


class TestUpdateA1:
    def test_exact_recovery(self):
        rng = np.random.default_rng(8)
        cfg, kernels, state = random_instance(rng, n_f=2, n_p=3, n_fr=5, n_l=3,
                                              m=1, q=2, max_inner=2)
        truth = crandn(rng, *state.a1.shape)
        state.a1 = truth
        state.X = forward(state, kernels)
        hp = Hyperparams(lambda4=0.0, tau_a=0.0)
        recovered = update_A1(state, kernels, hp)
        assert np.linalg.norm(recovered - truth) / np.linalg.norm(truth) < 1e-10

    def test_matches_pinv_oracle(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            cfg, kernels, state, mask, kspace = random_problem(rng)
            hp = Hyperparams(lambda4=float(rng.uniform(0.0, 1.0)),
                             tau_a=float(rng.uniform(0.01, 1.0)))
            out = update_A1(state, kernels, hp)
            ref = oracles.pinv_A1(state, kernels, hp)
            assert np.linalg.norm(out - ref) / max(np.linalg.norm(ref), 1.0) < 1e-8

    def test_ridge_shrinkage_monotone(self):
        rng = np.random.default_rng(10)
        cfg, kernels, state, _, _ = random_problem(rng)
        small = update_A1(state, kernels, Hyperparams(lambda4=1e-3, tau_a=0.0))
        large = update_A1(state, kernels, Hyperparams(lambda4=10.0, tau_a=0.0))
        assert np.linalg.norm(large) < np.linalg.norm(small)

    def test_proximal_dominance(self):
        rng = np.random.default_rng(11)
        cfg, kernels, state, _, _ = random_problem(rng)
        out = update_A1(state, kernels, Hyperparams(tau_a=1e12))
        assert np.linalg.norm(out - state.a1) / np.linalg.norm(state.a1) < 1e-4


class TestUpdateAq:
    def test_single_branch_matches_kronecker_oracle(self):
        rng = np.random.default_rng(12)
        cfg, kernels, state = random_instance(rng, n_f=2, n_p=2, n_fr=3, n_l=2,
                                              m=1, q=2, max_inner=3)
        hp = Hyperparams(lambda4=0.2, tau_a=0.1)
        out = update_Aq(state, kernels, hp, q=2)
        ref = oracles.design_matrix_Aq(state, kernels, hp, q=2)
        for o, r in zip(out, ref):
            assert np.linalg.norm(o - r) / max(np.linalg.norm(r), 1.0) < 1e-10

    def test_matches_design_matrix_oracle(self):
        rng = np.random.default_rng(13)
        for _ in range(5):
            cfg, kernels, state, mask, kspace = random_problem(rng, q=3)
            hp = Hyperparams(lambda4=float(rng.uniform(0.0, 1.0)),
                             tau_a=float(rng.uniform(0.01, 1.0)))
            for q in range(2, cfg.q + 1):
                out = update_Aq(state, kernels, hp, q)
                ref = oracles.design_matrix_Aq(state, kernels, hp, q)
                for o, r in zip(out, ref):
                    assert np.linalg.norm(o - r) / max(np.linalg.norm(r), 1.0) < 1e-8

    def test_exact_fit_recovery(self):
        rng = np.random.default_rng(14)
        cfg, kernels, state = random_instance(rng, n_f=3, n_p=3, n_fr=6, n_l=3,
                                              m=1, q=2, max_inner=2)
        truth = [blk.copy() for blk in state.a_blocks[0]]
        state.X = forward(state, kernels)
        hp = Hyperparams(lambda4=0.0, tau_a=0.0)
        out = update_Aq(state, kernels, hp, q=2)
        for o, r in zip(out, truth):
            assert np.linalg.norm(o - r) / np.linalg.norm(r) < 1e-8

    def test_proximal_dominance(self):
        rng = np.random.default_rng(15)
        cfg, kernels, state, _, _ = random_problem(rng, q=2)
        out = update_Aq(state, kernels, Hyperparams(tau_a=1e12), q=2)
        for o, r in zip(out, state.a_blocks[0]):
            assert np.linalg.norm(o - r) / np.linalg.norm(r) < 1e-4

    def test_first_order_optimality(self):
        rng = np.random.default_rng(16)
        cfg, kernels, state, mask, kspace = random_problem(rng, q=2)
        hp = Hyperparams(lambda4=0.1, tau_a=0.2)
        star = update_Aq(state, kernels, hp, q=2)
        anchor = state.a_blocks[0]

        def sub_objective(blocks):
            probe = state.copy()
            probe.a_blocks[0] = blocks
            fit = 0.5 * np.linalg.norm(state.X - forward(probe, kernels)) ** 2
            ridge = 0.5 * hp.lambda4 * sum(np.linalg.norm(b) ** 2 for b in blocks)
            prox = 0.5 * hp.tau_a * sum(np.linalg.norm(b - a) ** 2
                                        for b, a in zip(blocks, anchor))
            return fit + ridge + prox

        base = sub_objective(star)
        for _ in range(100):
            deltas = [crandn(rng, *blk.shape) for blk in star]
            scale = 1e-3 / np.sqrt(sum(np.linalg.norm(d) ** 2 for d in deltas))
            perturbed = [blk + scale * d for blk, d in zip(star, deltas)]
            assert sub_objective(perturbed) >= base - 1e-12 * max(base, 1.0)


class TestUpdateB:
    def identity_design_state(self, x_columns):
        # depth one, one branch, identity first factor and identity Gram:
        # the design reduces to the identity map
        n_l, n_fr = x_columns.shape
        dims = DataDims(n_l, 1, n_fr)
        cfg = ModelConfig(dims=dims, n_l=n_l, m=1, q=1)
        kernels = random_dictionary(np.random.default_rng(0), 1, n_l)
        kernels = type(kernels)(specs=kernels.specs,
                                grams=(np.eye(n_l, dtype=complex),))
        state = FactorState(config=cfg, X=x_columns.astype(complex),
                            Z=np.zeros_like(x_columns, dtype=complex),
                            a1=np.eye(n_l, dtype=complex), a_blocks=[],
                            b_blocks=[np.full((n_l, n_fr), 1.0 / n_l, dtype=complex)])
        return cfg, kernels, state

    def test_affine_projection_case(self):
        x = np.full((3, 1), 0.5)
        cfg, kernels, state = self.identity_design_state(x)
        hp = Hyperparams(lambda1=0.0, tau_b=0.0, b_tol=1e-12, b_max_iter=2000)
        blocks, info = update_B(state, kernels, hp)
        assert np.allclose(blocks[0], 1.0 / 3.0, atol=1e-9)
        assert blocks[0].sum(axis=0) == pytest.approx(1.0, abs=1e-12)

    def test_matches_subgradient_oracle(self):
        rng = np.random.default_rng(17)
        worst = 0.0
        for _ in range(3):
            cfg, kernels, state, mask, kspace = random_problem(rng, m=2, q=2)
            hp = Hyperparams(lambda1=0.05, tau_b=1.0, b_tol=1e-11, b_max_iter=4000)
            blocks, info = update_B(state, kernels, hp)
            design = np.hstack([
                oracles.naive_forward_chain(state, kernels, m) for m in range(cfg.m)])
            b_impl = np.vstack(blocks)
            anchor = np.vstack(state.b_blocks)
            _, best_f = oracles.projected_subgradient_B(
                design, state.X, anchor, hp.lambda1, hp.tau_b, cfg.n_l, iters=20000)
            f_impl = oracles.column_objectives_B(design, state.X, anchor, b_impl,
                                                 hp.lambda1, hp.tau_b)
            rel = np.max(np.abs(f_impl - best_f) / np.maximum(np.abs(best_f), 1e-12))
            worst = max(worst, float(rel))
        assert worst < 1e-5

    def test_kkt_residual_small(self):
        rng = np.random.default_rng(18)
        cfg, kernels, state, mask, kspace = random_problem(rng, m=2, q=2)
        hp = Hyperparams(lambda1=0.1, tau_b=0.5, b_tol=1e-11, b_max_iter=4000)
        blocks, info = update_B(state, kernels, hp)
        design = np.hstack([
            oracles.naive_forward_chain(state, kernels, m) for m in range(cfg.m)])
        residual = oracles.kkt_residual_B(design, state.X, np.vstack(state.b_blocks),
                                          np.vstack(blocks), hp.lambda1, hp.tau_b,
                                          cfg.n_l)
        assert residual < 1e-5

    def test_sparsity_monotone_in_lambda1(self):
        rng = np.random.default_rng(19)
        cfg, kernels, state, mask, kspace = random_problem(rng, m=1, q=2)
        hp_small = Hyperparams(lambda1=0.01, tau_b=0.1, b_tol=1e-10, b_max_iter=3000)
        hp_large = Hyperparams(lambda1=5.0, tau_b=0.1, b_tol=1e-10, b_max_iter=3000)
        small, _ = update_B(state, kernels, hp_small)
        large, _ = update_B(state, kernels, hp_large)
        l1 = lambda blocks: sum(np.sum(np.abs(b)) for b in blocks)
        assert l1(large) <= l1(small) + 1e-9

    def test_column_sums_exact(self):
        rng = np.random.default_rng(20)
        cfg, kernels, state, mask, kspace = random_problem(rng, m=2)
        blocks, _ = update_B(state, kernels, Hyperparams())
        for blk in blocks:
            assert np.max(np.abs(blk.sum(axis=0) - 1.0)) < 1e-12

    def test_proximal_dominance(self):
        rng = np.random.default_rng(21)
        cfg, kernels, state, mask, kspace = random_problem(rng, m=1, q=2)
        blocks, _ = update_B(state, kernels, Hyperparams(tau_b=1e12, b_max_iter=50))
        for blk, anchor in zip(blocks, state.b_blocks):
            assert np.linalg.norm(blk - anchor) / np.linalg.norm(anchor) < 1e-4


class SolveSetup:
    def build(self, rng, n_fr=6, accel=2.0, m=1, q=2, **hp_kwargs):
        dims = DataDims(12, 12, n_fr)
        kspace = crandn(rng, *dims.shape)
        mask = cartesian_mask(dims, acceleration=accel, upsilon=2, seed=3)
        observed = apply_sampling(mask, kspace)
        navigators = tensor_to_matrix(observed)[:dims.n_f * 2]
        from ktrecon.kernels import select_landmarks
        landmarks = select_landmarks(navigators, 3)
        kernels = build_dictionary(landmarks, default_specs(landmarks, m))
        inner = (2,) * (q - 1)
        cfg = ModelConfig(dims=dims, n_l=3, m=m, q=q, inner_dims=inner)
        hp = Hyperparams(max_outer=8, **hp_kwargs)
        return cfg, kernels, mask, observed, hp


class TestScaSolve(SolveSetup):
    def test_full_sampling_pins_image(self):
        rng = np.random.default_rng(22)
        dims = DataDims(8, 8, 4)
        kspace = crandn(rng, *dims.shape)
        mask = np.ones(dims.shape, dtype=np.uint8)
        landmarks_src = tensor_to_matrix(kspace)[:16]
        from ktrecon.kernels import select_landmarks
        landmarks = select_landmarks(landmarks_src, 3)
        kernels = build_dictionary(landmarks, default_specs(landmarks, 1))
        cfg = ModelConfig(dims=dims, n_l=3, m=1, q=1)
        hp = Hyperparams(lambda1=0.0, lambda2=0.0, lambda3=0.0, lambda4=0.0,
                         max_outer=5)
        pinned = tensor_to_matrix(dft2_frames(kspace, "inverse"))
        seen = []
        state, reports = sca_solve(cfg, kernels, mask, kspace, hp, seed=0,
                                   callback=lambda s, r: seen.append(s.X.copy()))
        for x in seen:
            assert np.max(np.abs(x - pinned)) < 1e-12

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(23)
        cfg, kernels, mask, observed, hp = self.build(rng)
        state_a, reports_a = sca_solve(cfg, kernels, mask, observed, hp, seed=5)
        state_b, reports_b = sca_solve(cfg, kernels, mask, observed, hp, seed=5)
        assert [r.objective for r in reports_a] == [r.objective for r in reports_b]
        assert np.array_equal(state_a.X, state_b.X)
        assert np.array_equal(state_a.a1, state_b.a1)

    def test_iterates_satisfy_constraints(self):
        rng = np.random.default_rng(24)
        cfg, kernels, mask, observed, hp = self.build(rng)
        sampled = mask != 0

        def check(state, report):
            k = dft2_frames(matrix_to_tensor(state.X, cfg.dims), "forward")
            assert np.max(np.abs(k[sampled] - observed[sampled])) <= 1e-9
            for blk in state.b_blocks:
                assert np.max(np.abs(blk.sum(axis=0) - 1.0)) <= 1e-10

        sca_solve(cfg, kernels, mask, observed, hp, seed=1, callback=check)

    def test_gamma_trace_matches_recursion(self):
        rng = np.random.default_rng(25)
        cfg, kernels, mask, observed, hp = self.build(rng)
        _, reports = sca_solve(cfg, kernels, mask, observed, hp, seed=2)
        gamma = hp.gamma0
        assert reports[0].gamma == gamma
        for rep in reports[1:]:
            gamma = gamma * (1.0 - hp.zeta * gamma)
            assert rep.gamma == pytest.approx(gamma, rel=1e-15)

    def test_divergence_names_subtask(self):
        rng = np.random.default_rng(26)
        cfg, kernels, mask, observed, hp = self.build(rng)
        poisoned = observed.copy()
        poisoned[0, 0, 0] = np.nan
        with pytest.raises(DivergenceError):
            sca_solve(cfg, kernels, mask, poisoned, hp, seed=0)

    def test_early_stop_on_stagnation(self):
        rng = np.random.default_rng(27)
        cfg, kernels, mask, observed, hp = self.build(rng)
        hp = Hyperparams(max_outer=500, tol_rel=1.0)  # everything counts as stagnant
        _, reports = sca_solve(cfg, kernels, mask, observed, hp, seed=0)
        assert reports[-1].n == 5


class TestTraceCsv(SolveSetup):
    def test_csv_deterministic_and_excludes_wall_time(self, tmp_path):
        rng = np.random.default_rng(28)
        cfg, kernels, mask, observed, hp = self.build(rng, n_fr=4)
        _, reports = sca_solve(cfg, kernels, mask, observed, hp, seed=0)
        first, second = tmp_path / "a.csv", tmp_path / "b.csv"
        write_trace_csv(reports, first)
        write_trace_csv(reports, second)
        assert first.read_bytes() == second.read_bytes()
        header = first.read_text().splitlines()[0]
        assert "seconds" not in header
        assert header.startswith("n,gamma,objective,rel_change")

    def test_opt_in_wall_time(self, tmp_path):
        rng = np.random.default_rng(29)
        cfg, kernels, mask, observed, hp = self.build(rng, n_fr=4)
        _, reports = sca_solve(cfg, kernels, mask, observed, hp, seed=0)
        path = tmp_path / "t.csv"
        write_trace_csv(reports, path, include_seconds=True)
        assert path.read_text().splitlines()[0].endswith("seconds")


class TestMultiRestart(SolveSetup):
    def test_single_seed_mean_equals_run(self):
        rng = np.random.default_rng(30)
        cfg, kernels, mask, observed, hp = self.build(rng, n_fr=4)
        truth = dft2_frames(crandn(rng, *cfg.dims.shape), "inverse")
        result = multi_restart(cfg, kernels, mask, observed, hp, seeds=[7], truth=truth)
        assert result.best_seed == 7
        assert result.mean_metrics == result.runs[0].metrics

    def test_repeated_seeds_zero_variance(self):
        rng = np.random.default_rng(31)
        cfg, kernels, mask, observed, hp = self.build(rng, n_fr=4)
        result = multi_restart(cfg, kernels, mask, observed, hp, seeds=[3, 3, 3])
        objectives = [r.final_objective for r in result.runs]
        assert objectives[0] == objectives[1] == objectives[2]

    def test_error_names_seed(self):
        rng = np.random.default_rng(32)
        cfg, kernels, mask, observed, hp = self.build(rng, n_fr=4)
        poisoned = observed.copy()
        poisoned[0, 0, 0] = np.inf
        with pytest.raises(RuntimeError, match="seed 11"):
            multi_restart(cfg, kernels, mask, poisoned, hp, seeds=[11])

    def test_workers_match_sequential(self):
        rng = np.random.default_rng(33)
        cfg, kernels, mask, observed, hp = self.build(rng, n_fr=4)
        seq = multi_restart(cfg, kernels, mask, observed, hp, seeds=[1, 2])
        par = multi_restart(cfg, kernels, mask, observed, hp, seeds=[1, 2], workers=2)
        for a, b in zip(seq.runs, par.runs):
            assert a.final_objective == b.final_objective

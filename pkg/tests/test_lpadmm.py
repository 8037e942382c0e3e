import logging
import math

import numpy as np
import pandas as pd
import pytest

from drlr.boxqp import BoxQpSolverKind
from drlr.lpadmm import (TRACE_COLUMNS, LpAdmmState, check_lyapunov_monotone,
                         check_rate_bound, check_step_inequality, initial_state,
                         lp_admm_step, penalty_threshold, rate_bound_violations,
                         solve_subproblem)
from drlr.model import DrlrConfig, Solution, Status, SubproblemInstance, kkt_residual
from drlr.sample_datasets import load_sample_synthetic


def sample_instance(name, lam, kappa=1.0):
    data, _ = load_sample_synthetic(name)
    return SubproblemInstance.from_dataset(data, lam, kappa)


def zero_state(inst, rho):
    return initial_state(inst, rho)


def test_scalar_step_by_hand():
    inst = SubproblemInstance(np.array([[1.0]]), 100.0, 1.0)
    st = lp_admm_step(zero_state(inst, 1.0), inst)
    # beta stays 0, v = 0 and the prox moves 0 by 1/2 towards the kink at 100
    assert st.beta == pytest.approx([0.0])
    assert st.mu == pytest.approx([0.5])
    assert st.w == pytest.approx([0.5])
    assert st.rho == 1.0
    assert st.k == 1


@pytest.mark.parametrize("kind", list(BoxQpSolverKind))
def test_step_multiplier_update_and_feasibility(kind):
    inst = sample_instance("tiny", lam=0.4)
    st = zero_state(inst, 0.5)
    for _ in range(5):
        new = lp_admm_step(st, inst, kind)
        expected_w = st.w - st.rho * (inst.margins(new.beta) - new.mu)
        assert np.allclose(new.w, expected_w, atol=1e-14)
        assert np.max(np.abs(new.beta)) <= inst.lam
        assert np.array_equal(new.prev_mu, st.mu)
        st = new


def test_penalty_growth():
    inst = sample_instance("tiny", lam=0.4)
    st = zero_state(inst, 0.001)
    for _ in range(10):
        st = lp_admm_step(st, inst, gamma=1.05)
    assert st.rho == pytest.approx(0.001 * 1.05 ** 10, rel=1e-12)

    st = zero_state(inst, 1.0)
    for _ in range(10):
        st = lp_admm_step(st, inst, gamma=2.0, rho_cap=8.0)
    assert st.rho == 8.0


def test_tiny_eta_matches_lp_admm_step():
    inst = sample_instance("tiny", lam=0.4)
    st = zero_state(inst, 0.5)
    a = lp_admm_step(st, inst, eta=0.0)
    b = lp_admm_step(st, inst, eta=1e-12)
    assert np.allclose(a.mu, b.mu, atol=1e-9)
    assert np.allclose(a.w, b.w, atol=1e-9)


def test_initial_state_clamps_warm_start():
    inst = sample_instance("tiny", lam=0.2)
    sol = Solution(beta=np.array([1.0, -0.1, -3.0]), lam=1.0, objective=0.0,
                   kkt_residual=0.0, status=Status.CONVERGED,
                   mu=np.ones(inst.n_samples), w=None)
    st = initial_state(inst, 2.0, sol)
    assert st.beta == pytest.approx([0.2, -0.1, -0.2])
    assert np.all(st.mu == 1.0)
    assert np.all(st.w == 0.0)
    assert st.rho == 2.0
    assert isinstance(initial_state(inst, 1.0, {"beta": [0, 0, 0]}), LpAdmmState)


def test_adaptive_solve_converges():
    inst = sample_instance("small", lam=0.5)
    cfg = DrlrConfig()
    sol, trace = solve_subproblem(inst, cfg)
    assert sol.status is Status.CONVERGED
    assert sol.iterations < cfg.max_iter
    assert sol.kkt_residual <= 1e-4
    assert trace.column("primal_residual")[-1] <= cfg.primal_tol
    assert len(trace) == sol.iterations + 1
    assert trace.header["solver"] == "lpadmm-adaptive"
    assert np.max(np.abs(sol.beta)) <= inst.lam
    rho = trace.column("rho")
    assert np.all(np.diff(rho) >= 0)


def test_zero_lambda_gives_zero_beta():
    inst = sample_instance("tiny", lam=0.0)
    sol, _ = solve_subproblem(inst, DrlrConfig())
    assert np.all(sol.beta == 0.0)
    assert sol.objective == pytest.approx(math.log(2.0), abs=1e-5)


def test_constant_penalty_is_raised(caplog):
    inst = sample_instance("tiny", lam=0.4)
    cfg = DrlrConfig(gamma=1.0, rho0=1e-6, max_iter=5)
    with caplog.at_level(logging.WARNING, logger="drlr.lpadmm"):
        _, trace = solve_subproblem(inst, cfg)
    assert any("raised" in r.getMessage() for r in caplog.records)
    assert trace.header["solver"] == "lpadmm"
    assert trace.header["rho0"] == pytest.approx(1.01 * penalty_threshold(inst))
    assert np.all(trace.column("rho") == trace.header["rho0"])


def test_max_iter_status(caplog):
    inst = sample_instance("tiny", lam=0.4)
    with caplog.at_level(logging.WARNING, logger="drlr.lpadmm"):
        sol, trace = solve_subproblem(inst, DrlrConfig(max_iter=3))
    assert sol.status is Status.MAX_ITER
    assert sol.iterations == 3
    assert any("max_iter" in r.getMessage() for r in caplog.records)


def test_trace_csv(tmp_path):
    inst = sample_instance("tiny", lam=0.4)
    sol, trace = solve_subproblem(inst, DrlrConfig(max_iter=200))
    fname = tmp_path / "trace.csv"
    trace.to_csv(fname, ref_objective=sol.objective - 1e-3)
    df = pd.read_csv(fname)
    assert list(df.columns) == TRACE_COLUMNS + ["suboptimality"]
    assert len(df) == trace.iterations + 1
    assert df["iter"].iloc[0] == 0
    assert (df["suboptimality"].diff().dropna() <= 0).all()
    assert (df["elapsed_ms"].diff().dropna() >= 0).all()


RATE_ITERATIONS = 2000


@pytest.fixture(scope="module")
def rate_reference():
    """Constant-penalty solve of the 'rate' instance to primal residual 1e-10"""
    inst = sample_instance("rate", lam=0.3)
    ref, _ = solve_subproblem(inst, DrlrConfig(gamma=1.0, primal_tol=1e-10,
                                               max_iter=200000))
    assert ref.status is Status.CONVERGED
    return inst, ref


@pytest.fixture(scope="module")
def rate_setup(rate_reference):
    inst, ref = rate_reference
    rho = max(0.05, 10 * (math.sqrt(3.0) + 1.0) / (4 * inst.n_samples))
    cfg = DrlrConfig(gamma=1.0, rho0=rho, max_iter=RATE_ITERATIONS, primal_tol=1e-14)
    _, trace = solve_subproblem(inst, cfg, reference=(ref.mu, ref.w))
    return inst, ref, rho, trace


def test_kkt_residual_at_reference(rate_reference):
    inst, ref = rate_reference
    assert kkt_residual(ref.beta, ref.mu, ref.w, inst) <= 1e-6
    assert ref.kkt_residual <= 1e-6


def test_step_keeps_a_kkt_point(rate_reference):
    inst, ref = rate_reference
    st = LpAdmmState(ref.beta.copy(), ref.mu.copy(), ref.w.copy(), rho=1.0)
    new = lp_admm_step(st, inst, inner_tol=1e-12)
    assert np.max(np.abs(new.beta - ref.beta)) <= 1e-7
    assert np.max(np.abs(new.mu - ref.mu)) <= 1e-7
    assert np.max(np.abs(new.w - ref.w)) <= 1e-7


def test_lyapunov_is_monotone(rate_setup):
    _, _, _, trace = rate_setup
    assert check_lyapunov_monotone(trace, slack=1e-9)


def test_step_inequality(rate_setup):
    inst, _, rho, trace = rate_setup
    assert check_step_inequality(trace, inst.lipschitz_f, rho, slack=1e-10)


def test_ergodic_rate_bound(rate_setup):
    _, ref, rho, trace = rate_setup
    assert check_rate_bound(trace, ref.objective, rho, trace.initial, ref.mu, slack=1e-9)
    assert rate_bound_violations(trace, ref.objective, rho, trace.initial, ref.mu,
                                 slack=1e-9) == []


def test_rate_bound_rejects_growing_penalty():
    inst = sample_instance("tiny", lam=0.4)
    _, trace = solve_subproblem(inst, DrlrConfig(max_iter=20))
    with pytest.raises(ValueError):
        rate_bound_violations(trace, 0.0, 1.0, trace.initial, np.zeros(inst.n_samples))


def test_lyapunov_needs_reference():
    inst = sample_instance("tiny", lam=0.4)
    _, trace = solve_subproblem(inst, DrlrConfig(max_iter=5))
    with pytest.raises(ValueError):
        check_lyapunov_monotone(trace)


def first_primal_hit(trace, tol):
    hits = np.nonzero(trace.column("primal_residual")[1:] <= tol)[0]
    return int(hits[0]) + 1 if hits.size else np.inf


@pytest.mark.slow
def test_growing_penalty_reaches_primal_tolerance_sooner():
    """On 1000x50 instances the geometric schedule from rho0 = 0.001 beats the
    smallest admissible constant penalty"""
    wins = 0
    for seed in range(5):
        data, _ = load_sample_synthetic("large", seed=3 + seed)
        inst = SubproblemInstance.from_dataset(data, 0.1, 1.0)
        _, adaptive = solve_subproblem(inst, DrlrConfig(max_iter=3000))
        _, constant = solve_subproblem(inst, DrlrConfig(gamma=1.0, max_iter=3000))
        wins += first_primal_hit(adaptive, 1e-6) < first_primal_hit(constant, 1e-6)
    assert wins >= 4

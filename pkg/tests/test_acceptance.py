"""Acceptance suite: one test per criterion, each printing a pass line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines; every tolerance is pinned here, not configurable.
"""
import math
from pathlib import Path

import numpy as np
import pytest
from scipy.special import expit

from netgibbs.applications import (
    TradeModel,
    linear_response,
    perturbed_table,
    reciprocity_count,
    trade_fixed_point,
    zeta_trade,
    zeta_trade_variational,
)
from netgibbs.asymptotics import (
    LimitModel,
    circle_distance,
    finite_linear_link_fraction,
    finite_linear_log_partition,
    homophily_mu_eta_circle,
    homophily_mu_eta_discrete,
    zeta_continuous,
    zeta_continuous_uniform_circle,
    zeta_discrete_homophily,
    zeta_isolated,
)
from netgibbs.choice import (
    ContinuousMeetings,
    DiscreteChoiceModel,
    DiscreteMeetings,
    LinearOutDegreeUtility,
    LogitShocks,
    PerDyadUtility,
    PlannerUtility,
    TableIsolatedUtility,
    probit_like_shocks,
)
from netgibbs.cli import main as cli_main
from netgibbs.dynamics import (
    build_transition_operator,
    simulate_continuous,
    simulate_discrete,
    stationary_exact,
    tv_distance,
)
from netgibbs.extensions import (
    EpsilonDeviationModel,
    MpeProblem,
    SwitchingCostModel,
    central_planner_table,
    epsilon_aggregating,
    mpe_solve,
    switching_cost_chi,
)
from netgibbs.graphs import Network, n_dyads
from netgibbs.potential import (
    build_aggregating_function,
    check_conservative,
    detailed_balance_residual,
    potential_game_check,
    rebuild_phi_random_order,
)

LN3 = math.log(3.0)
TWO_TYPE_W = np.array([0.5, 0.5])
HOMOPHILOUS = np.array([[0.0, 1.0], [1.0, 0.0]])


def ok(num: int, text: str):
    print(f"[PASS] criterion {num:2d}: {text}")


def logit_model(utility, n):
    return DiscreteChoiceModel(utility, LogitShocks(), n)


def test_criterion_01_equivalence_triangle():
    meetings = DiscreteMeetings.uniform(3, 0.3)
    for seed in range(10):
        rng = np.random.default_rng(1000 + seed)
        model = logit_model(TableIsolatedUtility.random(3, rng), 3)
        report = check_conservative(model, 3)
        assert report.conservative
        gt = build_aggregating_function(model, 3, check=False)
        pi = stationary_exact(build_transition_operator(model, meetings, 3))
        assert np.max(np.abs(pi - gt.pi)) < 1e-8
        assert detailed_balance_residual(gt, model, meetings) < 1e-10
    ok(1, "conservative verdict, Gibbs = eigen pi (<1e-8), detailed balance <1e-10, "
          "10 random isolated logit models at N=3")


def test_criterion_02_path_independence():
    rng = np.random.default_rng(2)
    model = logit_model(TableIsolatedUtility.random(3, rng), 3)
    gt = build_aggregating_function(model, 3)
    order_rng = np.random.default_rng(20)
    worst = 0.0
    for mask in range(64):
        g = Network(3, mask)
        for _ in range(50):
            rebuilt = rebuild_phi_random_order(model, g, order_rng)
            worst = max(worst, abs(rebuilt - gt.phi[mask]))
    assert worst < 1e-12
    ok(2, f"potential identical over 50 random orderings per network (worst {worst:.1e})")


def test_criterion_03_exact_and_ordinal_potentials():
    rng = np.random.default_rng(3)
    model = logit_model(TableIsolatedUtility.random(3, rng), 3)
    gt = build_aggregating_function(model, 3)
    logit_result = potential_game_check(model, gt)
    assert logit_result.exact and logit_result.max_exact_gap < 1e-10

    payoff = np.random.default_rng(33).normal(0, 1.5, size=(3, 3))
    np.fill_diagonal(payoff, 0.0)
    probit = DiscreteChoiceModel(PerDyadUtility(payoff), probit_like_shocks(), 3)
    gt_probit = build_aggregating_function(probit, 3)
    probit_result = potential_game_check(probit, gt_probit)
    assert probit_result.ordinal and not probit_result.exact
    ok(3, f"logit exact gap {logit_result.max_exact_gap:.1e} < 1e-10; "
          "probit model ordinal but not exact")


def test_criterion_04_timescale_invariance():
    rng = np.random.default_rng(4)
    model = logit_model(TableIsolatedUtility.random(3, rng), 3)
    rates = tuple(rng.uniform(0.5, 2.0, size=n_dyads(3)))
    lam = ContinuousMeetings(3, rates)
    disc = DiscreteMeetings(3, tuple(0.3 * r / lam.total for r in rates))
    pi_d = stationary_exact(build_transition_operator(model, disc, 3))
    pi_c = stationary_exact(build_transition_operator(model, lam, 3))
    worst = np.max(np.abs(pi_d - pi_c))
    assert worst < 1e-10
    ok(4, f"discrete (q = 0.3 lambda/lambda) and continuous stationary agree ({worst:.1e})")


def test_criterion_05_monte_carlo_consistency():
    model = logit_model(LinearOutDegreeUtility(LN3), 3)
    gt = build_aggregating_function(model, 3)
    q_total = 0.5
    meetings = DiscreteMeetings.uniform(3, q_total)
    lam = ContinuousMeetings.uniform(3, 6.0)
    worst = 0.0
    for seed in (11, 22, 33):
        traj = simulate_discrete(model, meetings, 3, int(1e6 / q_total), seed=seed)
        assert traj.n_events > 900_000
        tv_d = tv_distance(traj.occupation_distribution(), gt.pi)
        trajc = simulate_continuous(model, lam, 3, horizon=1e6 / lam.total, seed=seed)
        assert trajc.n_events > 900_000
        tv_c = tv_distance(trajc.occupation_distribution(), gt.pi)
        assert tv_d < 0.02 and tv_c < 0.02
        worst = max(worst, tv_d, tv_c)
    ok(5, f"TV(occupation, exact) < 0.02 after 1e6 events, both simulators, "
          f"3 seeds (worst {worst:.4f})")


def test_criterion_06_variational_equals_closed_form():
    worst = 0.0
    for v0 in np.linspace(-2, 2, 5):
        for gamma in np.linspace(0, 4, 5):
            lm = LimitModel.linear(v0 - gamma * HOMOPHILOUS, TWO_TYPE_W)
            var = zeta_isolated(lm).zeta
            closed = zeta_discrete_homophily(v0, gamma, HOMOPHILOUS, TWO_TYPE_W)
            worst = max(worst, abs(var - closed))
    assert worst < 1e-8
    ok(6, f"variational zeta = closed form on the 5x5 grid (worst {worst:.1e})")


def test_criterion_07_finite_n_convergence():
    worst_ratio = 0.0
    for v0, gamma in [(0.0, 0.0), (1.0, 2.0), (-1.0, 1.0)]:
        zeta = zeta_discrete_homophily(v0, gamma, HOMOPHILOUS, TWO_TYPE_W)
        for n in (20, 50, 100):
            log_z = finite_linear_log_partition(v0, gamma, HOMOPHILOUS, [n // 2, n // 2])
            gap = abs(log_z / n**2 - zeta)
            assert gap < 2.0 / n
            worst_ratio = max(worst_ratio, gap * n / 2.0)
    ok(7, f"|logZ_N/N^2 - zeta| < 2/N at N in (20,50,100) (worst ratio {worst_ratio:.2f})")


def test_criterion_08_density_distance_functionals():
    for v0 in (-1.0, 0.0, 0.8):
        mu, eta = homophily_mu_eta_discrete(v0, 0.0, HOMOPHILOUS, TWO_TYPE_W)
        assert mu == pytest.approx(float(expit(v0)), abs=1e-15)
        assert abs(eta - 0.5) < 1e-8
    mu, _ = homophily_mu_eta_discrete(0.5, 1.0, HOMOPHILOUS, TWO_TYPE_W)
    frac = finite_linear_link_fraction(0.5, 1.0, HOMOPHILOUS, [25, 25])
    assert abs(frac - mu) < 0.01
    ok(8, "mu = logistic(v0) at gamma=0, eta = mean distance 1/2 (<1e-8), "
          f"N=50 link fraction within {abs(frac - mu):.1e} of mu")


def test_criterion_09_dilogarithm_form():
    L = 2.0
    rho = lambda t: 1.0 / L
    worst = 0.0
    for v0 in np.linspace(-2, 2, 5):
        for gamma in np.linspace(0.8, 4, 5):
            quad = zeta_continuous(v0, gamma, rho, circle_distance(L), (0.0, L))
            closed = zeta_continuous_uniform_circle(v0, gamma, L)
            worst = max(worst, abs(quad - closed))
    assert worst < 1e-8
    cont = abs(zeta_continuous_uniform_circle(0.0, 1e-6, L) - math.log(1 + math.e**0))
    assert cont < 1e-6
    ok(9, f"dilogarithm closed form matches quadrature on the grid (worst {worst:.1e}); "
          f"gamma->0+ continuity {cont:.1e}")


def test_criterion_10_figure_qualitative_reproduction():
    v0s = np.linspace(-2, 2, 5)
    gammas = np.linspace(0.8, 4.0, 5)
    mu_d = np.zeros((5, 6))
    mu_c = np.zeros((5, 6))
    for i, v0 in enumerate(v0s):
        m_d0, _ = homophily_mu_eta_discrete(v0, 0.0, HOMOPHILOUS, TWO_TYPE_W)
        m_c0, _ = homophily_mu_eta_circle(v0, 0.0, 2.0)
        assert abs(m_d0 - m_c0) < 0.05  # exact agreement at gamma = 0
        mu_d[i, 0] = m_d0
        mu_c[i, 0] = m_c0
        for j, gamma in enumerate(gammas):
            m_di, eta_di = homophily_mu_eta_discrete(v0, gamma, HOMOPHILOUS, TWO_TYPE_W)
            m_ci, eta_ci = homophily_mu_eta_circle(v0, gamma, 2.0)
            assert eta_di < eta_ci  # discrete types keep neighbors closer
            mu_d[i, j + 1] = m_di
            mu_c[i, j + 1] = m_ci
    for surface in (mu_d, mu_c):
        assert np.all(np.diff(surface, axis=0) > 0)  # increasing in v0
        assert np.all(np.diff(surface, axis=1) < 0)  # decreasing in gamma
    ok(10, "eta_disc < eta_cont at every gamma > 0 cell; mu surfaces agree at "
           "gamma=0 and are monotone in v0 and gamma")


def test_criterion_11_trade():
    w = np.array([0.3, 0.5, 0.2])
    d = np.array([[0.0, 1.0, 2.0], [1.0, 0.0, 1.5], [2.0, 1.5, 0.0]])
    tm = TradeModel(v0=0.5, gamma=0.8, c=1.0, dist=d, weights=w)
    sol = trade_fixed_point(tm)
    assert np.max(np.abs(sol.residuals)) < 1e-12
    tm0 = TradeModel(v0=0.5, gamma=0.8, c=0.0, dist=d, weights=w)
    assert np.allclose(trade_fixed_point(tm0).T, expit(0.5 - 0.8 * d), atol=1e-15)
    a_prev = None
    for c in (0.5, 1.0, 2.0):
        a_c = trade_fixed_point(TradeModel(v0=0.5, gamma=0.8, c=c, dist=d, weights=w)).A
        if a_prev is not None:
            assert np.all(a_c > a_prev)
        a_prev = a_c
    for r in range(3):
        shares = sol.T[r][np.argsort(d[r])]
        assert np.all(np.diff(shares) < 0)
    route_gap = abs(zeta_trade(tm) - zeta_trade_variational(tm).zeta)
    assert route_gap < 1e-8
    ok(11, f"fixed-point residual <1e-12, c=0 logistic exact, A_r increasing, "
           f"T decreasing in distance, solver routes agree ({route_gap:.1e})")


def test_criterion_12_linear_response():
    gt = build_aggregating_function(logit_model(LinearOutDegreeUtility(0.4), 3), 3)
    observable = lambda g: float(g.n_links)
    eps = 1e-4
    fd = (
        perturbed_table(gt, reciprocity_count, eps).pi
        - perturbed_table(gt, reciprocity_count, -eps).pi
    )
    fd_value = sum(
        fd[mask] * observable(Network(3, mask)) for mask in range(64)
    ) / (2 * eps)
    cov = linear_response(gt, reciprocity_count, observable)
    assert abs(cov - fd_value) < 1e-6
    ok(12, f"covariance formula = central finite difference ({abs(cov - fd_value):.1e})")


def test_criterion_13_switching_costs():
    worst = 0.0
    for x in (-3.0, -0.7, 0.5, 2.0):
        f = lambda s: (switching_cost_chi(x, s) - x) / s
        extrap = (10.0 * f(1e-4) - f(1e-3)) / 9.0
        worst = max(worst, abs(extrap - math.tanh(x / 2.0)))
    assert worst < 1e-6

    rng = np.random.default_rng(13)
    utility = TableIsolatedUtility.random(3, rng)
    report = check_conservative(SwitchingCostModel(utility, 0.5, 3), 3)
    assert not report.conservative and report.witness is not None

    base = logit_model(utility, 3)
    zero_cost = SwitchingCostModel(utility, 0.0, 3)
    for mask in range(64):
        g = Network(3, mask)
        for idx in range(6):
            assert zero_cost.p_index(g, idx) == pytest.approx(
                base.p_index(g, idx), abs=1e-15
            )
    ok(13, f"slope expansion Richardson error {worst:.1e} < 1e-6; witness found at "
           "s=0.5; s=0 recovers base probabilities exactly")


def test_criterion_14_epsilon_deviations():
    always_on = lambda d, g: True
    uniform = epsilon_aggregating(EpsilonDeviationModel(0.5, always_on, 3), 3)
    dev = np.max(np.abs(uniform.pi - 1.0 / 64.0))
    assert dev < 1e-14
    gt = epsilon_aggregating(EpsilonDeviationModel(0.25, always_on, 3), 3)
    ratio = gt.pi[63] / gt.pi[0]
    expected = (0.75 / 0.25) ** 6
    assert abs(ratio - expected) < 1e-10
    ok(14, f"eps=0.5 uniform (max dev {dev:.1e}); complete/empty odds "
           f"{ratio:.6f} = ((1-eps)/eps)^6 within {abs(ratio - expected):.1e}")


def test_criterion_15_central_planner():
    rng = np.random.default_rng(15)
    table = rng.normal(0, 1, size=64)
    welfare = lambda g: float(table[g.mask])
    direct = central_planner_table(welfare, 3)
    shared = build_aggregating_function(
        logit_model(PlannerUtility(welfare), 3), 3
    )
    phi_gap = np.max(np.abs(direct.phi - shared.phi))
    assert phi_gap < 1e-12
    model = logit_model(PlannerUtility(welfare), 3)
    resid = detailed_balance_residual(direct, model, DiscreteMeetings.uniform(3, 0.3))
    assert resid < 1e-12
    ok(15, f"planner potential = welfare shift (gap {phi_gap:.1e}); detailed "
           f"balance residual {resid:.1e} < 1e-12")


def test_criterion_16_mpe_limits():
    rng = np.random.default_rng(16)
    flow = rng.normal(0.0, 1.0, size=(2, 4))
    lam = ContinuousMeetings.uniform(2, 2.0)

    rho_hi = 1e3 * lam.total
    hi = mpe_solve(MpeProblem(flow=flow, rho=rho_hi, meetings=lam), 2)
    assert hi.converged and hi.residual < 1e-10
    bound = (2.0 / rho_hi) * lam.total * np.sum(np.abs(flow), axis=1)
    assert np.all(np.max(np.abs(hi.values - flow), axis=1) <= bound)

    rho_lo = 1e-6 * lam.total
    lo = mpe_solve(MpeProblem(flow=flow, rho=rho_lo, meetings=lam), 2)
    assert lo.converged and lo.residual < 1e-10
    gap = np.max(np.abs(lo.values - flow.mean(axis=1, keepdims=True)))
    assert gap < 1e-3
    ok(16, f"impatient values within the rate bound; patient values within "
           f"{gap:.1e} of the uniform flow average; residuals < 1e-10")


def test_criterion_17_cli_determinism(tmp_path):
    configs = Path(__file__).resolve().parent.parent / "configs"
    demos = {
        "check": "switching_cost_demo.toml",
        "gibbs": "isolated_n3.toml",
        "stationary": "isolated_n3.toml",
        "simulate": "isolated_n3.toml",
        "zeta": "zeta_demo.toml",
        "sweep": "homophily_sweep.toml",
        "trade": "trade_demo.toml",
        "mpe": "mpe_demo.toml",
    }
    for sub, config in demos.items():
        out1 = tmp_path / sub / "run1"
        out2 = tmp_path / sub / "run2"
        assert cli_main([sub, "--config", str(configs / config), "--out", str(out1)]) == 0
        assert cli_main([sub, "--config", str(configs / config), "--out", str(out2)]) == 0
        names = sorted(p.name for p in out1.iterdir())
        assert names
        for name in names:
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes(), (sub, name)
    ok(17, "byte-identical outputs for all 8 subcommands across consecutive runs")

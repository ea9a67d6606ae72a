import math

import numpy as np
import pytest

from xlosfox.contour import plan_contour
from xlosfox.cubature import LognormalSpec, lognormal_nodes, product_gauss_hermite
from xlosfox.foxh import EvalOptions, Pair
from xlosfox.network import ChannelModel, Scenario, TierConfig, bundled_scenario, derive
from xlosfox.xlos import (XlosQuery, build_foxh_params, sweep, xlos_asymptotic,
                          xlos_closed_form, xlos_oracle_m1)

# oracle values frozen from an independent script (scipy.integrate.quad over
# the nearest-distance law, written separately from the package)
ORACLE_UDN = {0: 0.996328, 5: 0.867068, 10: 0.337396, 20: 0.0006552}
ORACLE_LDN = {-10: 0.89165, -5: 0.381882, 0: 0.0381892, 10: 1.05846e-05}


def _net(name="udn"):
    return derive(bundled_scenario(name))


def test_params_m1():
    p = build_foxh_params(_net(), [0], [1.0], 2.0)
    assert p.outer_upper_num == (Pair(0.0, (0.25,)),)
    assert p.outer_lower_den == ()
    blk = p.per_variable[0]
    assert blk.upper_num == (Pair(1.0, (1.0,)),) and blk.lower_den == (Pair(0.0, (1.0,)),)


def test_params_m2():
    net = _net()
    p = build_foxh_params(net, [0, 0], [1.0, 2.0], 3.0)
    assert p.outer_upper_num == (Pair(-3.0, (1.0, 0.0)), Pair(-1.0, (0.25, 0.25)))
    assert p.outer_lower_den == (Pair(-4.0, (1.0, 0.0)),)
    z = 3.0 * net.Lambda[0] ** 0.25 / (np.array([1.0, 2.0]) * net.K[0])
    assert np.allclose(p.z, z, rtol=1e-14)


@pytest.mark.parametrize("M", [1, 2, 3])
def test_planned_abscissas_at_least_point_one(M):
    p = build_foxh_params(_net(), [0] * M, [1.0] * M, 1.0)
    assert min(plan_contour(p).abscissa) >= 0.1 - 1e-12


def test_nonpositive_argument_rejected():
    with pytest.raises(ValueError):
        build_foxh_params(_net(), [0], [0.0], 1.0)


def test_step_kernel_m1_closed_form():
    # with sigma_K = 0 the XLOS probability of one tier is a PPP void probability
    ch = ChannelModel(sigmaK_dB=0.0)
    sc = Scenario(ch, [TierConfig(1e-3, 0.0, 10.0, 30.0)])
    net = derive(sc)
    for k in (0.0, 8.0):
        Kth = 10 ** (k / 10)
        r_star2 = (net.K[0] * net.omega[0] ** -0.25 / Kth) ** 4
        exact = 1 - math.exp(-math.pi * net.lambda_T * r_star2)
        cf = xlos_closed_form(XlosQuery(sc, k, options=EvalOptions(points=2**16)))
        assert cf.probability == pytest.approx(exact, abs=1e-3)
        assert xlos_oracle_m1(sc, k) == pytest.approx(exact, abs=1e-9)


@pytest.mark.parametrize("name,table", [("udn", ORACLE_UDN), ("ldn", ORACLE_LDN)])
def test_oracle_frozen_values(name, table):
    sc = bundled_scenario(name)
    for k, v in table.items():
        assert xlos_oracle_m1(sc, k) == pytest.approx(v, rel=2e-5, abs=1e-6)


def test_oracle_limits():
    sc = bundled_scenario("ldn")
    assert xlos_oracle_m1(sc, -100) == pytest.approx(1.0, abs=1e-9)
    assert xlos_oracle_m1(sc, 80) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("k", [-5.0, 5.0, 15.0])
def test_closed_form_m1_agrees_with_oracle(k):
    sc = bundled_scenario("udn")
    cf = xlos_closed_form(XlosQuery(sc, k, options=EvalOptions(points=2**17)))
    assert abs(cf.probability - xlos_oracle_m1(sc, k)) < 0.02


def test_closed_form_tail_relative_accuracy():
    sc = bundled_scenario("ldn")
    cf = xlos_closed_form(XlosQuery(sc, 10.0, options=EvalOptions(points=2**17)))
    assert cf.probability == pytest.approx(ORACLE_LDN[10], rel=0.01)


def test_low_threshold_limit():
    for name in ("udn", "ldn"):
        cf = xlos_closed_form(XlosQuery(bundled_scenario(name), -60.0,
                                        options=EvalOptions(points=2**16)))
        assert 0.99 <= cf.probability <= 1.0


def test_replicates_give_stderr():
    cf = xlos_closed_form(XlosQuery(bundled_scenario("udn"), 8.0,
                                    options=EvalOptions(points=4096, replicates=4, seed=9)))
    assert cf.stderr > 0
    assert len(cf.diagnostics["term_stderr"]) == 16


def test_asymptotic_low_is_one():
    assert xlos_asymptotic(XlosQuery(bundled_scenario("ldn"), 3.0), "low").probability == 1.0


def test_asymptotic_high_power_law():
    sc = bundled_scenario("hetnet").with_M(2)
    a = xlos_asymptotic(XlosQuery(sc, 20.0), "high").diagnostics["raw"]
    b = xlos_asymptotic(XlosQuery(sc, 23.0), "high").diagnostics["raw"]
    c = 10 ** 0.3
    assert b == pytest.approx(a * c ** (-2 / 0.5), rel=1e-12)


def test_asymptotic_high_m1_formula():
    # for M = 1 the sum reduces to sqrt(pi) lambda (K / K_th)^{2/alpha} E_GH[omega^{2/alpha}]
    sc = bundled_scenario("ldn")
    net = derive(sc)
    cub = product_gauss_hermite(1, 16)
    om = lognormal_nodes(cub, [LognormalSpec(0, 3)])[:, 0]
    Kth = 10 ** 2
    ref = math.sqrt(math.pi) * 3e-8 * np.sum(cub.weights * (om * net.K[0] / Kth) ** 4)
    assert xlos_asymptotic(XlosQuery(sc, 20.0), "high").diagnostics["raw"] == pytest.approx(ref)


def test_asymptote_matches_closed_form_deep_tail():
    sc = bundled_scenario("ldn")
    for k in (10.0, 15.0):
        hi = xlos_asymptotic(XlosQuery(sc, k), "high").probability
        cf = xlos_closed_form(XlosQuery(sc, k, options=EvalOptions(points=2**17))).probability
        assert hi == pytest.approx(cf, rel=0.15)


def test_sweep_rows_and_monotonicity():
    rows = sweep(bundled_scenario("udn"), [-10, 0, 10, 20], ["closed_form", "oracle_m1"],
                 options=EvalOptions(points=2**15))
    assert len(rows) == 8
    for method in ("closed_form", "oracle_m1"):
        p = [r.probability for r in rows if r.method == method]
        assert all(b <= a + 0.02 for a, b in zip(p, p[1:]))


def test_sweep_single_point():
    assert len(sweep(bundled_scenario("udn"), [3.0], ["asymptotic_low"])) == 1


def test_sweep_rejects_bad_input():
    with pytest.raises(ValueError):
        sweep(bundled_scenario("udn"), [], ["closed_form"])
    with pytest.raises(ValueError):
        sweep(bundled_scenario("udn"), [0.0], ["bogus"])


def test_oracle_needs_m1():
    with pytest.raises(ValueError):
        sweep(bundled_scenario("hetnet"), [0.0], ["oracle_m1"])


def test_m_above_cap_rejected():
    with pytest.raises(ValueError):
        xlos_closed_form(XlosQuery(bundled_scenario("udn").with_M(4), 0.0))


@pytest.mark.slow
def test_monitoring_more_cells_helps_hetnet():
    sc = bundled_scenario("hetnet")
    opts = EvalOptions(points=2**17)
    p1 = xlos_closed_form(XlosQuery(sc.with_M(1), 5.0, options=opts)).probability
    p2 = xlos_closed_form(XlosQuery(sc.with_M(2), 5.0, order=8, options=opts)).probability
    assert p2 >= p1 - 0.02

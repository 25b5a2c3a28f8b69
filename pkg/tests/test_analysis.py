import math

import numpy as np
import pytest

from qpass.adversary import CardStealPassword, ForgedInput
from qpass.analysis import (
    DetectionStats,
    get_scenario,
    monte_carlo,
    ps_maximize,
)
from qpass.analysis.bounds import (
    BoundCheckReport,
    alternate_lock,
    decoy_session_detection,
    delta_e_closed_form,
    delta_e_direct,
    detection_operator,
    no_card_detection_bound,
    pn_closed_form,
    pn_minimize_direct,
    ps_closed_form,
    ps_direct,
    ps_operator,
    ps_supremum,
    ps_supremum_closed_form,
    random_unitary2,
    total_detection,
)
from qpass.analysis.montecarlo import SCENARIOS
from qpass.analysis.optimize import psi_to_theta, theta_to_psi
from qpass.analysis.report import bounds_summary, check_point, headline, pw_grid
from qpass.primitives import KET0, ProtocolParams, alpha_ket
from qpass.qcore import RngStream


# -- no-card pass probability ---------------------------------------------------


def test_ps_closed_form_matches_trace(param_grid):
    rng = RngStream(1)
    for i, p in enumerate(param_grid):
        f = ForgedInput.random(rng.child(i))
        assert abs(ps_closed_form(f, p) - ps_direct(f, p)) < 1e-10


def test_ps_worked_example(half):
    assert ps_closed_form(ForgedInput.product(KET0, KET0), half) == pytest.approx(0.3, abs=1e-15)


def test_ps_independent_of_completion(half):
    alt = alternate_lock(half, random_unitary2(RngStream(2)))
    for i in range(10):
        f = ForgedInput.random(RngStream(3, i))
        assert ps_direct(f, half, alt) == pytest.approx(ps_direct(f, half), abs=1e-12)


def test_ps_operator_is_expectation(half):
    o = ps_operator(half)
    assert np.allclose(o, o.conj().T)
    f = ForgedInput.random(RngStream(4))
    assert np.vdot(f.psi, o @ f.psi).real == pytest.approx(ps_direct(f, half), abs=1e-14)


def test_ps_supremum_closed_form(param_grid):
    for p in param_grid:
        sup, vec = ps_supremum(p)
        assert sup == pytest.approx(ps_supremum_closed_form(p), abs=1e-12)
        assert ps_closed_form(ForgedInput.normalized(vec), p) == pytest.approx(sup, abs=1e-12)
        assert sup < 0.5


def test_ps_supremum_value_at_half(half):
    assert ps_supremum_closed_form(half) == pytest.approx(0.25 * (1 + 1 / math.sqrt(5)), abs=1e-15)


def test_ps_maximize_agrees_with_eigenvalue(half):
    res = ps_maximize(half, budget=40_000, starts=8, seed=1)
    assert res.value == pytest.approx(ps_supremum(half)[0], abs=1e-6)
    assert res.value <= 0.5 + 1e-9
    assert abs(res.value - res.search_value) < 1e-10
    assert res.evaluations <= 40_000


def test_ps_maximize_degenerate_budget(half):
    res = ps_maximize(half, budget=1, starts=1)
    assert not res.converged and res.evaluations == 1
    with pytest.raises(ValueError):
        ps_maximize(half, budget=0)


def test_theta_psi_roundtrip():
    psi = ForgedInput.random(RngStream(5)).psi
    back = theta_to_psi(psi_to_theta(psi))
    assert abs(abs(np.vdot(back, psi)) - 1) < 1e-12
    assert np.allclose(theta_to_psi(np.zeros(7)), [1, 0, 0, 0])


# -- card steal ----------------------------------------------------------------


def test_delta_e_closed_form_matches_trace(param_grid):
    grid = pw_grid()
    for p in param_grid[::4]:
        for pw in grid:
            assert abs(delta_e_closed_form(pw, p) - delta_e_direct(pw, p)) < 1e-10


def test_delta_e_pure_alpha_ket(param_grid):
    # sending the genuine password state is the mixed-over-K case with r = alpha^2
    for p in param_grid[::5]:
        pw = CardStealPassword.from_ket(alpha_ket(p))
        assert pw.r == pytest.approx(p.alpha**2) and pw.x == pytest.approx(p.alpha * p.beta)
        assert delta_e_direct(pw, p) == pytest.approx(delta_e_closed_form(pw, p), abs=1e-12)


def test_detection_operator_trace_form(half):
    m = detection_operator(half)
    pw = CardStealPassword(0.3, 0.2, 0.35)
    assert np.trace(pw.rho @ m).real == pytest.approx(delta_e_direct(pw, half), abs=1e-14)


def test_pn_values(half, param_grid):
    assert pn_closed_form(half) == pytest.approx(0.2, abs=1e-15)
    assert delta_e_closed_form(CardStealPassword.optimal(half), half) == pytest.approx(0.2, abs=1e-15)
    for p in param_grid[::8]:
        val, _ = pn_minimize_direct(p)
        assert abs(val - pn_closed_form(p)) <= 1e-6


def test_pn_small_alpha_limit():
    p = ProtocolParams.from_xi(1e-6, 0.5)
    assert pn_closed_form(p) == pytest.approx(0.5 * (1 - 0.25), rel=1e-5)


# -- composition ------------------------------------------------------------------


def test_total_detection():
    assert total_detection(0.2, 10) == pytest.approx(1 - 0.8**10)
    assert total_detection(0.2, 10) == pytest.approx(0.8926258176, abs=1e-9)
    assert total_detection(1.0, 3) == 1.0 and total_detection(0.0, 3) == 0.0
    assert no_card_detection_bound(4) == pytest.approx(1 - 0.5**4)
    assert decoy_session_detection(8) == pytest.approx(1 - 0.75**8)
    vals = [total_detection(0.1, n) for n in range(1, 20)]
    assert vals == sorted(vals)
    for bad in [(-0.1, 1), (1.1, 1), (0.5, 0), (0.5, 1.5)]:
        with pytest.raises(ValueError):
            total_detection(*bad)


# -- statistics ---------------------------------------------------------------------


def test_detection_stats():
    s = DetectionStats(1000, 200)
    assert s.estimate == 0.2 and s.stderr == pytest.approx(math.sqrt(0.16 / 1000))
    lo, hi = s.interval
    assert lo < 0.2 < hi
    assert s.within(0.21) and not s.within(0.3)
    for n, d in [(50, 0), (50, 50)]:
        lo, hi = DetectionStats(n, d).interval
        assert lo <= d / n <= hi and 0 <= lo and hi <= 1 + 1e-12
    assert DetectionStats(10, 10).within(1.0) and not DetectionStats(10, 9).within(1.0)
    assert s.merge(DetectionStats(1000, 300)).estimate == 0.25
    with pytest.raises(ValueError):
        DetectionStats(3, 4)


def test_report_dataclass():
    r = BoundCheckReport("x", {}, 1.0, 1.0 + 1e-12, 1e-10)
    assert r.passed and r.to_dict()["verdict"] == "pass"
    assert not BoundCheckReport("x", {}, 1.0, 1.1, 1e-10).passed


# -- Monte Carlo ------------------------------------------------------------------------


def test_monte_carlo_deterministic_and_worker_invariant():
    a = monte_carlo("card-steal-optimal-block", 5000, seed=9, chunk=1000)
    b = monte_carlo("card-steal-optimal-block", 5000, seed=9, chunk=1000)
    c = monte_carlo("card-steal-optimal-block", 5000, seed=9, chunk=1000, workers=2)
    assert a == b == c
    assert monte_carlo("card-steal-optimal-block", 5000, seed=10, chunk=1000) != a


def test_monte_carlo_errors():
    with pytest.raises(KeyError):
        get_scenario("nope")
    with pytest.raises(ValueError):
        monte_carlo("honest-basic", 0, seed=1)


def test_honest_scenarios_never_reject():
    for name in ("honest-basic", "honest-extended"):
        assert monte_carlo(name, 40, seed=1).detections == 0


@pytest.mark.parametrize(
    "name,trials",
    [
        ("no-card-best-block", 20_000),
        ("no-card-psi00-block", 20_000),
        ("card-steal-r1-block", 20_000),
        ("card-steal-optimal", 20_000),
        ("mitm-silent", 20),
        ("mitm-extended", 200),
        ("intercept-breidbart", 100),
    ],
)
def test_scenarios_hit_targets(name, trials):
    s = get_scenario(name)
    assert monte_carlo(s, trials, seed=3).within(s.target())


def test_scenario_table_is_complete():
    for s in SCENARIOS.values():
        assert s.target() is not None
        assert s.to_dict()["name"] == s.name


# -- report ---------------------------------------------------------------------------


def test_check_point_all_pass(half):
    reps = check_point(half, forgeries=10, starts=4, budget=20_000)
    names = {r.quantity for r in reps}
    assert {"lock_unitary", "ps_direct", "ps_supremum", "ps_upper_bound", "pn", "delta_e_direct"} <= names
    assert all(r.passed for r in reps), [r.to_dict() for r in reps if not r.passed]
    summary = bounds_summary(reps)
    assert summary["passed"] and summary["checks"] == len(reps)


def test_headline(half):
    h = headline(half, ns=(1, 10))
    assert h["p_n"]["closed_form"] == pytest.approx(0.2)
    assert h["delta_e_r1"] == pytest.approx(0.3)
    assert h["curves"][1]["card_steal"] == pytest.approx(1 - 0.8**10)

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dynprice import kernels
from dynprice.demand import DemandModel, Scenario, eval_model
from dynprice.info import kl_bernoulli
from dynprice.policies import (
    KnowledgeError, Policy, PolicyKnowledge, PolicySpec, ThresholdError, UnknownPriceError,
    compile_policy, default_thresholds, policy_init, _upper_envelope,
)


def matrix_knowledge(s):
    return PolicyKnowledge.matrix_only(s.optimal_prices, s.prob_matrix)


class FixedUniforms:
    """Stand-in generator returning preset uniforms for tie-break draws."""

    def __init__(self, u):
        self.u = list(u)

    def random(self, n):
        out, self.u = self.u[:n], self.u[n:]
        return np.array(out)


class TestInit:
    def test_lrt_from_matrix_only(self, case1, rng):
        pol = policy_init(PolicySpec("lrt"), matrix_knowledge(case1), rng)
        assert pol.choose_price(1) in case1.optimal_prices

    @pytest.mark.parametrize("kind", ["xlrt", "exlrt", "mbp", "cmbp"])
    def test_curves_required(self, case1, rng, kind):
        with pytest.raises(KnowledgeError, match="full curves required"):
            policy_init(PolicySpec(kind), matrix_knowledge(case1), rng)

    def test_threshold_violation(self, case1, rng):
        th = default_thresholds(case1, kappa=0.5)
        bound = th.eta1 / 0.5
        with pytest.raises(ThresholdError, match="eta1"):
            policy_init(PolicySpec("xlrt", eta1=2 * bound), PolicyKnowledge.full_curves(case1), rng)
        with pytest.raises(ThresholdError, match="eta0"):
            policy_init(PolicySpec("xlrt", eta0=-0.1), PolicyKnowledge.full_curves(case1), rng)

    def test_two_model_kinds(self, n4, rng):
        with pytest.raises(ValueError):
            policy_init(PolicySpec("lrt"), matrix_knowledge(n4), rng)
        policy_init(PolicySpec("elrt"), matrix_knowledge(n4), rng)

    def test_cmbp_empty_feasible_set(self, rng):
        s = Scenario.build([DemandModel.linear(1.0, -0.5), DemandModel.linear(1.01, -0.5)], (0.5, 1.5))
        with pytest.raises(ValueError, match="delta"):
            policy_init(PolicySpec("cmbp", delta=0.05), PolicyKnowledge.full_curves(s), rng)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            PolicySpec("ucb")
        with pytest.raises(ValueError):
            PolicySpec("xlrt", kappa=1.0)
        with pytest.raises(ValueError):
            PolicySpec("mbp", q0=1.5)

    def test_first_step_uniform_over_arms(self, n4):
        for kind in ("elrt", "exlrt"):
            c = compile_policy(PolicySpec(kind), PolicyKnowledge.full_curves(n4))
            picks = [Policy(c, FixedUniforms([u, 0.0])).choose_price(1) for u in (0.1, 0.3, 0.6, 0.9)]
            assert picks == list(n4.optimal_prices)


class TestChoosePrice:
    def test_lrt_positive_statistic(self, case1):
        c = compile_policy(PolicySpec("lrt"), matrix_knowledge(case1))
        pol = Policy(c, FixedUniforms([0.0] * 4))
        pol.loglik = np.array([-0.2, 0.3])
        pol.t = 1
        assert pol.choose_price(2) == case1.optimal_prices[1]
        pol.loglik = np.array([0.3, -0.2])
        assert pol.choose_price(2) == case1.optimal_prices[0]

    def test_lrt_tie_coin(self, case1):
        c = compile_policy(PolicySpec("lrt"), matrix_knowledge(case1))
        pol = Policy(c, FixedUniforms([0.2, 0.0, 0.7, 0.0]))
        pol.t = 3
        assert pol.choose_price(4) == case1.optimal_prices[0]
        assert pol.choose_price(4) == case1.optimal_prices[1]

    def test_xlrt_bands(self, case1):
        c = compile_policy(PolicySpec("xlrt", eta0=0.02, eta1=0.02), PolicyKnowledge.full_curves(case1))
        px = float(c.prices[c.pair_x[0, 1]])
        assert px == 0.5
        pol = Policy(c, np.random.default_rng(0))
        pol.t = 10
        for stat, want in [(0.01, px), (-0.01, px), (0.02, px), (-0.02, px),
                           (0.03, case1.optimal_prices[1]), (-0.03, case1.optimal_prices[0]), (0.0, px)]:
            pol.loglik = np.array([0.0, stat * 10])
            assert pol.choose_price(11) == want, stat

    def test_elrt_tied_argmax(self, n4):
        c = compile_policy(PolicySpec("elrt"), matrix_knowledge(n4))
        pol = Policy(c, np.random.default_rng(5))
        pol.loglik = np.array([1.0, 2.5, 2.5, 0.0])
        pol.t = 5
        picks = [pol.choose_price(6) for _ in range(2000)]
        arms = {n4.optimal_prices[1], n4.optimal_prices[2]}
        assert set(picks) == arms
        share = picks.count(n4.optimal_prices[1]) / len(picks)
        assert abs(share - 0.5) < 0.05

    def test_exlrt_picks_top_two_pair(self, n4):
        c = compile_policy(PolicySpec("exlrt"), PolicyKnowledge.full_curves(n4))
        pol = Policy(c, np.random.default_rng(1))
        pol.t = 10
        pol.loglik = np.array([0.0, 1.0, 0.5, -3.0])
        stat = (1.0 - 0.5) / 10
        px = c.prices[c.pair_x[1, 2]]
        want = n4.optimal_prices[1] if stat > c.eta[1, 2] else px
        assert pol.choose_price(11) == want
        pol.loglik = np.array([0.0, 1.0 + 10 * c.eta[1, 2] + 1.0, 0.5, -3.0])
        assert pol.choose_price(11) == n4.optimal_prices[1]
        pol.loglik = np.array([0.0, 0.5, 0.5, -3.0])
        assert pol.choose_price(11) == c.prices[c.pair_x[1, 2]]

    def test_mbp_half_belief(self, case1, rng):
        # argmax of p (1.1 - 0.6 p) is 1.1 / 1.2
        pol = policy_init(PolicySpec("mbp", q0=0.5), PolicyKnowledge.full_curves(case1), rng)
        p = pol.choose_price(1)
        ps = np.linspace(0.5, 1.5, 4001)
        oracle = ps[np.argmax(ps * (1.1 - 0.6 * ps))]
        assert p == pytest.approx(oracle, abs=1e-12)
        assert p == pytest.approx(1.1 / 1.2, abs=1e-3)

    def test_oracle(self, case1, rng):
        for i in (0, 1):
            pol = policy_init(PolicySpec("oracle"), PolicyKnowledge.full_curves(case1), rng, true_index=i)
            assert {pol.choose_price(t) for t in range(1, 20)} == {case1.optimal_prices[i]}

    def test_belief_extremes(self, case1, rng):
        kn = PolicyKnowledge.full_curves(case1)
        for q, i in ((0.0, 0), (1.0, 1)):
            pol = policy_init(PolicySpec("mbp", q0=q), kn, rng)
            assert pol.choose_price(1) == case1.optimal_prices[i]


class TestObserve:
    def test_log_ratio_increment(self):
        s = Scenario.build([DemandModel.tabulated([(0, 0.3), (2, 0.3)]), DemandModel.tabulated([(0, 0.6), (2, 0.6)])], (0, 2))
        kn = PolicyKnowledge.matrix_only(s.optimal_prices, s.prob_matrix)
        pol = policy_init(PolicySpec("lrt"), kn, np.random.default_rng(0))
        pol.observe(s.optimal_prices[0], 1)
        assert pol.loglik[1] - pol.loglik[0] == pytest.approx(math.log(2), abs=1e-12)

    def test_unknown_price_matrix_only(self, case1, rng):
        pol = policy_init(PolicySpec("lrt"), matrix_knowledge(case1), rng)
        with pytest.raises(UnknownPriceError):
            pol.observe(1.0, 1)

    def test_off_table_price_with_curves(self, case1, rng):
        pol = policy_init(PolicySpec("lrt"), PolicyKnowledge.full_curves(case1), rng)
        pol.observe(0.9, 0)
        m0, m1 = case1.models
        assert pol.loglik[1] - pol.loglik[0] == pytest.approx(math.log((1 - m1(0.9)) / (1 - m0(0.9))))

    def test_belief_uninformative_price(self, rng):
        # curves crossing exactly at p = 1
        m0 = DemandModel.linear(1.0, -0.5)
        m1 = DemandModel.linear(0.75, -0.25)
        s = Scenario.build([m0, m1], (0.5, 1.5))
        pol = policy_init(PolicySpec("mbp", q0=0.37), PolicyKnowledge.full_curves(s), rng)
        assert m0(1.0) == m1(1.0)
        for y in (0, 1, 1, 0):
            pol.observe(1.0, y)
            assert pol.q == 0.37

    def test_belief_absorbing(self, case1, rng):
        pol = policy_init(PolicySpec("mbp", q0=1.0), PolicyKnowledge.full_curves(case1), rng)
        for y in (0, 1, 0):
            pol.observe(pol.choose_price(), y)
            assert pol.q == 1.0

    def test_belief_update_formula(self, case1, rng):
        pol = policy_init(PolicySpec("mbp", q0=0.5), PolicyKnowledge.full_curves(case1), rng)
        p = pol.choose_price()
        r0, r1 = case1.models[0](p), case1.models[1](p)
        pol.observe(p, 0)
        assert pol.q == pytest.approx(0.5 * (1 - r1) / (0.5 * (1 - r1) + 0.5 * (1 - r0)), rel=1e-14)

    def test_bad_outcome(self, case1, rng):
        pol = policy_init(PolicySpec("lrt"), matrix_knowledge(case1), rng)
        with pytest.raises(ValueError):
            pol.observe(case1.optimal_prices[0], 2)


class TestThresholds:
    def test_case1_default(self, case1):
        th = default_thresholds(case1, kappa=0.5)
        # mpmath: min KL over {p1*, p_x = 0.5, p0*}, halved
        assert th.eta1 == pytest.approx(0.019802792488110134, rel=1e-6)
        assert th.eta0 == pytest.approx(0.018799465764724818, rel=1e-6)
        terms = [kl_bernoulli(m1, m0) for m0, m1 in [(0.2, 0.4), (0.95, 0.65), (0.7, 17 / 30)]]
        assert th.eta1 == pytest.approx(0.5 * min(terms), rel=1e-6)

    def test_small_kappa_limit(self, case1):
        th = default_thresholds(case1, kappa=1e-9)
        assert th.eta0 < 1e-10 and th.eta1 < 1e-10

    def test_identical_models_rejected(self):
        m = DemandModel.linear(1.0, -0.5)
        with pytest.raises(ValueError):
            default_thresholds(Scenario.build([m, m], (0.5, 1.5)))

    def test_pair_thresholds_n4(self, n4):
        th = default_thresholds(n4, kappa=0.5)
        assert th.eta0 is None
        off = ~np.eye(4, dtype=bool)
        assert np.all(th.eta_pair[off] > 0)


class TestInvariants:
    def test_unnormalized_sums_reproduce_recursive_average(self, case1):
        rng = np.random.default_rng(11)
        kn = matrix_knowledge(case1)
        pol = policy_init(PolicySpec("lrt"), kn, rng)
        L = 0.0
        m0, m1 = case1.prob_matrix[0], case1.prob_matrix[1]
        for t in range(1, 10_001):
            k = int(rng.integers(2))
            y = int(rng.integers(2))
            pol.observe(case1.optimal_prices[k], y)
            f1 = m1[k] if y else 1 - m1[k]
            f0 = m0[k] if y else 1 - m0[k]
            L = ((t - 1) * L + math.log(f1 / f0)) / t
        assert abs(pol.statistic(1, 0) - L) <= 1e-12

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.floats(-50, 50), min_size=4, max_size=4), st.integers(2, 500))
    def test_elrt_matches_pairwise_condition(self, lam, t):
        lam = np.array(lam)
        arm = np.arange(4)
        k = kernels.select_likelihood(kernels.RULE_ARGMAX, lam, t, arm, np.full((4, 4), -1), np.zeros((4, 4)), -1, 0.3, 0.6)
        if np.sum(lam == lam.max()) == 1:
            winners = [i for i in range(4) if all((lam[i] - lam[j]) / (t - 1) > 0 for j in range(4) if j != i)]
            assert winners == [k]

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.integers(-40, 40), min_size=4, max_size=4), st.integers(-1000, 1000), st.integers(2, 100), st.floats(0, 0.999), st.floats(0, 0.999))
    def test_shift_invariance(self, lam, shift, t, u0, u1):
        # integer sums keep every difference exact after the shift
        lam = np.array(lam, dtype=float)
        eta = np.full((4, 4), 0.25)
        pair = np.arange(16).reshape(4, 4) + 4
        arm = np.arange(4)
        for rule in (kernels.RULE_ARGMAX, kernels.RULE_TOPTWO):
            a = kernels.select_likelihood(rule, lam, t, arm, pair, eta, -1, u0, u1)
            b = kernels.select_likelihood(rule, lam + shift, t, arm, pair, eta, -1, u0, u1)
            assert a == b

    def test_pick_tied_uniform(self):
        vals = np.array([1.0, 3.0, 3.0, 3.0, 0.0])
        counts = np.bincount([kernels.pick_tied(vals, -1, u) for u in np.linspace(0, 0.9999, 3000)], minlength=5)
        assert counts[0] == counts[4] == 0
        assert np.ptp(counts[1:4]) <= 1
        assert kernels.pick_tied(vals, 2, 0.0) == 1
        assert kernels.pick_tied(vals, 2, 0.99) == 3

    def test_envelope_matches_brute_force(self, case1, case2):
        rng = np.random.default_rng(2)
        for s in (case1, case2):
            for kind in ("mbp", "cmbp"):
                c = compile_policy(PolicySpec(kind), PolicyKnowledge.full_curves(s))
                r0 = c.prices * c.rho[0]
                r1 = c.prices * c.rho[1]
                for q in np.concatenate([rng.uniform(0, 1, 500), [0.0, 1.0, 0.5, 1e-12, 1 - 1e-12]]):
                    brute = int(np.argmax(q * r1 + (1 - q) * r0))
                    got = kernels.select_belief(q, *c.hull)
                    vals = q * r1 + (1 - q) * r0
                    assert got == brute or vals[got] == vals[brute]

    def test_envelope_random_lines(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            m = rng.normal(size=40)
            b = rng.normal(size=40)
            idx, hm, hb, br = _upper_envelope(m, b)
            assert np.all(np.diff(br) > 0)
            for q in rng.uniform(0, 1, 50):
                j = kernels.select_belief(q, idx, hm, hb, br)
                assert b[j] + q * m[j] == pytest.approx(np.max(b + q * m), abs=1e-12)

    def test_cmbp_discriminative(self, case1):
        c = compile_policy(PolicySpec("cmbp", delta=0.05), PolicyKnowledge.full_curves(case1))
        assert np.all(np.abs(c.rho[0] - c.rho[1]) > 0.05)

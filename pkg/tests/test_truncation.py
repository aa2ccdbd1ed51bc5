import numpy as np
import pytest

from sensbn import compiler, oracle
from sensbn.engine import QuerySession
from sensbn.errors import ApproxPreconditionError
from sensbn.generators import binary_chain_network, binary_chain_tree
from sensbn.model import Evidence
from sensbn.truncation import (
    DecayProfile,
    hop_distances,
    plan_truncation,
    truncated_query,
    truncation_radius,
    verify_profile,
)


def chain(seed, length=30, alpha=0.9, coupling_lo=0.05):
    rng = np.random.default_rng(seed)
    return binary_chain_tree(rng, length, alpha=alpha, coupling_lo=coupling_lo)


class TestDecayProfile:
    def test_rejects_bad_constants(self):
        with pytest.raises(ApproxPreconditionError):
            DecayProfile(1.0, 0.09, 0.1)
        with pytest.raises(ApproxPreconditionError):
            DecayProfile(0.9, 0.3, 0.1)
        with pytest.raises(ApproxPreconditionError):
            DecayProfile(0.9, 0.09, 1.5)

    def test_bound_value(self):
        assert DecayProfile(0.9, 0.09, 0.1).guaranteed_bound == pytest.approx(
            np.exp(0.1) - 1.0
        )


class TestVerifyProfile:
    def test_mild_chain_passes(self):
        tree = chain(1, length=10)
        ok, witness = verify_profile(tree, DecayProfile(0.9, 0.09, 0.1))
        assert ok and witness is None

    def test_deterministic_edge_is_witnessed(self):
        from sensbn.algebra import QRFactors
        from sensbn.model import Distribution, StateSpace

        rt2 = np.sqrt(2.0)
        unit = np.array([[-1 / rt2, 1 / rt2]])
        tree = compiler.accept_precompiled(
            [StateSpace.binary(("a",)), StateSpace.binary(("b",))],
            [Distribution(np.array([0.5, 0.5])), Distribution(np.array([0.5, 0.5]))],
            {(1, 0): QRFactors(unit, 1.0 * unit)},
        )
        ok, witness = verify_profile(tree, DecayProfile(0.9, 0.2, 0.1))
        assert not ok
        assert "coupling" in witness

    def test_eta_violation_is_witnessed(self):
        tree = chain(2, length=5)
        ok, witness = verify_profile(tree, DecayProfile(0.95, 0.2499, 0.1))
        assert not ok
        assert "eta" in witness

    def test_non_binary_tree_is_rejected(self, asia_tables):
        with pytest.raises(ApproxPreconditionError, match="X_3"):
            verify_profile(asia_tables, DecayProfile(0.9, 0.09, 0.1))


class TestPlanTruncation:
    def test_locked_radius_values(self):
        # evaluated from ceil(log_alpha(eta * eps / (2 n))) and locked
        assert truncation_radius(DecayProfile(0.9, 0.09, 0.1), 1) == 52
        assert truncation_radius(DecayProfile(0.9, 0.09, 0.1), 4) == 65
        assert truncation_radius(DecayProfile(0.5, 0.25, 0.999), 1) == 4

    def test_no_evidence_needs_no_radius(self):
        assert truncation_radius(DecayProfile(0.9, 0.09, 0.1), 0) == 0

    def test_radius_grows_with_evidence_count(self):
        profile = DecayProfile(0.9, 0.09, 0.1)
        radii = [truncation_radius(profile, n) for n in (1, 2, 4, 8)]
        assert radii == sorted(radii)
        assert radii[2] > radii[0]

    def test_radius_grows_as_epsilon_shrinks(self):
        radii = [
            truncation_radius(DecayProfile(0.9, 0.09, e), 2)
            for e in (0.5, 0.2, 0.1, 0.05)
        ]
        assert radii == sorted(radii)

    def test_retained_selection(self):
        plan = plan_truncation(
            DecayProfile(0.9, 0.09, 0.1), {3: 2, 7: 60}, radius=10
        )
        assert plan.retained_evidence == (3,)
        assert plan.radius == 10


class TestTruncatedQuery:
    def test_radius_at_least_diameter_is_bitwise_exact(self):
        tree = chain(3, length=20)
        ev = Evidence.of({"v3": 1, "v17": 0})
        profile = DecayProfile(0.9, 0.09, 0.1)
        exact = QuerySession(tree).query(10, ev)
        approx, bound, plan = truncated_query(
            QuerySession(tree), 10, ev, profile, radius=19, verified=True
        )
        assert plan.retained_evidence == (3, 17)
        assert np.array_equal(approx.probs, exact.probs)
        assert bound == pytest.approx(np.exp(0.1) - 1.0)

    def test_bound_holds_with_real_truncation_error(self):
        profile = DecayProfile(0.9, 0.09, 0.1)
        violations = 0
        exercised = 0
        for trial in range(60):
            rng = np.random.default_rng([41, trial])
            tree = binary_chain_tree(rng, 200, alpha=0.9, coupling_lo=0.8)
            ev_rng = np.random.default_rng([42, trial])
            query = 100
            # one retained side, one side just beyond the radius
            left = query - int(ev_rng.integers(2, 10))
            right = query + int(ev_rng.integers(60, 90))
            ev = Evidence.of(
                {
                    f"v{left}": int(ev_rng.integers(0, 2)),
                    f"v{right}": int(ev_rng.integers(0, 2)),
                }
            )
            exact = QuerySession(tree).query(query, ev).probs
            approx, bound, plan = truncated_query(
                QuerySession(tree), query, ev, profile, verified=True
            )
            mask = exact >= profile.eta
            if not mask.any():
                continue
            rel = float(np.max(np.abs(approx.probs[mask] - exact[mask]) / exact[mask]))
            if rel > 0:
                exercised += 1
            if rel > bound:
                violations += 1
        assert violations == 0
        assert exercised > 0

    def test_work_is_radius_bounded(self):
        profile = DecayProfile(0.9, 0.09, 0.1)
        radius = 20
        touched = []
        for length in (50, 200, 800):
            rng = np.random.default_rng(7)
            tree = binary_chain_tree(rng, length)
            ev = Evidence.of({"v2": 1, "v11": 0, f"v{length - 1}": 1})
            session = QuerySession(tree)
            truncated_query(session, 5, ev, profile, radius=radius, verified=True)
            in_ball = len(hop_distances(tree, 5, limit=radius))
            assert len(session.instr.touched) <= len(ev) * in_ball
            touched.append(len(session.instr.touched))
        assert touched[0] == touched[1] == touched[2]

    def test_matches_exact_engine_against_oracle_chain(self):
        # same chain parameters through the network and the tree builders
        rng_net = np.random.default_rng(9)
        rng_tree = np.random.default_rng(9)
        net = binary_chain_network(rng_net, 10)
        tree = binary_chain_tree(rng_tree, 10)
        ev = Evidence.of({"v1": 1, "v8": 0})
        for query in range(10):
            want = oracle.posterior(net, ev, f"v{query}").probs
            got = QuerySession(tree).query(query, ev).probs
            assert np.abs(got - want).max() <= 1e-9


class TestHopDistances:
    def test_limited_search_stops_at_radius(self):
        tree = chain(5, length=40)
        dist = hop_distances(tree, 0, limit=7)
        assert max(dist.values()) == 7
        assert len(dist) == 8

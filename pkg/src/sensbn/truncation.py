"""Bounded-error approximate inference on binary trees.

On a tree of binary nodes whose edge couplings all have magnitude below
some alpha < 1, influence decays geometrically with hop distance, because
chained couplings multiply.  Evidence farther from the query than a
radius derived from (alpha, eta, epsilon) can therefore be ignored while
keeping the relative error of the answer below exp(epsilon) - 1 on states
whose exact probability is at least eta.

The radius comes from the complexity expression of the underlying claim:

    radius = ceil( log_alpha( eta * epsilon / (2 * n_evidence) ) )

This module certifies the bound empirically against the exact engine; it
does not carry a proof.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .engine import QuerySession
from .errors import ApproxPreconditionError
from .model import Evidence, TreeNetwork


@dataclass(frozen=True)
class DecayProfile:
    """Claimed decay constants: |coupling| < alpha on every edge and
    p(false)p(true) > eta at every node, with requested error epsilon."""

    alpha: float
    eta: float
    epsilon: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ApproxPreconditionError(f"alpha must be in (0, 1), got {self.alpha}")
        if not 0.0 < self.eta <= 0.25:
            raise ApproxPreconditionError(f"eta must be in (0, 0.25], got {self.eta}")
        if not 0.0 < self.epsilon < 1.0:
            raise ApproxPreconditionError(f"epsilon must be in (0, 1), got {self.epsilon}")

    @property
    def guaranteed_bound(self) -> float:
        return math.exp(self.epsilon) - 1.0


@dataclass(frozen=True)
class TruncationPlan:
    radius: int
    retained_evidence: tuple[int, ...]
    guaranteed_bound: float


def verify_profile(tree: TreeNetwork, profile: DecayProfile):
    """Check the profile against the actual tree.

    Returns (True, None) when every edge coupling is strictly below alpha
    in magnitude and every node satisfies p(false)p(true) > eta; otherwise
    (False, witness) naming the offending edge or node.  Trees with any
    non-binary node are rejected outright.
    """
    from . import compiler

    for comp in tree.compounds:
        if comp.space.cardinality != 2:
            raise ApproxPreconditionError(
                f"{comp.name} has {comp.space.cardinality} states; "
                "the decay argument needs an all-binary tree"
            )
    for comp in tree.compounds:
        product = float(comp.prior.probs[0] * comp.prior.probs[1])
        if not product > profile.eta:
            return False, f"node {comp.name}: p(false)p(true) = {product:.4g} <= eta"
    for a, b in tree.edges:
        dense = compiler.reconstruct_dense(tree, a, b)
        value = abs(float(dense[1, 1] - dense[1, 0]))
        if not value < profile.alpha:
            return (
                False,
                f"edge {tree.compound(a).name} - {tree.compound(b).name}: "
                f"|coupling| = {value:.4g} >= alpha",
            )
    return True, None


def truncation_radius(profile: DecayProfile, n_evidence: int) -> int:
    """Hop count beyond which evidence is dropped."""
    if n_evidence <= 0:
        return 0
    arg = profile.eta * profile.epsilon / (2.0 * n_evidence)
    return int(math.ceil(math.log(arg) / math.log(profile.alpha)))


def plan_truncation(
    profile: DecayProfile,
    evidence_distances: dict[int, int],
    radius: int | None = None,
) -> TruncationPlan:
    """Select the evidence within the truncation radius of the query.

    ``evidence_distances`` maps instantiated node to hop distance from
    the query node; ``radius`` overrides the derived value (benchmarks
    use this to hold the work region fixed).
    """
    if radius is None:
        radius = truncation_radius(profile, len(evidence_distances))
    retained = tuple(sorted(n for n, d in evidence_distances.items() if d <= radius))
    return TruncationPlan(radius, retained, profile.guaranteed_bound)


def hop_distances(tree: TreeNetwork, start: int, limit: int | None = None) -> dict[int, int]:
    """Breadth-first hop distances from ``start``, stopping at ``limit``."""
    dist = {start: 0}
    frontier = [start]
    while frontier:
        nxt: list[int] = []
        for node in frontier:
            d = dist[node]
            if limit is not None and d >= limit:
                continue
            for nb in tree.neighbors(node):
                if nb not in dist:
                    dist[nb] = d + 1
                    nxt.append(nb)
        frontier = nxt
    return dist


def truncated_query(
    session: QuerySession,
    query: int,
    evidence: Evidence,
    profile: DecayProfile,
    radius: int | None = None,
    verified: bool = False,
):
    """Approximate posterior using only the evidence within the radius.

    Returns (Distribution, guaranteed_bound, TruncationPlan).  The bound
    is exp(epsilon) - 1 on the relative error of any state whose exact
    probability is at least eta.
    """
    tree = session.tree
    if not verified:
        ok, witness = verify_profile(tree, profile)
        if not ok:
            raise ApproxPreconditionError(f"decay profile does not hold: {witness}")
    grouped = tree.group_evidence(evidence)
    if radius is None:
        radius = truncation_radius(profile, len(grouped))
    reachable = hop_distances(tree, query, limit=radius)
    distances = {n: reachable.get(n, radius + 1) for n in grouped}
    plan = plan_truncation(profile, distances, radius=radius)
    within = set(reachable)
    posterior = session.query(query, evidence, within=within)
    return posterior, plan.guaranteed_bound, plan

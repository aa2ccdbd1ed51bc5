"""Convert a DAG belief network into a tree of compound nodes.

The plan step chooses a *partition* of the simple nodes into clusters and
a tree over the clusters such that collapsing the moralized graph by the
partition yields (a subgraph of) that tree.  Equivalently: every family
{child} ∪ parents lies inside one cluster or inside the union of two
adjacent clusters.  Separation in the collapsed moral graph implies the
conditional independences the tree factorization needs, so inference on
the compiled tree is exact.

The compile step fills in priors and pairwise couplings from the
enumeration oracle, prunes zero-probability compound states, and stores
one mutually consistent factor pair per edge.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import algebra, oracle
from .algebra import QRFactors
from .errors import (
    ConsistencyError,
    DimensionMismatchError,
    NetworkValidationError,
    UnknownLabelError,
)
from .model import (
    BeliefNetwork,
    CompoundNode,
    Distribution,
    StateSpace,
    TreeNetwork,
    Violation,
    validate_network,
)

#: compound states whose oracle prior is at or below this are discarded
PRUNE_EPS = 1e-12

CONSISTENCY_TOL = 1e-9


def moralize(net: BeliefNetwork) -> dict[str, set[str]]:
    """Undirected adjacency: DAG edges plus marriages between co-parents."""
    adj: dict[str, set[str]] = {l: set() for l in net.labels}
    for child in net.labels:
        parents = net.parents[child]
        for p in parents:
            adj[child].add(p)
            adj[p].add(child)
        for i in range(len(parents)):
            for j in range(i + 1, len(parents)):
                adj[parents[i]].add(parents[j])
                adj[parents[j]].add(parents[i])
    return adj


@dataclass(frozen=True)
class ClusterPlan:
    """A partition of the simple nodes plus a tree over the clusters."""

    clusters: tuple[tuple[str, ...], ...]
    tree_edges: tuple[tuple[int, int], ...]


def plan_violations(plan: ClusterPlan, net: BeliefNetwork) -> list[Violation]:
    """Check the plan invariants; empty list means the plan is usable."""
    out: list[Violation] = []
    seen: dict[str, int] = {}
    for ci, cluster in enumerate(plan.clusters):
        for label in cluster:
            if label in seen:
                out.append(Violation("overlap", label, "member of two clusters"))
            seen[label] = ci
    missing = [l for l in net.labels if l not in seen]
    if missing:
        out.append(Violation("coverage", ",".join(missing), "not in any cluster"))
        return out
    n = len(plan.clusters)
    nb: dict[int, set[int]] = {i: set() for i in range(n)}
    if len(plan.tree_edges) != n - 1:
        out.append(Violation("tree", "plan", f"{len(plan.tree_edges)} edges for {n} clusters"))
    adjacent = set()
    for a, b in plan.tree_edges:
        nb[a].add(b)
        nb[b].add(a)
        adjacent.add(frozenset((a, b)))
    if n:
        stack, reached = [0], {0}
        while stack:
            for x in nb[stack.pop()]:
                if x not in reached:
                    reached.add(x)
                    stack.append(x)
        if len(reached) != n:
            out.append(Violation("tree", "plan", "cluster tree is not connected"))
    for child in net.labels:
        family = {child, *net.parents[child]}
        homes = {seen[m] for m in family}
        if len(homes) == 1:
            continue
        if len(homes) == 2 and frozenset(homes) in adjacent:
            continue
        out.append(
            Violation(
                "family",
                child,
                f"family {sorted(family)} spans non-adjacent clusters {sorted(homes)}",
            )
        )
    return out


def _log_cluster_size(cluster: tuple[str, ...], net: BeliefNetwork) -> float:
    return sum(math.log(net.card(m)) for m in cluster)


def plan_clusters(
    moral: dict[str, set[str]],
    net: BeliefNetwork,
    forced_groups: tuple[tuple[str, ...], ...] = (),
) -> ClusterPlan:
    """Partition the simple nodes so the collapsed moral graph is a tree.

    Starts from singletons (honoring any forced groupings), then merges
    adjacent clusters along cycles of the collapsed graph until it is
    acyclic, always preferring the merge with the smallest resulting
    state space.  Deterministic for a fixed input.
    """
    labels = list(net.labels)
    cluster_of = {l: i for i, l in enumerate(labels)}
    members: dict[int, list[str]] = {i: [l] for i, l in enumerate(labels)}
    for group in forced_groups:
        group = tuple(group)
        for l in group:
            if l not in cluster_of:
                raise UnknownLabelError(f"forced group names unknown node {l!r}")
        target = cluster_of[group[0]]
        for l in group[1:]:
            _merge(cluster_of, members, target, cluster_of[l])

    def quotient_edges() -> dict[int, set[int]]:
        q: dict[int, set[int]] = {c: set() for c in members}
        for a, nbs in moral.items():
            for b in nbs:
                ca, cb = cluster_of[a], cluster_of[b]
                if ca != cb:
                    q[ca].add(cb)
                    q[cb].add(ca)
        return q

    while True:
        q = quotient_edges()
        cycle = _find_cycle(q)
        if cycle is None:
            break
        best = None
        for k in range(len(cycle)):
            a, b = cycle[k], cycle[(k + 1) % len(cycle)]
            size = _log_cluster_size(tuple(members[a] + members[b]), net)
            key = (size, min(a, b), max(a, b))
            if best is None or key < best:
                best = key
        _, a, b = best
        _merge(cluster_of, members, a, b)

    # stable cluster order: by first-declared member
    decl = {l: i for i, l in enumerate(labels)}
    order = sorted(members, key=lambda c: min(decl[m] for m in members[c]))
    renumber = {c: i for i, c in enumerate(order)}
    clusters = tuple(
        tuple(sorted(members[c], key=decl.get)) for c in order
    )
    q = quotient_edges()
    edges = sorted(
        {(min(renumber[a], renumber[b]), max(renumber[a], renumber[b]))
         for a in q for b in q[a]}
    )
    # connect any independent components through their lowest-index clusters
    nb: dict[int, set[int]] = {i: set() for i in range(len(clusters))}
    for a, b in edges:
        nb[a].add(b)
        nb[b].add(a)
    root_comp, reached = [], set()
    for i in range(len(clusters)):
        if i in reached:
            continue
        root_comp.append(i)
        stack = [i]
        reached.add(i)
        while stack:
            for x in nb[stack.pop()]:
                if x not in reached:
                    reached.add(x)
                    stack.append(x)
    for extra in root_comp[1:]:
        edges.append((root_comp[0], extra))
    return ClusterPlan(clusters, tuple(sorted(edges)))


def _merge(cluster_of, members, keep, drop):
    if keep == drop:
        return
    for l in members[drop]:
        cluster_of[l] = keep
    members[keep].extend(members[drop])
    del members[drop]


def _find_cycle(adj: dict[int, set[int]]):
    """Return the vertices of one cycle of a simple graph, or None."""
    color: dict[int, int] = {}
    parent: dict[int, int | None] = {}
    for start in sorted(adj):
        if start in color:
            continue
        stack = [(start, None)]
        parent[start] = None
        while stack:
            node, from_ = stack.pop()
            if node in color:
                continue
            color[node] = 1
            parent[node] = from_
            for nxt in sorted(adj[node]):
                if nxt == from_:
                    continue
                if nxt in color:
                    # walk both endpoints up to their common ancestor
                    path_a = []
                    x = node
                    while x is not None:
                        path_a.append(x)
                        x = parent[x]
                    cycle = [nxt]
                    x = nxt
                    seen_a = {v: k for k, v in enumerate(path_a)}
                    while x not in seen_a:
                        x = parent[x]
                        cycle.append(x)
                    return path_a[: seen_a[cycle[-1]]] + list(reversed(cycle[:-1]))
                stack.append((nxt, node))
    return None


@dataclass(frozen=True)
class EdgeReport:
    """Size accounting for one compiled edge."""

    child: str
    parent: str
    dense_shape: tuple[int, int]
    rank: int

    @property
    def dense_count(self) -> int:
        return self.dense_shape[0] * self.dense_shape[1]

    @property
    def qr_count(self) -> int:
        return (self.dense_shape[0] + self.dense_shape[1]) * self.rank

    @property
    def compression(self) -> float:
        return self.dense_count / self.qr_count if self.qr_count else float("inf")


@dataclass(frozen=True)
class CompileReport:
    edges: tuple[EdgeReport, ...]
    pruned: tuple[tuple[str, tuple[int, ...]], ...]

    def format(self) -> str:
        lines = ["edge          dense        rank  qr-size  ratio"]
        for e in self.edges:
            dense = f"{e.dense_shape[0]}x{e.dense_shape[1]}"
            ratio = "inf" if not e.qr_count else f"{e.compression:.2f}"
            lines.append(
                f"{e.child} | {e.parent:<6} {dense:<12} {e.rank:<5} {e.qr_count:<8} {ratio}"
            )
        for name, states in self.pruned:
            lines.append(f"pruned {name}: original states {' '.join(map(str, states))}")
        if not self.pruned:
            lines.append("pruned: none")
        return "\n".join(lines)


def _derived_reverse_factor(factors: QRFactors, p_i: np.ndarray) -> np.ndarray:
    """R factor of the flipped coupling: Q_ij diag(p_i)^{-1} (I - E/n_i)."""
    inv_i = algebra.inverse_weights(p_i)
    return algebra.center_rows(factors.q * inv_i[None, :])


def compile_network(
    net: BeliefNetwork,
    plan: ClusterPlan | None = None,
    forced_groups: tuple[tuple[str, ...], ...] = (),
    rank_tol: float = algebra.RANK_TOL,
    name: str | None = None,
) -> tuple[TreeNetwork, CompileReport]:
    """Build the compound tree: oracle priors, pruning, factored couplings.

    Compound nodes are named X_1.. in order of their first-declared member;
    each edge is authored in the direction child = node farther from X_1.
    """
    problems = validate_network(net)
    if problems:
        raise NetworkValidationError("; ".join(map(str, problems)))
    if plan is None:
        plan = plan_clusters(moralize(net), net, forced_groups)
    bad = plan_violations(plan, net)
    if bad:
        raise NetworkValidationError("invalid plan: " + "; ".join(map(str, bad)))

    jt = oracle.joint(net)
    compounds: list[CompoundNode] = []
    pruned_record: list[tuple[str, tuple[int, ...]]] = []
    for idx, cluster in enumerate(plan.clusters):
        cards = tuple(net.card(m) for m in cluster)
        full = oracle.marginal(jt, cluster).reshape(-1)
        pruned = tuple(int(i) for i in np.nonzero(full <= PRUNE_EPS)[0])
        space = StateSpace(cluster, cards, pruned)
        prior = Distribution.normalized(full[list(space.retained)])
        name_i = f"X_{idx + 1}"
        compounds.append(CompoundNode(idx, name_i, space, prior))
        if pruned:
            pruned_record.append((name_i, pruned))

    # orient every edge away from the first compound node
    nb: dict[int, list[int]] = {c.ident: [] for c in compounds}
    for a, b in plan.tree_edges:
        nb[a].append(b)
        nb[b].append(a)
    parent_of: dict[int, int | None] = {0: None}
    frontier = [0]
    order: list[int] = []
    while frontier:
        node = frontier.pop(0)
        order.append(node)
        for nxt in sorted(nb[node]):
            if nxt not in parent_of:
                parent_of[nxt] = node
                frontier.append(nxt)

    edges: list[tuple[int, int]] = []
    factors: dict[tuple[int, int], np.ndarray] = {}
    reports: list[EdgeReport] = []
    for child_id in order[1:]:
        parent_id = parent_of[child_id]
        child, parent = compounds[child_id], compounds[parent_id]
        cond = oracle.pairwise_conditional(net, child.space, parent.space)
        sens = algebra.cpt_to_sensitivity(cond)
        pair = algebra.qr_factor(sens, rank_tol)
        factors[(child_id, parent_id)] = pair.r_mat
        factors[(parent_id, child_id)] = _derived_reverse_factor(pair, child.prior.probs)
        edges.append((child_id, parent_id))
        reports.append(
            EdgeReport(child.name, parent.name, sens.shape, pair.rank)
        )

    tree = TreeNetwork(tuple(compounds), tuple(edges), factors, name=name or net.name)
    check_tree_consistency(tree)
    return tree, CompileReport(tuple(reports), tuple(pruned_record))


def accept_precompiled(
    spaces: list[StateSpace],
    priors: list[Distribution],
    edge_factors: dict[tuple[int, int], QRFactors],
    names: list[str] | None = None,
    name: str = "tree",
) -> TreeNetwork:
    """Build a TreeNetwork directly from per-edge factor pairs.

    ``edge_factors[(i, j)]`` is the coupling of node i with respect to
    node j.  The opposite-direction stored factor is derived from Q and
    the prior of node i, and factor rows are re-centered so the zero-sum
    invariant survives rounded input (e.g. four-digit published tables).
    """
    if len(spaces) != len(priors):
        raise DimensionMismatchError("one prior per compound node is required")
    compounds = tuple(
        CompoundNode(i, names[i] if names else f"X_{i + 1}", sp, pr)
        for i, (sp, pr) in enumerate(zip(spaces, priors))
    )
    stored: dict[tuple[int, int], np.ndarray] = {}
    edges: list[tuple[int, int]] = []
    for (i, j), pair in edge_factors.items():
        ni = compounds[i].space.cardinality
        nj = compounds[j].space.cardinality
        if pair.q.shape[1] != ni or pair.r_mat.shape[1] != nj:
            raise DimensionMismatchError(
                f"edge ({i},{j}): factor shapes {pair.q.shape}x{pair.r_mat.shape} "
                f"do not match cardinalities {ni}, {nj}"
            )
        centered = QRFactors(algebra.center_rows(pair.q), algebra.center_rows(pair.r_mat))
        stored[(i, j)] = centered.r_mat
        stored[(j, i)] = _derived_reverse_factor(centered, compounds[i].prior.probs)
        edges.append((i, j))
    tree = TreeNetwork(compounds, tuple(edges), stored, name=name)
    check_tree_consistency(tree)
    return tree


def reconstruct_dense(tree: TreeNetwork, i: int, j: int) -> np.ndarray:
    """Dense coupling of node i with respect to adjacent node j, from the
    stored factors and the priors."""
    r_ij = tree.r_factors[(i, j)]
    r_ji = tree.r_factors[(j, i)]
    q_ij = r_ji @ algebra.weight_matrix(tree.compound(i).prior.probs)
    return q_ij.T @ r_ij


def check_tree_consistency(tree: TreeNetwork, tol: float = CONSISTENCY_TOL) -> None:
    """Verify that the two stored factors of every edge agree.

    Reconstructs the dense coupling in both directions and requires each
    to be the marginal-weighted reversal of the other, within ``tol``.
    """
    for a, b in tree.edges:
        s_ab = reconstruct_dense(tree, a, b)
        s_ba = reconstruct_dense(tree, b, a)
        p_a = tree.compound(a).prior.probs
        p_b = tree.compound(b).prior.probs
        err = float(np.abs(s_ba - algebra.reverse_dense(s_ab, p_a, p_b)).max(initial=0.0))
        err = max(
            err,
            float(np.abs(s_ab - algebra.reverse_dense(s_ba, p_b, p_a)).max(initial=0.0)),
        )
        scale = max(1.0, float(np.abs(s_ab).max(initial=0.0)))
        if err > tol * scale:
            na, nbm = tree.compound(a).name, tree.compound(b).name
            raise ConsistencyError(
                f"edge {na} - {nbm}: stored factors disagree by {err:.3g}"
            )

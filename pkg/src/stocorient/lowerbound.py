"""The adaptivity-gap lower-bound family: tree, structure checks, line embedding.

The instance is a complete binary tree of height L.  Leaves sit at level 1,
the root at level L.  Every vertex carries a Bernoulli job: size 0 with
probability 1-p and a positive size s_v with probability p, where
p = 1/sqrt(L) held exactly as a quadratic irrational.  Rewards decay by a
(1-p) factor per right branch.  Sizes follow the doubly-exponential
recurrence (multiply by 2^(2^level) going right, divide going left), the
budget is B = 2^(2^(L+1)), and edge lengths are chosen so that the reference
adaptive policy ("left on zero, right otherwise") never runs out of budget.

Everything here is integer / exact-scalar arithmetic; the structural checks
are equalities and inequalities with zero tolerance.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .core import Instance, JobDist
from .numerics import SqrtRational

MAX_LEVELS = 12  # 2^12-1 nodes, budgets of 2^(2^13); beyond this is not desk scale


class ConstructionError(ValueError):
    pass


@dataclass
class TreeNode:
    id: int
    level: int
    side: str  # "root" | "left" | "right"
    parent: Optional[int]
    size: int
    reward: object  # exact scalar (1-p)^tau
    budget: int  # residual budget of the reference adaptive policy at this node
    edge_len: int  # length of the edge to the parent (0 for the root)
    tau: int  # number of right branches on the root path
    left: Optional[int] = None
    right: Optional[int] = None


@dataclass
class LBTree:
    levels: int
    budget: int
    p: object  # exact success probability 1/sqrt(L)
    nodes: list = field(default_factory=list)

    @property
    def root(self) -> TreeNode:
        return self.nodes[0]

    def node(self, v: int) -> TreeNode:
        return self.nodes[v]

    def children(self, v: int) -> list:
        n = self.nodes[v]
        return [c for c in (n.left, n.right) if c is not None]

    def root_path(self, v: int) -> list:
        """Node ids from the root down to v, inclusive."""
        path = []
        w: Optional[int] = v
        while w is not None:
            path.append(w)
            w = self.nodes[w].parent
        return path[::-1]

    def dist_to_root(self, v: int) -> int:
        return sum(self.nodes[w].edge_len for w in self.root_path(v))

    def tree_dist(self, u: int, v: int) -> int:
        pu, pv = self.root_path(u), self.root_path(v)
        k = 0
        while k < len(pu) and k < len(pv) and pu[k] == pv[k]:
            k += 1
        return sum(self.nodes[w].edge_len for w in pu[k:]) + sum(
            self.nodes[w].edge_len for w in pv[k:]
        )

    def travel_to(self, v: int) -> int:
        """Distance traveled by the reference adaptive policy to reach v."""
        return self.dist_to_root(v)

    def instantiated_before(self, v: int) -> int:
        """Total size the reference policy has seen before v (right-branch parents)."""
        total = 0
        path = self.root_path(v)
        for parent, child in zip(path, path[1:]):
            if self.nodes[child].side == "right":
                total += self.nodes[parent].size
        return total


def build_tree(levels: int) -> LBTree:
    """Deterministic construction of the height-`levels` lower-bound tree."""
    if not (1 <= levels <= MAX_LEVELS):
        raise ConstructionError(f"levels must be in 1..{MAX_LEVELS}")
    L = levels
    budget = 1 << (1 << (L + 1))  # 2^(2^(L+1))
    p = SqrtRational(0, Fraction(1, L), L)  # sqrt(L)/L == 1/sqrt(L), exact
    one_minus_p = 1 - p

    tree = LBTree(levels=L, budget=budget, p=p)
    root = TreeNode(
        id=0,
        level=L,
        side="root",
        parent=None,
        size=1 << (1 << L),  # 2^(2^L)
        reward=one_minus_p ** 0,
        budget=budget,
        edge_len=0,
        tau=0,
    )
    tree.nodes.append(root)

    frontier = [root]
    while frontier:
        nxt = []
        for u in frontier:
            if u.level == 1:
                continue
            child_level = u.level - 1
            shift = 1 << child_level  # size ratio exponent 2^(2^child_level)
            for side in ("left", "right"):
                if side == "right":
                    size = u.size << shift
                    budget_v = u.budget - u.size
                    edge = 0
                    tau = u.tau + 1
                else:
                    size = u.size >> shift
                    budget_v = u.size
                    edge = u.budget - u.size
                    tau = u.tau
                node = TreeNode(
                    id=len(tree.nodes),
                    level=child_level,
                    side=side,
                    parent=u.id,
                    size=size,
                    reward=one_minus_p ** tau,
                    budget=budget_v,
                    edge_len=edge,
                    tau=tau,
                )
                tree.nodes.append(node)
                if side == "left":
                    u.left = node.id
                else:
                    u.right = node.id
                nxt.append(node)
        frontier = nxt
    # breadth-first ids by construction; reorder defensively in case the
    # frontier loop ever changes
    assert [n.id for n in tree.nodes] == list(range(len(tree.nodes)))
    return tree


@dataclass
class ClaimReport:
    """Pass/fail per structural claim, with the offending node ids."""

    failures: dict = field(default_factory=dict)
    checked: list = field(default_factory=list)

    def record(self, claim: str, node: Optional[int], ok: bool) -> None:
        if claim not in self.checked:
            self.checked.append(claim)
        if not ok:
            self.failures.setdefault(claim, []).append(node)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "checked": list(self.checked),
            "failures": {k: v for k, v in self.failures.items()},
        }


def check_structure(tree: LBTree) -> ClaimReport:
    """Verify the construction's structural claims exactly, node by node.

    - budget_slack:       3*s_v <= b(v) (so sizes and edges are well defined)
    - budget_identity:    b(v) = B - travel(v) - instantiated_before(v)
    - left_child_budget:  left children satisfy b(w) = s_w * 2^(2^level(w))
    - prefix_size_strict: instantiated_before(v) < s_v
    - nonnegative:        budgets and edge lengths are >= 0
    """
    rep = ClaimReport()
    B = tree.budget
    for n in tree.nodes:
        rep.record("budget_slack", n.id, 3 * n.size <= n.budget)
        rep.record("nonnegative", n.id, n.budget >= 0 and n.edge_len >= 0)
        a_d = tree.travel_to(n.id)
        a_s = tree.instantiated_before(n.id)
        rep.record("budget_identity", n.id, n.budget == B - a_d - a_s)
        rep.record("prefix_size_strict", n.id, a_s < n.size)
        if n.side == "left":
            rep.record(
                "left_child_budget", n.id, n.budget == n.size << (1 << n.level)
            )
    return rep


@dataclass
class LineEmbedding:
    """Nodes mapped to the coordinate d(root, v); ties ranked by deeper level first."""

    tree: LBTree
    coord: dict
    order: list  # node ids sorted by (coordinate, -level)

    def line_dist(self, u: int, v: int) -> int:
        return abs(self.coord[u] - self.coord[v])


def embed_line(tree: LBTree, check: bool = True) -> LineEmbedding:
    """Map every node to its root distance and verify the separation facts.

    Verified (exactly) when check is set:
      - for every internal u, every left-subtree coordinate exceeds B - 2*s_u
        and every right-subtree coordinate is at most B - 4*s_u,
      - hence all of right-subtree(u) precedes all of left-subtree(u),
      - the line metric never exceeds the tree metric.
    """
    coord = {n.id: tree.dist_to_root(n.id) for n in tree.nodes}
    if check:
        rep = line_claims(tree, coord)
        if not rep.ok:
            raise ConstructionError(f"line embedding claims failed: {rep.failures}")
    order = sorted(coord, key=lambda v: (coord[v], -tree.node(v).level))
    return LineEmbedding(tree=tree, coord=coord, order=order)


def line_claims(tree: LBTree, coord: Optional[dict] = None) -> ClaimReport:
    """Exact per-node report for the line-embedding facts (see embed_line)."""
    if coord is None:
        coord = {n.id: tree.dist_to_root(n.id) for n in tree.nodes}
    rep = ClaimReport()
    B = tree.budget
    rep.record("root_at_zero", 0, coord[0] == 0)
    for u in tree.nodes:
        if u.left is None:
            continue
        left_ids = _subtree_ids(tree, u.left)
        right_ids = _subtree_ids(tree, u.right)
        for v in left_ids:
            rep.record("left_subtree_far", v, coord[v] > B - 2 * u.size)
        for v in right_ids:
            rep.record("right_subtree_near", v, coord[v] <= B - 4 * u.size)
        rep.record(
            "left_after_right",
            u.id,
            max(coord[v] for v in right_ids) < min(coord[v] for v in left_ids),
        )
    for u in tree.nodes:
        for v in tree.nodes:
            if u.id < v.id:
                ok = abs(coord[u.id] - coord[v.id]) <= tree.tree_dist(u.id, v.id)
                rep.record("line_le_tree", (u.id, v.id), ok)
    return rep


def _subtree_ids(tree: LBTree, v: int) -> list:
    out, stack = [], [v]
    while stack:
        w = stack.pop()
        out.append(w)
        stack.extend(tree.children(w))
    return out


def ordering_gap_violations(emb: LineEmbedding) -> list:
    """Pairs (v, w) with coord(v) > coord(w) whose out-of-order walk fits in B.

    Visiting v before w when coord(v) > coord(w) costs at least
    coord(v) + (coord(v) - coord(w)); the construction promises that this
    always exceeds B, so the returned list is empty on a sound tree.
    """
    coord, B = emb.coord, emb.tree.budget
    bad = []
    ids = list(coord)
    for v in ids:
        for w in ids:
            if v != w and coord[v] > coord[w]:
                if coord[v] + (coord[v] - coord[w]) <= B:
                    bad.append((v, w))
    return bad


VARIANTS = ("directed_tree", "undirected_tree", "line")


def to_instance(tree: LBTree, variant: str, emb: Optional[LineEmbedding] = None) -> Instance:
    """Package the tree as a core Instance under one of the three metrics."""
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {VARIANTS}")
    n = len(tree.nodes)
    if variant == "line":
        if emb is None:
            emb = embed_line(tree)
        dist = tuple(
            tuple(emb.line_dist(u, v) for v in range(n)) for u in range(n)
        )
    else:
        dist = tuple(tuple(tree.tree_dist(u, v) for v in range(n)) for u in range(n))
    jobs = tuple(
        JobDist.bernoulli(tree.p, node.size, node.reward) for node in tree.nodes
    )
    parents = None
    if variant == "directed_tree":
        parents = tuple(node.parent for node in tree.nodes)
    return Instance(
        n=n,
        dist=dist,
        jobs=jobs,
        root=0,
        budget=tree.budget,
        directed_parents=parents,
        meta={"family": "lower_bound", "levels": tree.levels, "variant": variant},
    )

"""Optimal non-adaptive policies on the lower-bound family, small-instance
adaptive/non-adaptive optima, and empirical adaptivity-gap tables.

The three lower-bound searches exploit structure that the construction
guarantees:

  - directed tree: a policy is a root-leaf path with an arbitrary skip set;
  - line: any visit order that decreases the coordinate blows the budget, and
    co-located nodes are dominated by ancestor-first order, so only
    coordinate-ordered subsets (ties broken by deeper level) need searching;
  - undirected tree: backtracking over a left edge blows the budget, so a
    walk is a descending chain of left edges with free movement inside each
    right-edge spine; within a spine, ancestor-first order dominates.

All searched policies share one evaluation core: nodes have fixed arrival
offsets (travel telescopes along the visit order), and outcome prefixes are
merged by accumulated size.  Exact scalars end to end.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .core import Instance
from .lowerbound import LBTree, LineEmbedding, embed_line
from .numerics import as_exact, sqrt_of
from .policy import (
    DecisionNode,
    DecisionTree,
    NAPolicy,
    eval_adaptive_exact,
    eval_na_exact,
    reference_policy,
)

EXHAUSTIVE_DIRECTED_MAX_L = 5
EXHAUSTIVE_LINE_MAX_L = 4
EXHAUSTIVE_UTREE_MAX_L = 4
DP_MAX_N = 7
DP_MAX_B = 64
BRUTEFORCE_MAX_N = 8


class SearchError(ValueError):
    pass


class BoundViolation(AssertionError):
    """A searched value exceeded a bound the construction promises."""


# -- shared subset search ----------------------------------------------------


def _best_subset(entries, budget):
    """Best expected reward over all subsets of an offset-ordered node list.

    entries: list of (node_id, arrival_offset, outcomes); offsets must be
    non-decreasing and travel to a visited node must equal its offset no
    matter which other nodes are visited (true for all three searched
    classes).  Returns (value, tuple_of_node_ids).
    """
    best = [as_exact(0), ()]

    def consider(value, route):
        if value > best[0] or (value == best[0] and tuple(route) < best[1]):
            best[0], best[1] = value, tuple(route)

    def rec(idx, states, value, route):
        if not states or idx == len(entries):
            consider(value, route)
            return
        # skip entries[idx]
        rec(idx + 1, states, value, route)
        # include entries[idx]
        node_id, offset, outcomes = entries[idx]
        nxt = {}
        gained = 0
        for ss, pr in states.items():
            t = offset + ss
            if t > budget:
                continue
            for p_out, size, reward in outcomes:
                if t + size <= budget:
                    gained = gained + pr * p_out * reward
                    key = ss + size
                    nxt[key] = nxt.get(key, 0) + pr * p_out
        route.append(node_id)
        rec(idx + 1, nxt, value + gained, route)
        route.pop()

    rec(0, {0: as_exact(1)}, as_exact(0), [])
    return best[0], best[1]


def _entries_for(tree: LBTree, inst: Instance, ids, offsets) -> list:
    return [(v, offsets[v], inst.job(v).outcomes) for v in ids]


# -- directed tree ------------------------------------------------------------


def best_directed_na(tree: LBTree, instance: Optional[Instance] = None):
    """Exact best non-adaptive policy on the directed tree: maximize over all
    root-leaf paths crossed with all skip subsets.  Value is certified to be
    at most 3/p."""
    if tree.levels > EXHAUSTIVE_DIRECTED_MAX_L:
        raise SearchError(
            f"exhaustive directed search limited to L <= {EXHAUSTIVE_DIRECTED_MAX_L}"
        )
    from .lowerbound import to_instance

    inst = instance if instance is not None else to_instance(tree, "directed_tree")
    offsets = {n.id: tree.dist_to_root(n.id) for n in tree.nodes}

    paths = []

    def walk(v, acc):
        acc = acc + [v]
        node = tree.node(v)
        if node.left is None:
            paths.append(acc)
        else:
            walk(node.left, acc)
            walk(node.right, acc)

    walk(0, [])

    best_val, best_route = as_exact(0), ()
    for path in paths:
        val, route = _best_subset(_entries_for(tree, inst, path, offsets), tree.budget)
        if val > best_val or (val == best_val and route < best_route):
            best_val, best_route = val, route
    _check_bound(best_val, 3 * sqrt_of(tree.levels), "directed policies, 3/p")
    return NAPolicy.plain(best_route), best_val


# -- line ---------------------------------------------------------------------


def best_line_na(emb: LineEmbedding, mode: str = "exhaustive", beam_width: int = 256):
    """Best non-adaptive policy on the line embedding.

    Exhaustive mode searches every subset of nodes visited in coordinate
    order with the deeper-level tie-break; other orders are budget-infeasible
    or dominated.  Heuristic mode is a beam search over the same order and
    reports a lower bound.  Value is certified against (4e/(e-1))/p, checked
    as <= 6.34/p.
    """
    tree = emb.tree
    from .lowerbound import to_instance

    inst = to_instance(tree, "line", emb=emb)
    entries = [(v, emb.coord[v], inst.job(v).outcomes) for v in emb.order]
    if mode == "exhaustive":
        if tree.levels > EXHAUSTIVE_LINE_MAX_L:
            raise SearchError(
                f"exhaustive line search limited to L <= {EXHAUSTIVE_LINE_MAX_L}"
            )
        val, route = _best_subset(entries, tree.budget)
    elif mode == "heuristic":
        val, route = _beam_subsets(entries, tree.budget, beam_width)
    else:
        raise SearchError(f"unknown mode {mode!r}")
    _check_bound(
        val, Fraction(634, 100) * sqrt_of(tree.levels), "line policies, 6.34/p"
    )
    return NAPolicy.plain(route), val


def _beam_subsets(entries, budget, width):
    """Deterministic beam over include/skip decisions, scored by exact value."""
    beam = [({0: as_exact(1)}, as_exact(0), ())]
    for node_id, offset, outcomes in entries:
        candidates = list(beam)
        for states, value, route in beam:
            nxt = {}
            gained = 0
            for ss, pr in states.items():
                t = offset + ss
                if t > budget:
                    continue
                for p_out, size, reward in outcomes:
                    if t + size <= budget:
                        gained = gained + pr * p_out * reward
                        key = ss + size
                        nxt[key] = nxt.get(key, 0) + pr * p_out
            candidates.append((nxt, value + gained, route + (node_id,)))
        candidates.sort(key=lambda c: (-_rank(c[1]), c[2]))
        beam = candidates[:width]
    # exact compare on the shortlist (scores are exact already; ties go lex)
    best_val, best_route = as_exact(0), ()
    for _, value, route in beam[:100]:
        if value > best_val or (value == best_val and route < best_route):
            best_val, best_route = value, route
    return best_val, best_route


def _rank(value) -> float:
    return float(value)


# -- undirected tree ----------------------------------------------------------


def _spine(tree: LBTree, v: int) -> list:
    out = [v]
    while tree.node(out[-1]).right is not None:
        out.append(tree.node(out[-1]).right)
    return out


def best_undirected_tree_na(tree: LBTree):
    """Best walk that never backtracks over a left edge: a descending chain of
    left edges, visiting any subset of each right-edge spine in ancestor-first
    order.  Value is certified to be at most 5/p."""
    if tree.levels > EXHAUSTIVE_UTREE_MAX_L:
        raise SearchError(
            f"exhaustive undirected search limited to L <= {EXHAUSTIVE_UTREE_MAX_L}"
        )
    from .lowerbound import to_instance

    inst = to_instance(tree, "undirected_tree")

    chains = []  # each: list of (spine node ids, arrival offset)

    def extend(entry: int, offset: int, acc: list):
        spine = _spine(tree, entry)
        acc = acc + [(spine, offset)]
        chains.append(acc)
        for u in spine:
            node = tree.node(u)
            if node.left is not None:
                extend(node.left, offset + tree.node(node.left).edge_len, acc)

    extend(0, 0, [])

    best_val, best_route = as_exact(0), ()
    for chain in chains:
        entries = []
        for spine, offset in chain:
            entries.extend((v, offset, inst.job(v).outcomes) for v in spine)
        val, route = _best_subset(entries, tree.budget)
        if val > best_val or (val == best_val and route < best_route):
            best_val, best_route = val, route
    _check_bound(best_val, 5 * sqrt_of(tree.levels), "undirected walks, 5/p")
    return NAPolicy.plain(best_route), best_val


def _check_bound(value, bound, label: str) -> None:
    if value > bound:
        raise BoundViolation(f"searched value {value!r} exceeds bound for {label}")


# -- gap table ----------------------------------------------------------------


@dataclass
class GapReport:
    levels: int
    variant: str
    adaptive_value: object
    best_na_value: object
    best_na_policy: NAPolicy
    ratio: object
    search_mode: str

    def to_row(self) -> dict:
        from .numerics import format_exact

        return {
            "L": self.levels,
            "variant": self.variant,
            "adaptive": format_exact(self.adaptive_value),
            "best_na": format_exact(self.best_na_value),
            "ratio": format_exact(self.ratio),
            "mode": self.search_mode,
            "adaptive_float": float(self.adaptive_value),
            "best_na_float": float(self.best_na_value),
            "ratio_float": float(self.ratio),
        }


def gap_table(levels_range, variants=("directed_tree", "undirected_tree", "line"),
              allow_heuristic: bool = True) -> list:
    """One GapReport per (L, variant).  Exhaustive search within the per-variant
    gates; the line search falls back to a beam labeled "heuristic" when
    allowed (its best_na is then only a lower bound, so the ratio is an upper
    bound)."""
    from .lowerbound import build_tree, to_instance

    out = []
    for L in levels_range:
        tree = build_tree(L)
        for variant in variants:
            inst = to_instance(tree, variant)
            adaptive = eval_adaptive_exact(inst, reference_policy(tree))
            mode = "exhaustive"
            if variant == "directed_tree":
                if L > EXHAUSTIVE_DIRECTED_MAX_L:
                    continue
                pol, val = best_directed_na(tree, instance=inst)
            elif variant == "undirected_tree":
                if L > EXHAUSTIVE_UTREE_MAX_L:
                    continue
                pol, val = best_undirected_tree_na(tree)
            else:
                emb = embed_line(tree, check=False)
                if L <= EXHAUSTIVE_LINE_MAX_L:
                    pol, val = best_line_na(emb, "exhaustive")
                elif allow_heuristic:
                    pol, val = best_line_na(emb, "heuristic")
                    mode = "heuristic"
                else:
                    continue
            ratio = adaptive / val if val != 0 else as_exact(0)
            out.append(
                GapReport(
                    levels=L,
                    variant=variant,
                    adaptive_value=adaptive,
                    best_na_value=val,
                    best_na_policy=pol,
                    ratio=ratio,
                    search_mode=mode,
                )
            )
    return out


# -- small-instance optima -----------------------------------------------------


def optimal_adaptive_dp(inst: Instance):
    """Exact optimal adaptive policy by memoized recursion on
    (visited set, current vertex, elapsed time).  Returns (DecisionTree, value)
    with eval_adaptive_exact(tree) equal to the value."""
    if inst.n > DP_MAX_N:
        raise SearchError(f"adaptive DP limited to n <= {DP_MAX_N}")
    if inst.budget > DP_MAX_B:
        raise SearchError(f"adaptive DP limited to B <= {DP_MAX_B}")
    B = inst.budget
    n = inst.n
    memo: dict = {}

    def allowed(last: Optional[int], w: int) -> bool:
        if inst.directed_parents is None:
            return True
        anchor = inst.root if last is None else last
        return inst.is_descendant(anchor, w)

    def solve(mask: int, last: Optional[int], t: int):
        key = (mask, last, t)
        hit = memo.get(key)
        if hit is not None:
            return hit
        best, best_w = Fraction(0), None
        here = inst.root if last is None else last
        for w in range(n):
            if mask & (1 << w) or not allowed(last, w):
                continue
            arrive = t + inst.d(here, w)
            if arrive > B:
                continue
            gain = Fraction(0)
            for p_out, size, reward in inst.job(w).outcomes:
                done = arrive + size
                if done <= B:
                    sub, _ = solve(mask | (1 << w), w, done)
                    gain = gain + p_out * (reward + sub)
            if gain > best:  # w iterates ascending, so ties keep the smallest w
                best, best_w = gain, w
        memo[key] = (best, best_w)
        return memo[key]

    value, _ = solve(0, None, 0)

    def build(mask: int, last: Optional[int], t: int) -> Optional[DecisionNode]:
        val, w = memo.get((mask, last, t), (Fraction(0), None))
        if w is None or val == 0:
            return None
        here = inst.root if last is None else last
        arrive = t + inst.d(here, w)
        node = DecisionNode(vertex=w)
        for _, size, _ in inst.job(w).outcomes:
            done = arrive + size
            if done <= B:
                child = build(mask | (1 << w), w, done)
                if child is not None:
                    node.children[size] = child
        return node

    return DecisionTree(root=build(0, None, 0)), value


def optimal_na_bruteforce(inst: Instance):
    """Exact best plain route over all ordered subsets of vertices."""
    if inst.n > BRUTEFORCE_MAX_N:
        raise SearchError(f"bruteforce limited to n <= {BRUTEFORCE_MAX_N}")
    B = inst.budget
    n = inst.n
    best = [Fraction(0), ()]

    def allowed(last: Optional[int], w: int) -> bool:
        if inst.directed_parents is None:
            return True
        anchor = inst.root if last is None else last
        return inst.is_descendant(anchor, w)

    def consider(value, route):
        if value > best[0] or (value == best[0] and tuple(route) < best[1]):
            best[0], best[1] = value, tuple(route)

    def rec(used: int, last: Optional[int], states: dict, value, route: list):
        consider(value, route)
        if not states:
            return
        here = inst.root if last is None else last
        for w in range(n):
            if used & (1 << w) or not allowed(last, w):
                continue
            step = inst.d(here, w)
            nxt: dict = {}
            gained = 0
            for t, pr in states.items():
                arrive = t + step
                if arrive > B:
                    continue
                for p_out, size, reward in inst.job(w).outcomes:
                    done = arrive + size
                    if done <= B:
                        gained = gained + pr * p_out * reward
                        nxt[done] = nxt.get(done, 0) + pr * p_out
            route.append(w)
            rec(used | (1 << w), w, nxt, value + gained, route)
            route.pop()

    rec(0, None, {0: Fraction(1)}, Fraction(0), [])
    return NAPolicy.plain(best[1]), best[0]

"""Adaptive decision-tree policies and non-adaptive routes, with evaluators.

An adaptive policy is a decision tree: nodes are labeled by vertices, and a
node has at most one child per size outcome of its vertex's job.  A missing
branch means the policy stops after that outcome.  The walk starts at the
instance root; travel accrues between consecutively visited vertices.

A non-adaptive policy is an ordered route of distinct vertices plus a
per-vertex attempt probability.  The walk traverses the whole route; each
job is attempted independently with its probability (probability 1 for plain
routes, 0 for pass-through vertices).  A job pays its reward iff the total
time (travel + processing, inclusive) at its completion is at most B.

Exact evaluators work in exact scalars; the Monte Carlo estimator is the one
place floats appear, and even there time accounting stays in exact ints
because sizes can exceed 2^64.
"""
from __future__ import annotations

import math
import random
import statistics
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .core import Instance, truncated_reward
from .lowerbound import LBTree
from .numerics import as_exact, format_exact, parse_exact

MC_CHUNK = 4096  # samples per substream; fixed so results don't depend on threading


class PolicyError(ValueError):
    pass


@dataclass
class DecisionNode:
    vertex: int
    children: dict = field(default_factory=dict)  # outcome size -> DecisionNode

    def child(self, size: int) -> Optional["DecisionNode"]:
        return self.children.get(size)


@dataclass
class DecisionTree:
    root: Optional[DecisionNode]  # None is the empty policy

    def node_count(self) -> int:
        count, stack = 0, [self.root] if self.root else []
        while stack:
            node = stack.pop()
            count += 1
            stack.extend(node.children.values())
        return count

    def walk(self):
        """Yield (node, path) pairs, path being ((vertex, realized_size), ...)
        for the strict ancestors."""
        if self.root is None:
            return
        stack = [(self.root, ())]
        while stack:
            node, path = stack.pop()
            yield node, path
            for size, child in sorted(node.children.items()):
                stack.append((child, path + ((node.vertex, size),)))


def check_decision_tree(inst: Instance, tree: DecisionTree) -> None:
    """Raise PolicyError if the tree is inconsistent with the instance."""
    if tree.root is None:
        return
    stack = [(tree.root, frozenset())]
    while stack:
        node, seen = stack.pop()
        if node.vertex in seen:
            raise PolicyError(f"vertex {node.vertex} repeated on a path")
        sizes = {s for _, s, _ in inst.job(node.vertex).outcomes}
        for size, child in node.children.items():
            if size not in sizes:
                raise PolicyError(
                    f"branch on size {size} not in the support of vertex {node.vertex}"
                )
            stack.append((child, seen | {node.vertex}))


def eval_adaptive_exact(inst: Instance, tree: DecisionTree):
    """Exact expected reward: sum over nodes of reach probability times the
    node's truncated expected reward at its residual budget."""
    check_decision_tree(inst, tree)
    if tree.root is None:
        return Fraction(0)
    total = 0
    B = inst.budget
    # (node, reach probability, previous vertex, travel so far, size so far)
    stack = [(tree.root, as_exact(1), inst.root, 0, 0)]
    while stack:
        node, prob, prev, travel, seen = stack.pop()
        travel = travel + inst.d(prev, node.vertex)
        total = total + prob * truncated_reward(
            inst.job(node.vertex), B - travel - seen
        )
        for p_out, size, _ in inst.job(node.vertex).outcomes:
            child = node.child(size)
            if child is not None:
                stack.append((child, prob * p_out, node.vertex, travel, seen + size))
    return total


def reference_policy(tree: LBTree) -> DecisionTree:
    """The lower-bound family's reference adaptive policy as a decision tree:
    at every node, go to the left child on observed size 0, to the right child
    otherwise, for all L levels."""

    def build(v: int) -> DecisionNode:
        n = tree.node(v)
        node = DecisionNode(vertex=v)
        if n.left is not None:
            node.children[0] = build(n.left)
            node.children[n.size] = build(n.right)
        return node

    return DecisionTree(root=build(0))


@dataclass(frozen=True)
class NAPolicy:
    route: tuple  # distinct vertex ids, visited in order starting from the root
    attempt_prob: tuple  # one exact probability per route vertex

    def __post_init__(self):
        if len(self.route) != len(self.attempt_prob):
            raise PolicyError("route and attempt_prob lengths differ")
        if len(set(self.route)) != len(self.route):
            raise PolicyError("route repeats a vertex")
        for q in self.attempt_prob:
            if not (0 <= q <= 1):
                raise PolicyError("attempt probability out of [0,1]")

    @staticmethod
    def plain(route) -> "NAPolicy":
        route = tuple(route)
        return NAPolicy(route=route, attempt_prob=(Fraction(1),) * len(route))

    @staticmethod
    def sampled(route, q) -> "NAPolicy":
        route = tuple(route)
        return NAPolicy(route=route, attempt_prob=(as_exact(q),) * len(route))

    def to_json(self) -> dict:
        return {
            "route": list(self.route),
            "attempt_prob": [format_exact(q) for q in self.attempt_prob],
        }

    @staticmethod
    def from_json(obj: dict) -> "NAPolicy":
        return NAPolicy(
            route=tuple(int(v) for v in obj["route"]),
            attempt_prob=tuple(parse_exact(q) for q in obj["attempt_prob"]),
        )


def eval_na_exact(inst: Instance, pol: NAPolicy, attempt_cap: int = 22):
    """Exact expected reward of a route policy.

    Depth-first over outcome prefixes, with states merged by elapsed time.
    States whose time exceeds B are dead and dropped (they can never pay
    again); a tie at exactly B stays alive.  The cap bounds the number of
    attempted stochastic vertices (worst case 2^cap branches).
    """
    stochastic = sum(
        1
        for v, q in zip(pol.route, pol.attempt_prob)
        if q != 0 and inst.job(v).is_stochastic()
    )
    if stochastic > attempt_cap:
        raise PolicyError(
            f"{stochastic} attempted stochastic vertices exceed the cap {attempt_cap};"
            " use eval_na_mc"
        )
    B = inst.budget
    value = 0
    states = {0: as_exact(1)}  # elapsed time -> probability
    prev = inst.root
    for v, q in zip(pol.route, pol.attempt_prob):
        step = inst.d(prev, v)
        job = inst.job(v)
        nxt: dict = {}

        def put(t, pr):
            if t <= B and pr != 0:
                nxt[t] = nxt.get(t, 0) + pr

        for t, pr in states.items():
            t = t + step
            if t > B:
                continue  # walk already ran out of time
            if q != 1:
                put(t, pr * (1 - q))
            if q != 0:
                for p_out, size, reward in job.outcomes:
                    t_done = t + size
                    if t_done <= B:
                        value = value + pr * q * p_out * reward
                        put(t_done, pr * q * p_out)
        states = nxt
        prev = v
        if not states:
            break
    return value


@dataclass(frozen=True)
class MCResult:
    mean: float
    stderr: float
    samples: int


def eval_na_mc(
    inst: Instance,
    pol: NAPolicy,
    samples: int,
    seed: int,
    threads: int = 1,
) -> MCResult:
    """Unbiased Monte Carlo estimate of a route policy's expected reward.

    Deterministic for a given seed: sampling is split into fixed-size chunks
    with per-chunk substreams, so the result is identical no matter how the
    chunks are scheduled (threads only affect wall time, never the output).
    """
    if samples < 1:
        raise ValueError("samples must be >= 1")
    route = pol.route
    attempt = [float(q) for q in pol.attempt_prob]
    jobs = [inst.job(v) for v in route]
    steps = []
    prev = inst.root
    for v in route:
        steps.append(inst.d(prev, v))
        prev = v
    B = inst.budget

    cum: list = []
    for job in jobs:
        acc, rows = 0.0, []
        for p_out, size, reward in job.outcomes:
            acc += float(p_out)
            rows.append((acc, size, float(reward)))
        if rows:
            rows[-1] = (1.0, rows[-1][1], rows[-1][2])
        cum.append(rows)

    def run_chunk(index: int, count: int) -> list:
        rng = random.Random((seed, index))
        out = []
        for _ in range(count):
            t, total = 0, 0.0
            for k in range(len(route)):
                t += steps[k]
                if t > B:
                    break
                if not (rng.random() < attempt[k]):
                    continue
                u = rng.random()
                for acc, size, reward in cum[k]:
                    if u <= acc:
                        t += size
                        if t <= B:
                            total += reward
                        break
                if t > B:
                    break
            out.append(total)
        return out

    chunks = [
        (i, min(MC_CHUNK, samples - i * MC_CHUNK))
        for i in range((samples + MC_CHUNK - 1) // MC_CHUNK)
    ]
    values: list = []
    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            for part in pool.map(lambda c: run_chunk(*c), chunks):
                values.extend(part)
    else:
        for c in chunks:
            values.extend(run_chunk(*c))

    mean = sum(values) / len(values)
    if len(values) > 1:
        var = statistics.fmean((x - mean) ** 2 for x in values) * len(values) / (
            len(values) - 1
        )
        stderr = math.sqrt(var / len(values))
    else:
        stderr = 0.0
    return MCResult(mean=mean, stderr=stderr, samples=samples)

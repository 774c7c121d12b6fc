"""Instance model: metric, per-vertex job distributions, exact moments.

A job is a finite distribution over (size, reward) pairs with one reward per
size (reward conditional on size is deterministic).  Sizes, distances and the
budget are nonnegative integers; probabilities and rewards are exact scalars.
All arithmetic here is exact -- floats only ever appear in Monte Carlo
estimators, never in this module.

Budget feasibility is inclusive everywhere: a job that finishes at exactly
time B still pays its reward.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from .numerics import ExactScalar, as_exact, format_exact, parse_exact


@dataclass(frozen=True)
class JobDist:
    """Distribution of one vertex's job.

    outcomes: tuple of (prob, size, reward), probabilities summing to 1,
    sizes distinct nonnegative ints, rewards >= 0.  kind is "bernoulli" or
    "table" and only affects serialization.
    """

    outcomes: tuple  # ((prob, size, reward), ...)
    kind: str = "table"
    # bernoulli parameters, kept for round-tripping
    p: Optional[ExactScalar] = None
    size: Optional[int] = None
    reward: Optional[ExactScalar] = None

    @staticmethod
    def bernoulli(p, size: int, reward) -> "JobDist":
        """Size 0 with prob 1-p, `size` with prob p; fixed reward either way."""
        p = as_exact(p)
        reward = as_exact(reward)
        if size == 0:
            outcomes = ((1, 0, reward),)
        else:
            outcomes = tuple(
                (q, s, reward) for q, s in ((1 - p, 0), (p, size)) if q != 0
            )
        return JobDist(outcomes=outcomes, kind="bernoulli", p=p, size=size, reward=reward)

    @staticmethod
    def table(rows: Sequence) -> "JobDist":
        """rows: iterable of (prob, size, reward)."""
        merged: dict[int, list] = {}
        for prob, size, reward in rows:
            prob, reward = as_exact(prob), as_exact(reward)
            if size in merged:
                if merged[size][1] != reward:
                    raise ValueError(f"two rewards for size {size}")
                merged[size][0] = merged[size][0] + prob
            else:
                merged[size] = [prob, reward]
        outcomes = tuple((p, s, r) for s, (p, r) in sorted(merged.items()))
        return JobDist(outcomes=outcomes, kind="table")

    @staticmethod
    def deterministic(size: int, reward) -> "JobDist":
        return JobDist.table([(Fraction(1), size, reward)])

    def prob_sum(self):
        total = 0
        for p, _, _ in self.outcomes:
            total = total + p
        return total

    def max_size(self) -> int:
        return max(s for _, s, _ in self.outcomes)

    def is_stochastic(self) -> bool:
        return len(self.outcomes) > 1


def capped_mean(job: JobDist, j: int):
    """E[min(S, 2^j)], the band-j truncated mean size.  Exact."""
    if j < 0:
        raise ValueError("band index must be >= 0")
    cap = 1 << j
    total = 0
    for p, s, _ in job.outcomes:
        total = total + p * min(s, cap)
    return total


def truncated_reward(job: JobDist, d) -> ExactScalar:
    """Expected reward from outcomes whose size is at most d.

    d may be negative (empty sum, 0) or exceed the budget; clamping against
    the budget is a caller concern.
    """
    total = 0
    for p, s, r in job.outcomes:
        if s <= d:
            total = total + p * r
    return total


@dataclass(frozen=True)
class Instance:
    """Metric + jobs + root + budget.

    dist is a full n x n tuple-of-tuples of nonnegative ints.  When
    directed_parents is not None the metric is the shortest-path metric of a
    rooted tree and feasible routes must follow root-to-leaf order with
    skips (parent array, None at the root).
    """

    n: int
    dist: tuple
    jobs: tuple
    root: int
    budget: int
    directed_parents: Optional[tuple] = None
    meta: dict = field(default_factory=dict, compare=False)

    def d(self, u: int, v: int) -> int:
        return self.dist[u][v]

    def job(self, v: int) -> JobDist:
        return self.jobs[v]

    def is_descendant(self, u: int, v: int) -> bool:
        """True iff v is u itself or a descendant of u in the order tree."""
        if self.directed_parents is None:
            raise ValueError("instance has no order constraint")
        w: Optional[int] = v
        while w is not None:
            if w == u:
                return True
            w = self.directed_parents[w]
        return False


@dataclass
class ValidationReport:
    violations: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_json(self) -> dict:
        return {"ok": self.ok, "violations": list(self.violations)}


def validate_instance(inst: Instance) -> ValidationReport:
    """Report every violated invariant; empty report iff the instance is valid."""
    rep = ValidationReport()
    bad = rep.violations
    n = inst.n
    if len(inst.dist) != n or any(len(row) != n for row in inst.dist):
        bad.append(f"dist shape is not {n}x{n}")
        return rep
    if len(inst.jobs) != n:
        bad.append(f"expected {n} jobs, got {len(inst.jobs)}")
        return rep
    if not (0 <= inst.root < n):
        bad.append(f"root {inst.root} out of range")
    if inst.budget < 0:
        bad.append("negative budget")

    for i in range(n):
        if inst.dist[i][i] != 0:
            bad.append(f"nonzero diagonal at {i}")
        for k in range(i + 1, n):
            if inst.dist[i][k] != inst.dist[k][i]:
                bad.append(f"asymmetric dist ({i},{k})")
            if inst.dist[i][k] < 0:
                bad.append(f"negative dist ({i},{k})")
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            for c in range(n):
                if c == a or c == b:
                    continue
                if inst.dist[a][c] > inst.dist[a][b] + inst.dist[b][c]:
                    bad.append(f"triangle ({a},{b},{c})")

    for v, job in enumerate(inst.jobs):
        if job.prob_sum() != 1:
            bad.append(f"prob-sum at vertex {v}")
        for p, s, r in job.outcomes:
            if not (0 <= p <= 1):
                bad.append(f"prob out of [0,1] at vertex {v}")
            if s < 0:
                bad.append(f"negative size at vertex {v}")
            if s > inst.budget:
                bad.append(f"size > B at vertex {v}")
            if r < 0:
                bad.append(f"negative reward at vertex {v}")

    if inst.directed_parents is not None:
        parents = inst.directed_parents
        if len(parents) != n:
            bad.append("parent array length mismatch")
        else:
            roots = [v for v in range(n) if parents[v] is None]
            if roots != [inst.root]:
                bad.append("order tree must have exactly the root as its root")
            for v in range(n):
                seen, w = set(), v
                while w is not None and w not in seen:
                    seen.add(w)
                    w = parents[w]
                if w is not None:
                    bad.append(f"parent cycle through {v}")
                    break
    return rep


# -- JSON schema ------------------------------------------------------------
#
# {"n": int, "budget": "256", "root": 0,
#  "dist": ["0", "240", ...],                  # row-major decimal strings
#  "jobs": [{"type": "bernoulli", "p": "...", "size": "16", "reward": "1"},
#           {"type": "table", "outcomes": [{"prob": "1/2", "size": "0",
#                                           "reward": "5"}, ...]}],
#  "order_constraint": "none" | {"directed_tree": [null, 0, 0, ...]}}
#
# Numbers are strings because sizes/budgets exceed 64 bits and probabilities
# may be exact sqrt expressions.


def job_to_json(job: JobDist) -> dict:
    if job.kind == "bernoulli":
        return {
            "type": "bernoulli",
            "p": format_exact(job.p),
            "size": str(job.size),
            "reward": format_exact(job.reward),
        }
    return {
        "type": "table",
        "outcomes": [
            {"prob": format_exact(p), "size": str(s), "reward": format_exact(r)}
            for p, s, r in job.outcomes
        ],
    }


def job_from_json(obj: dict) -> JobDist:
    if obj["type"] == "bernoulli":
        return JobDist.bernoulli(
            parse_exact(obj["p"]), int(obj["size"]), parse_exact(obj["reward"])
        )
    if obj["type"] == "table":
        return JobDist.table(
            [
                (parse_exact(row["prob"]), int(row["size"]), parse_exact(row["reward"]))
                for row in obj["outcomes"]
            ]
        )
    raise ValueError(f"unknown job type {obj['type']!r}")


def instance_to_json(inst: Instance) -> dict:
    if inst.directed_parents is None:
        order = "none"
    else:
        order = {"directed_tree": [p for p in inst.directed_parents]}
    return {
        "n": inst.n,
        "budget": str(inst.budget),
        "root": inst.root,
        "dist": [str(inst.dist[i][k]) for i in range(inst.n) for k in range(inst.n)],
        "jobs": [job_to_json(j) for j in inst.jobs],
        "order_constraint": order,
        "meta": inst.meta,
    }


def instance_from_json(obj: dict) -> Instance:
    n = int(obj["n"])
    flat = [int(x) for x in obj["dist"]]
    if len(flat) != n * n:
        raise ValueError("dist length mismatch")
    dist = tuple(tuple(flat[i * n : (i + 1) * n]) for i in range(n))
    order = obj.get("order_constraint", "none")
    parents = None
    if isinstance(order, dict) and "directed_tree" in order:
        parents = tuple(None if p is None else int(p) for p in order["directed_tree"])
    return Instance(
        n=n,
        dist=dist,
        jobs=tuple(job_from_json(j) for j in obj["jobs"]),
        root=int(obj["root"]),
        budget=int(obj["budget"]),
        directed_parents=parents,
        meta=obj.get("meta", {}),
    )


def load_instance(path: str) -> Instance:
    with open(path, "r", encoding="utf-8") as fh:
        return instance_from_json(json.load(fh))


def dump_instance(inst: Instance, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_json(inst), fh, indent=2, sort_keys=True)
        fh.write("\n")

"""Discrete Bayesian-network explanations for single snapshots.

Variables are graph nodes; each takes the three perturbation codes
{0, 1, 2}. Fitting is closed-form maximum likelihood on family count
tables, scored by log-likelihood minus the (ln n)/2 dimension penalty.
Structure search is greedy hill climbing over add/delete/reverse moves.

The dataset argument of the scoring operations only needs two attributes,
``variables`` (tuple of node ids) and ``realizations`` ((S, m) code
matrix), so both live snapshots and reloaded files work.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .errors import EmptyDataError, MissingVariableError
from .graph import TemporalGraph, k_hop_neighbors
from .kernels import family_counts as _kernel_counts
from .kernels import family_loglik as _kernel_loglik
from .model import ModelOracle
from .perturb import PerturbationConfig, generate_snapshot_dataset

CARDINALITY = 3

MAX_SELECTED = 12


@dataclass(frozen=True)
class BayesianNetwork:
    """DAG over a subset of node variables, target always included."""

    variables: tuple[int, ...]
    edges: frozenset
    target: int
    snapshot: int | None = None

    def __post_init__(self):
        variables = tuple(int(v) for v in self.variables)
        edges = frozenset((int(p), int(c)) for p, c in self.edges)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "edges", edges)
        vset = set(variables)
        if len(vset) != len(variables):
            raise ValueError("duplicate variables")
        if self.target not in vset:
            raise ValueError("target must be a variable")
        for p, c in edges:
            if p == c:
                raise ValueError(f"self loop on {p}")
            if p not in vset or c not in vset:
                raise ValueError(f"edge ({p}, {c}) leaves the variable set")
        if not _is_acyclic(variables, edges):
            raise ValueError("edge set contains a cycle")

    def parents(self, v: int) -> tuple[int, ...]:
        return tuple(sorted(p for p, c in self.edges if c == v))

    def children(self, v: int) -> tuple[int, ...]:
        return tuple(sorted(c for p, c in self.edges if p == v))

    def markov_blanket(self, v: int) -> set[int]:
        blanket = set(self.parents(v)) | set(self.children(v))
        for c in self.children(v):
            blanket |= set(self.parents(c))
        blanket.discard(v)
        return blanket

    def with_snapshot(self, t: int) -> "BayesianNetwork":
        return BayesianNetwork(self.variables, self.edges, self.target, snapshot=t)

    def canonical(self) -> dict:
        return {
            "variables": sorted(self.variables),
            "edges": sorted([int(p), int(c)] for p, c in self.edges),
            "target": self.target,
            "cardinality": CARDINALITY,
        }

    def canonical_key(self) -> str:
        return json.dumps(self.canonical(), sort_keys=True, separators=(",", ":"))


def _is_acyclic(variables, edges) -> bool:
    children = {v: [] for v in variables}
    indeg = {v: 0 for v in variables}
    for p, c in edges:
        children[p].append(c)
        indeg[c] += 1
    queue = [v for v in variables if indeg[v] == 0]
    seen = 0
    while queue:
        v = queue.pop()
        seen += 1
        for c in children[v]:
            indeg[c] -= 1
            if indeg[c] == 0:
                queue.append(c)
    return seen == len(variables)


def empty_network(variables, target: int, snapshot: int | None = None) -> BayesianNetwork:
    return BayesianNetwork(tuple(variables), frozenset(), int(target), snapshot)


def network_to_json(b: BayesianNetwork) -> dict:
    doc = b.canonical()
    if b.snapshot is not None:
        doc["snapshot"] = b.snapshot
    return doc


def network_from_json(doc: dict) -> BayesianNetwork:
    return BayesianNetwork(
        variables=tuple(doc["variables"]),
        edges=frozenset((p, c) for p, c in doc["edges"]),
        target=int(doc["target"]),
        snapshot=doc.get("snapshot"),
    )


def to_dot(b: BayesianNetwork, labels=None, name: str = "explanation") -> str:
    """GraphViz rendering; the target node is drawn filled, double-circled."""

    def label(v):
        return labels[v] if labels is not None else str(v)

    lines = [f"digraph {name} {{"]
    for v in sorted(b.variables):
        attrs = f'label="{label(v)}"'
        if v == b.target:
            attrs += ', shape=doublecircle, style=filled, fillcolor="#cfe2f3"'
        else:
            attrs += ", shape=circle"
        lines.append(f"  n{v} [{attrs}];")
    for p, c in sorted(b.edges):
        lines.append(f"  n{p} -> n{c};")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# counting, fitting, scoring


@dataclass(frozen=True)
class FamilyCounts:
    """Per-variable count tables N[j, k]: parent configuration j, value k.

    Configurations run in mixed-radix order over the variable's parents
    sorted ascending, the smallest parent index being the most significant
    digit.
    """

    tables: dict

    def marginals(self, v: int) -> np.ndarray:
        return self.tables[v].sum(axis=1)


@dataclass(frozen=True)
class CPTParams:
    """Conditional probability tables; every row sums to one."""

    tables: dict

    def __post_init__(self):
        for v, tab in self.tables.items():
            sums = tab.sum(axis=1)
            if np.any(np.abs(sums - 1.0) > 1e-12):
                raise ValueError(f"CPT rows for variable {v} do not sum to 1")


def _positions(d, b: BayesianNetwork) -> dict:
    pos = {v: i for i, v in enumerate(d.variables)}
    missing = [v for v in b.variables if v not in pos]
    if missing:
        raise MissingVariableError(f"dataset lacks variables {missing}")
    return pos


def family_counts(b: BayesianNetwork, d) -> FamilyCounts:
    pos = _positions(d, b)
    codes = np.ascontiguousarray(d.realizations, dtype=np.uint8)
    tables = {}
    for v in b.variables:
        parent_cols = [pos[p] for p in b.parents(v)]
        tables[v] = _kernel_counts(codes, pos[v], parent_cols, CARDINALITY)
    return FamilyCounts(tables=tables)


def mle_fit(b: BayesianNetwork, d) -> CPTParams:
    """Row-normalized counts; unseen parent configurations fall back to uniform."""
    counts = family_counts(b, d)
    tables = {}
    for v, tab in counts.tables.items():
        tab = tab.astype(np.float64)
        nj = tab.sum(axis=1, keepdims=True)
        uniform = np.full_like(tab, 1.0 / CARDINALITY)
        with np.errstate(invalid="ignore", divide="ignore"):
            theta = np.where(nj > 0, tab / np.where(nj > 0, nj, 1.0), uniform)
        tables[v] = theta
    return CPTParams(tables=tables)


def log_likelihood(b: BayesianNetwork, d) -> float:
    """Maximum-likelihood log score, sum over families of N ln(N / N_j)."""
    pos = _positions(d, b)
    codes = np.ascontiguousarray(d.realizations, dtype=np.uint8)
    total = 0.0
    for v in b.variables:
        parent_cols = [pos[p] for p in b.parents(v)]
        total += _kernel_loglik(codes, pos[v], parent_cols, CARDINALITY)
    return total


def dim(b: BayesianNetwork) -> int:
    """Free-parameter count: (r - 1) * r^{|parents|} summed over variables."""
    return sum((CARDINALITY - 1) * CARDINALITY ** len(b.parents(v)) for v in b.variables)


def bic_score(b: BayesianNetwork, d) -> float:
    n = int(np.asarray(d.realizations).shape[0])
    if n == 0:
        raise EmptyDataError("BIC needs at least one sample")
    return log_likelihood(b, d) - 0.5 * math.log(n) * dim(b)


# ---------------------------------------------------------------------------
# variable selection


def chi_square_stat(col_a: np.ndarray, col_b: np.ndarray, r: int = CARDINALITY) -> float:
    """Pearson statistic of the r x r contingency table of two code columns."""
    table = np.zeros((r, r), dtype=np.int64)
    np.add.at(table, (col_a.astype(np.int64), col_b.astype(np.int64)), 1)
    n = table.sum()
    if n == 0:
        return 0.0
    row = table.sum(axis=1, keepdims=True)
    col = table.sum(axis=0, keepdims=True)
    expected = row * col / n
    mask = expected > 0
    return float((((table - expected) ** 2)[mask] / expected[mask]).sum())


def select_variables(d, target: int, M: int) -> list[int]:
    """Keep the target plus the M - 1 variables most dependent on it.

    Dependence is the Pearson statistic against the target column;
    constant columns are dropped before ranking; ties break toward the
    smaller node index. Returns node ids sorted ascending.
    """
    if M < 2:
        raise ValueError("M must be at least 2")
    codes = np.asarray(d.realizations)
    pos = {v: i for i, v in enumerate(d.variables)}
    if target not in pos:
        raise MissingVariableError(f"target {target} not in dataset")
    target_col = codes[:, pos[target]]
    ranked = []
    for v in d.variables:
        if v == target:
            continue
        col = codes[:, pos[v]]
        if col.size and col.min() == col.max():
            continue
        ranked.append((-chi_square_stat(col, target_col), v))
    ranked.sort()
    chosen = {target} | {v for _, v in ranked[: M - 1]}
    return sorted(chosen)


# ---------------------------------------------------------------------------
# structure search


class _FamilyScorer:
    """Memoized family BIC contributions over one dataset."""

    def __init__(self, d, variables):
        self.pos = {v: i for i, v in enumerate(d.variables)}
        missing = [v for v in variables if v not in self.pos]
        if missing:
            raise MissingVariableError(f"dataset lacks variables {missing}")
        self.codes = np.ascontiguousarray(d.realizations, dtype=np.uint8)
        n = self.codes.shape[0]
        if n == 0:
            raise EmptyDataError("cannot learn from an empty dataset")
        self.half_log_n = 0.5 * math.log(n)
        self._cache = {}

    def score(self, child: int, parents: frozenset) -> float:
        key = (child, parents)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        cols = [self.pos[p] for p in sorted(parents)]
        ll = _kernel_loglik(self.codes, self.pos[child], cols, CARDINALITY)
        penalty = self.half_log_n * (CARDINALITY - 1) * CARDINALITY ** len(parents)
        value = ll - penalty
        self._cache[key] = value
        return value


def _reaches(children: dict, src: int, dst: int) -> bool:
    stack = [src]
    seen = {src}
    while stack:
        v = stack.pop()
        if v == dst:
            return True
        for c in children[v]:
            if c not in seen:
                seen.add(c)
                stack.append(c)
    return False


# Floor on accepted score gains. Reversing a covered edge leaves the score
# mathematically unchanged, but the two summation orders of the same family
# scores can both round to ~1e-13; without a floor the search flips such an
# edge forever.
GAIN_EPS = 1e-9


def learn_structure(d, variables, max_parents: int = 3) -> BayesianNetwork:
    """Greedy hill climbing from the empty graph.

    Each round evaluates every legal add, delete, and reverse of a single
    edge and applies the move with the largest strictly positive score
    gain; ties fall to the earliest move in (parent, child, kind) order.
    Stops when no move improves the score.
    """
    if max_parents < 1:
        raise ValueError("max_parents must be at least 1")
    variables = sorted(int(v) for v in variables)
    scorer = _FamilyScorer(d, variables)
    parents = {v: frozenset() for v in variables}
    children = {v: set() for v in variables}
    edges = set()

    while True:
        best_gain = GAIN_EPS
        best_move = None
        for p in variables:
            for c in variables:
                if p == c:
                    continue
                has_edge = (p, c) in edges
                for kind in ("add", "delete", "reverse"):
                    if kind == "add":
                        if has_edge or len(parents[c]) >= max_parents:
                            continue
                        if _reaches(children, c, p):
                            continue
                        gain = scorer.score(c, parents[c] | {p}) - scorer.score(c, parents[c])
                    elif kind == "delete":
                        if not has_edge:
                            continue
                        gain = scorer.score(c, parents[c] - {p}) - scorer.score(c, parents[c])
                    else:
                        if not has_edge or len(parents[p]) >= max_parents:
                            continue
                        children[p].discard(c)
                        cycle = _reaches(children, p, c)
                        children[p].add(c)
                        if cycle:
                            continue
                        gain = (
                            scorer.score(c, parents[c] - {p})
                            + scorer.score(p, parents[p] | {c})
                            - scorer.score(c, parents[c])
                            - scorer.score(p, parents[p])
                        )
                    if gain > best_gain:
                        best_gain = gain
                        best_move = (kind, p, c)
        if best_move is None:
            break
        kind, p, c = best_move
        if kind == "add":
            edges.add((p, c))
            parents[c] = parents[c] | {p}
            children[p].add(c)
        elif kind == "delete":
            edges.remove((p, c))
            parents[c] = parents[c] - {p}
            children[p].discard(c)
        else:
            edges.remove((p, c))
            edges.add((c, p))
            parents[c] = parents[c] - {p}
            parents[p] = parents[p] | {c}
            children[p].discard(c)
            children[c].add(p)

    target = getattr(d, "target", variables[0])
    if target not in variables:
        target = variables[0]
    return BayesianNetwork(tuple(variables), frozenset(edges), int(target))


# ---------------------------------------------------------------------------
# snapshot pipeline


def candidate_variables(g: TemporalGraph, target: int) -> list[int]:
    """Target plus its two-hop neighborhood, ascending."""
    return sorted(set(k_hop_neighbors(g, target, 2)) | {target})


def default_m(n_candidates: int) -> int:
    return min(n_candidates, MAX_SELECTED)


def explain_dataset(d, M: int | None = None, max_parents: int = 3) -> BayesianNetwork:
    """Variable selection plus structure learning on one snapshot dataset."""
    m = M if M is not None else default_m(len(d.variables))
    chosen = select_variables(d, d.target, m)
    return learn_structure(d, chosen, max_parents).with_snapshot(d.t)


def explain_snapshot(
    oracle: ModelOracle,
    g: TemporalGraph,
    t: int,
    target: int,
    cfg: PerturbationConfig,
    M: int | None = None,
    max_parents: int = 3,
    variables=None,
    mean_range: tuple[int, int] | None = None,
) -> BayesianNetwork:
    """Perturb one snapshot, select dependent variables, learn the DAG."""
    if variables is None:
        variables = candidate_variables(g, target)
    d = generate_snapshot_dataset(oracle, g, t, target, variables, cfg, mean_range)
    return explain_dataset(d, M=M, max_parents=max_parents)

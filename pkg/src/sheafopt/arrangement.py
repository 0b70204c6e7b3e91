"""Partition of R^n induced by a family of linear subspaces, and the signed
boundary incidence between its classes.

Every point ``x`` belongs to exactly one class: the one whose carrier is
the intersection of all subspaces containing ``x`` (the whole space, i.e.
the complement class, when no subspace contains it).
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .space import FEAS_TOL, Subspace, as_vector, intersect_subspaces, same_subspace

MAX_SUBSPACES = 12


@dataclass(frozen=True)
class PartitionClass:
    label: frozenset
    carrier: Subspace
    kind: str  # "pure" | "intersection" | "complement"

    @property
    def dim(self) -> int:
        return self.carrier.dim

    def name(self) -> str:
        if self.kind == "complement":
            return "alpha"
        return "{" + ",".join(str(i) for i in sorted(self.label)) + "}"


@dataclass(frozen=True)
class Partition:
    subspaces: tuple
    classes: tuple

    @property
    def size(self) -> int:
        return len(self.classes)

    def index(self, cls: PartitionClass) -> int:
        return self.classes.index(cls)

    def label_of(self, x, tol: float = FEAS_TOL) -> frozenset:
        x = as_vector(x, self.subspaces[0].ambient_dim)
        return frozenset(k for k, S in enumerate(self.subspaces) if S.contains(x, tol))

    def class_index(self, x, tol: float = FEAS_TOL) -> int:
        lab = self.label_of(x, tol)
        for i, c in enumerate(self.classes):
            if c.label == lab:
                return i
        # tolerance disagreement: smallest carrier that still holds x
        holding = [i for i, c in enumerate(self.classes) if c.carrier.contains(x, tol)]
        return min(holding, key=lambda i: self.classes[i].dim)

    def class_of(self, x, tol: float = FEAS_TOL) -> PartitionClass:
        return self.classes[self.class_index(x, tol)]

    def find(self, carrier: Subspace) -> int | None:
        for i, c in enumerate(self.classes):
            if c.carrier.dim == carrier.dim and c.carrier.equals(carrier):
                return i
        return None

    def to_dict(self):
        return {
            "subspaces": [_gens_json(S) for S in self.subspaces],
            "ambient_dim": self.subspaces[0].ambient_dim,
            "classes": [
                {"label": sorted(c.label), "kind": c.kind, "carrier": _gens_json(c.carrier)}
                for c in self.classes
            ],
        }

    @classmethod
    def from_dict(cls, data) -> Partition:
        n = data["ambient_dim"]
        subs = tuple(Subspace(g, ambient_dim=n) for g in data["subspaces"])
        classes = tuple(
            PartitionClass(frozenset(c["label"]), Subspace(c["carrier"], ambient_dim=n), c["kind"])
            for c in data["classes"]
        )
        return cls(subs, classes)


def _gens_json(S: Subspace):
    return [[f"{v.numerator}/{v.denominator}" for v in g] for g in S.gens]


def build_partition(subspaces: Sequence[Subspace]) -> Partition:
    """Classes of the arrangement: pure, minimal intersections, complement."""
    subspaces = tuple(subspaces)
    if not 1 <= len(subspaces) <= MAX_SUBSPACES:
        raise ValueError(f"need between 1 and {MAX_SUBSPACES} subspaces")
    n = subspaces[0].ambient_dim
    if any(S.ambient_dim != n for S in subspaces):
        raise ValueError("subspaces live in different ambient spaces")
    for i, j in ((i, j) for i in range(len(subspaces)) for j in range(i + 1, len(subspaces))):
        if same_subspace(subspaces[i], subspaces[j]):
            warnings.warn(f"subspaces {i} and {j} coincide; their classes collapse", stacklevel=2)

    flats: list[Subspace] = []

    def add(F):
        for G in flats:
            if same_subspace(F, G):
                return False
        flats.append(F)
        return True

    for S in subspaces:
        add(S)
    frontier = list(flats)
    while frontier:
        new = []
        for F in frontier:
            for S in subspaces:
                G = intersect_subspaces([F, S])
                if add(G):
                    new.append(G)
        frontier = new

    classes = []
    for F in flats:
        label = frozenset(k for k, S in enumerate(subspaces) if S.contains_subspace(F))
        kind = "pure" if any(same_subspace(F, S) for S in subspaces) else "intersection"
        classes.append(PartitionClass(label, F, kind))
    if not any(c.carrier.is_full() for c in classes):
        classes.append(PartitionClass(frozenset(), Subspace.full(n), "complement"))

    rank = {"pure": 0, "intersection": 1, "complement": 2}
    classes.sort(key=lambda c: (rank[c.kind], -c.dim if c.kind == "intersection" else 0,
                                sorted(c.label)))
    return Partition(subspaces, tuple(classes))


def class_of(x, partition: Partition) -> PartitionClass:
    return partition.class_of(x)


@dataclass(frozen=True)
class IncidenceRow:
    hi: int
    lo: int
    boundary: Subspace


@dataclass(frozen=True)
class IncidenceMatrix:
    rows: tuple
    n_classes: int

    @property
    def tau(self) -> int:
        return len(self.rows)

    @property
    def matrix(self) -> np.ndarray:
        T = np.zeros((len(self.rows), self.n_classes), dtype=int)
        for r, row in enumerate(self.rows):
            T[r, row.hi] = 1
            T[r, row.lo] = -1
        return T

    def pairs(self) -> list[tuple[int, int]]:
        return [(r.hi, r.lo) for r in self.rows]

    def to_dict(self):
        return {"rows": [[r.hi, r.lo] for r in self.rows], "matrix": self.matrix.tolist()}

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in self.matrix:
            w.writerow(row.tolist())
        return buf.getvalue()

    @classmethod
    def from_dict(cls, data, partition: Partition) -> IncidenceMatrix:
        rows = tuple(IncidenceRow(hi, lo, partition.classes[lo].carrier) for hi, lo in data["rows"])
        return cls(rows, partition.size)


def build_incidence(partition: Partition) -> IncidenceMatrix:
    """One row per immediate containment of carriers, plus complement/pure rows.

    The row is +1 on the larger class and -1 on the smaller one, whose
    carrier is the shared boundary.
    """
    cls = partition.classes
    k = len(cls)

    def below(b, a):  # carrier b strictly inside carrier a
        return cls[b].dim < cls[a].dim and cls[a].carrier.contains_subspace(cls[b].carrier)

    pairs = set()
    for a in range(k):
        for b in range(k):
            if below(b, a) and not any(below(b, c) and below(c, a) for c in range(k)):
                pairs.add((a, b))
    alpha = [i for i, c in enumerate(cls) if c.kind == "complement"]
    if alpha:
        for i, c in enumerate(cls):
            if c.kind == "pure":
                pairs.add((alpha[0], i))
    ordered = sorted(pairs, key=lambda p: (cls[p[1]].dim, p[0], p[1]))
    rows = tuple(IncidenceRow(a, b, cls[b].carrier) for a, b in ordered)
    return IncidenceMatrix(rows, k)

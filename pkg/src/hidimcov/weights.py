"""Projection vectors and pair families used by the bilinear-form statistics."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, Tuple

import numpy as np


@dataclass(frozen=True, eq=False)
class WeightVector:
    coords: np.ndarray

    def __post_init__(self):
        coords = np.array(self.coords, dtype=float).reshape(-1)
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "l1", float(np.abs(coords).sum()))
        object.__setattr__(self, "l2", float(np.sqrt(coords @ coords)))

    @property
    def dim(self) -> int:
        return self.coords.shape[0]

    def __mul__(self, c: float) -> "WeightVector":
        return WeightVector(c * self.coords)

    __rmul__ = __mul__

    def __add__(self, other: "WeightVector") -> "WeightVector":
        return WeightVector(self.coords + as_coords(other))


@dataclass(frozen=True, eq=False)
class WeightPairSet:
    pairs: Tuple[Tuple[WeightVector, WeightVector], ...]
    l1_bound: float = math.inf

    def __post_init__(self):
        pairs = tuple((as_weight(v), as_weight(w)) for v, w in self.pairs)
        if not pairs:
            raise ValueError("need at least one pair")
        dims = {x.dim for pair in pairs for x in pair}
        if len(dims) != 1:
            raise ValueError("all weight vectors must share one dimension")
        worst = max(x.l1 for pair in pairs for x in pair)
        if worst > self.l1_bound * (1 + 1e-12):
            raise ValueError(f"l1 norm {worst} exceeds bound {self.l1_bound}")
        object.__setattr__(self, "pairs", pairs)

    @property
    def L(self) -> int:
        return len(self.pairs)

    @property
    def dim(self) -> int:
        return self.pairs[0][0].dim

    def left(self) -> np.ndarray:
        """L x d array of the first members."""
        return np.array([v.coords for v, _ in self.pairs])

    def right(self) -> np.ndarray:
        return np.array([w.coords for _, w in self.pairs])


def as_weight(x) -> WeightVector:
    return x if isinstance(x, WeightVector) else WeightVector(x)


def as_coords(x) -> np.ndarray:
    return np.asarray(getattr(x, "coords", x), dtype=float)


def unit_vector(j: int, d: int) -> WeightVector:
    """e_j with 1-based j."""
    if not 1 <= j <= d:
        raise IndexError(f"index {j} outside 1..{d}")
    coords = np.zeros(d)
    coords[j - 1] = 1.0
    return WeightVector(coords)


def unit_pairs(d: int) -> WeightPairSet:
    """The family (e_j, e_j), j = 1..d, behind the trace statistics."""
    pairs = []
    for j in range(1, d + 1):
        e = unit_vector(j, d)
        pairs.append((e, e))
    return WeightPairSet(tuple(pairs), l1_bound=1.0)


def l2_rescale(w) -> WeightVector:
    """Divide by the dimension; maps l2-bounded families into the l1-bounded class."""
    coords = as_coords(w)
    return WeightVector(coords / coords.shape[0])


def inner(v, w) -> float:
    a, b = as_coords(v), as_coords(w)
    if a.shape != b.shape:
        raise ValueError("dimension mismatch")
    return float(a @ b)


def is_regular(v, w, c_lower: float) -> bool:
    return inner(v, w) >= c_lower


def coherence(vectors) -> float:
    """Largest absolute pairwise inner product."""
    if isinstance(vectors, WeightPairSet):
        vectors = [x for pair in vectors.pairs for x in pair]
    mat = np.array([as_coords(v) for v in vectors])
    if mat.shape[0] < 2:
        raise ValueError("coherence needs at least two vectors")
    gram = np.abs(mat @ mat.T)
    iu = np.triu_indices(mat.shape[0], k=1)
    return float(gram[iu].max())


class FamilyNotFound(RuntimeError):
    """Rejection sampler gave up; the requested family is too large for (d, A)."""


def near_orthogonal_family(
    d: int, m: int, A: float, seed, max_tries: int = 10**6
) -> List[WeightVector]:
    """m unit vectors in R^d with pairwise |<x_i, x_j>| <= A / sqrt(d).

    Each vector is drawn uniformly on the sphere and kept only if it is within
    the coherence bound of every vector accepted so far. ``max_tries`` caps the
    rejections spent on any single vector.
    """
    if not 0.5 <= A <= math.sqrt(d) / 2:
        raise ValueError(f"A must lie in [1/2, sqrt(d)/2] = [0.5, {math.sqrt(d) / 2}]")
    if m < 1:
        raise ValueError("m must be positive")
    rng = np.random.default_rng(seed)
    bound = A / math.sqrt(d)
    accepted = np.empty((0, d))
    batch = 256
    for k in range(m):
        tries = 0
        found = None
        while found is None:
            if tries >= max_tries:
                raise FamilyNotFound(
                    f"no vector {k + 1} of {m} after {max_tries} tries "
                    f"(d={d}, A={A})"
                )
            size = min(batch, max_tries - tries)
            draws = rng.standard_normal((size, d))
            draws /= np.linalg.norm(draws, axis=1, keepdims=True)
            tries += size
            if accepted.shape[0] == 0:
                found = draws[0]
                break
            ok = np.all(np.abs(draws @ accepted.T) <= bound, axis=1)
            if ok.any():
                found = draws[int(np.argmax(ok))]
        accepted = np.vstack([accepted, found])
    return [WeightVector(row) for row in accepted]


def sparse_l1(d: int, support: Sequence[int], values: Sequence[float]) -> WeightVector:
    support = list(support)
    values = list(values)
    if len(support) != len(values):
        raise ValueError("support and values differ in length")
    if len(set(support)) != len(support):
        raise ValueError("duplicate support index")
    coords = np.zeros(d)
    for idx, val in zip(support, values):
        if not 1 <= idx <= d:
            raise IndexError(f"support index {idx} outside 1..{d}")
        coords[idx - 1] = val
    return WeightVector(coords)


def all_pairs(vectors: Iterable) -> WeightPairSet:
    """Every unordered pair (x_i, x_j), i < j, of a vector list."""
    vecs = [as_weight(v) for v in vectors]
    pairs = [(vecs[i], vecs[j]) for i in range(len(vecs)) for j in range(i + 1, len(vecs))]
    return WeightPairSet(tuple(pairs))


def to_json(vectors) -> list:
    """Serializable form: sparse {support, values} when under half full, else dense."""
    out = []
    for v in vectors:
        c = as_coords(v)
        nz = np.flatnonzero(c)
        if len(nz) * 2 < c.shape[0]:
            out.append(
                {"d": int(c.shape[0]), "support": (nz + 1).tolist(), "values": c[nz].tolist()}
            )
        else:
            out.append({"coords": c.tolist()})
    return out


def from_json(doc) -> List[WeightVector]:
    items = doc.get("weights", doc) if isinstance(doc, dict) else doc
    out = []
    for item in items:
        if isinstance(item, dict) and "coords" in item:
            out.append(WeightVector(item["coords"]))
        elif isinstance(item, dict):
            out.append(sparse_l1(int(item["d"]), item["support"], item["values"]))
        else:
            out.append(WeightVector(item))
    return out

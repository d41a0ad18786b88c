"""Inner-product KNN over item vectors and multi-interest recommendation.

Two interchangeable backends: an exact scorer and a small-world graph index
(built and searched with negated inner product as the distance). Retrieval
for a user queries the index once per interest vector and keeps each item's
best score.
"""

from __future__ import annotations

import heapq
import json
import math

import numpy as np
import torch

__all__ = ["ExactIndex", "HnswIndex", "build_index", "save_index",
           "load_index", "knn_query", "recommend",
           "batch_item_inference", "batch_user_inference"]


def batch_item_inference(model) -> tuple[list[str], np.ndarray]:
    """Item-tower vectors z for the whole catalog, as (ids, matrix)."""
    with torch.no_grad():
        vectors = model.item_vectors().numpy()
    return list(model.item_ids), vectors


def batch_user_inference(model, sequences) -> dict[str, np.ndarray]:
    """K interest vectors per user, keyed by user id."""
    out: dict[str, np.ndarray] = {}
    with torch.no_grad():
        for seq in sequences:
            out[seq.user_id] = model.user_interests(seq).numpy()
    return out


def export_user_embeddings(user_vectors: dict[str, np.ndarray], path: str) -> None:
    """Write ``user_id<TAB>k<TAB>v0,v1,...`` rows, one per interest."""
    from .embedding import format_vector
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for user_id in sorted(user_vectors):
            for k, vec in enumerate(user_vectors[user_id]):
                fh.write(f"{user_id}\t{k}\t{format_vector(vec)}\n")


class ExactIndex:
    """Brute-force inner-product scoring; ties break by ascending item id."""

    backend = "exact"

    def __init__(self, ids: list[str], vectors: np.ndarray):
        if len(ids) != len(vectors):
            raise ValueError("ids and vectors differ in length")
        if sorted(ids) != list(ids):
            raise ValueError("item ids must be in ascending order")
        self.ids = list(ids)
        self.vectors = np.asarray(vectors, dtype=np.float64)

    def query(self, vector: np.ndarray, n: int) -> list[tuple[str, float]]:
        scores = self.vectors @ np.asarray(vector, dtype=np.float64)
        # stable argsort on -scores keeps ascending index (= ascending id,
        # ids are sorted) among equal scores
        order = np.argsort(-scores, kind="stable")[:n]
        return [(self.ids[i], float(scores[i])) for i in order]


class HnswIndex:
    """Navigable small-world graph over item vectors, inner-product metric.

    Layered graph: each element draws a geometric level; search descends
    greedily through the upper layers and runs a best-first beam of width
    ef at layer 0. Neighbor lists are pruned with the diversity heuristic
    (a candidate is kept only if it is closer to the query element than to
    every already-kept neighbor).
    """

    backend = "hnsw"

    def __init__(self, ids: list[str], vectors: np.ndarray, m: int = 16,
                 ef_construction: int = 100, ef_search: int = 64,
                 seed: int = 0, _defer_build: bool = False):
        if len(ids) != len(vectors):
            raise ValueError("ids and vectors differ in length")
        self.ids = list(ids)
        self.vectors = np.asarray(vectors, dtype=np.float64)
        self.m = m
        self.m0 = 2 * m
        self.ef_construction = ef_construction
        self.ef_search = ef_search
        self.seed = seed
        self.level_mult = 1.0 / math.log(2.0)
        self.entry_point: int | None = None
        self.max_level = -1
        # graph[level][node] -> list of neighbor node indices
        self.graph: list[dict[int, list[int]]] = []
        if not _defer_build:
            self._build()

    # -- distance -----------------------------------------------------------

    def _dist(self, q: np.ndarray, idx: int) -> float:
        return -float(self.vectors[idx] @ q)

    def _dists(self, q: np.ndarray, idxs: list[int]) -> np.ndarray:
        return -(self.vectors[idxs] @ q)

    # -- construction --------------------------------------------------------

    def _draw_level(self, rng: np.random.Generator) -> int:
        u = rng.random()
        while u <= 0.0:  # guard log(0)
            u = rng.random()
        return int(-math.log(u) * self.level_mult)

    def _build(self) -> None:
        rng = np.random.default_rng(self.seed)
        for idx in range(len(self.ids)):
            self._insert(idx, self._draw_level(rng))

    def _insert(self, idx: int, level: int) -> None:
        q = self.vectors[idx]
        while len(self.graph) <= level:
            self.graph.append({})
        for lc in range(level + 1):
            self.graph[lc][idx] = []
        if self.entry_point is None:
            self.entry_point = idx
            self.max_level = level
            return

        ep = [(self._dist(q, self.entry_point), self.entry_point)]
        for lc in range(self.max_level, level, -1):
            ep = self._search_layer(q, ep, 1, lc)
        for lc in range(min(level, self.max_level), -1, -1):
            cap = self.m0 if lc == 0 else self.m
            candidates = self._search_layer(q, ep, self.ef_construction, lc)
            chosen = self._select(q, [i for _, i in candidates], cap)
            self.graph[lc][idx] = list(chosen)
            for nbr in chosen:
                links = self.graph[lc][nbr]
                links.append(idx)
                if len(links) > cap:
                    self.graph[lc][nbr] = self._select(
                        self.vectors[nbr], links, cap)
            ep = candidates
        if level > self.max_level:
            self.max_level = level
            self.entry_point = idx

    def _select(self, q: np.ndarray, candidates: list[int], cap: int) -> list[int]:
        """Diversity-pruned neighbor selection.

        Candidates are visited nearest-first; one is kept only if it is
        closer to q than to every neighbor already kept. If fewer than cap
        survive, the pruned ones fill the remainder in distance order.
        """
        if not candidates:
            return []
        uniq = sorted(set(candidates))
        d_q = self._dists(q, uniq)
        order = np.argsort(d_q, kind="stable")
        ranked = [uniq[i] for i in order]
        if len(ranked) <= cap:
            return ranked
        # pairwise distances among candidates, computed once
        vecs = self.vectors[ranked]
        pair = -(vecs @ vecs.T)
        kept: list[int] = []
        kept_pos: list[int] = []
        pruned: list[int] = []
        for pos, idx in enumerate(ranked):
            if len(kept) >= cap:
                pruned.append(idx)
                continue
            dq = d_q[order[pos]]
            if all(pair[pos, kp] > dq for kp in kept_pos):
                kept.append(idx)
                kept_pos.append(pos)
            else:
                pruned.append(idx)
        for idx in pruned:
            if len(kept) >= cap:
                break
            kept.append(idx)
        return kept

    def _search_layer(self, q: np.ndarray, entry: list[tuple[float, int]],
                      ef: int, level: int) -> list[tuple[float, int]]:
        """Best-first search of one layer from the entry set.

        Returns up to ef (distance, node) pairs sorted by distance.
        """
        visited = {i for _, i in entry}
        candidates = list(entry)           # min-heap by distance
        heapq.heapify(candidates)
        best = [(-d, i) for d, i in entry]  # max-heap (negated) of results
        heapq.heapify(best)
        while len(best) > ef:
            heapq.heappop(best)
        while candidates:
            d, node = heapq.heappop(candidates)
            if best and d > -best[0][0] and len(best) >= ef:
                break
            for nbr in self.graph[level].get(node, ()):
                if nbr in visited:
                    continue
                visited.add(nbr)
                dn = self._dist(q, nbr)
                if len(best) < ef or dn < -best[0][0]:
                    heapq.heappush(candidates, (dn, nbr))
                    heapq.heappush(best, (-dn, nbr))
                    if len(best) > ef:
                        heapq.heappop(best)
        out = sorted((-nd, i) for nd, i in best)
        return out

    # -- queries -------------------------------------------------------------

    def query(self, vector: np.ndarray, n: int) -> list[tuple[str, float]]:
        if self.entry_point is None:
            return []
        q = np.asarray(vector, dtype=np.float64)
        ep = [(self._dist(q, self.entry_point), self.entry_point)]
        for lc in range(self.max_level, 0, -1):
            ep = self._search_layer(q, ep, 1, lc)
        found = self._search_layer(q, ep, max(self.ef_search, n), 0)
        out = [(self.ids[i], -d) for d, i in found[:n]]
        return out


def build_index(ids: list[str], vectors: np.ndarray, backend: str = "hnsw",
                m: int = 16, ef_construction: int = 100, ef_search: int = 64,
                seed: int = 0):
    if backend == "exact":
        return ExactIndex(ids, vectors)
    if backend == "hnsw":
        return HnswIndex(ids, vectors, m=m, ef_construction=ef_construction,
                         ef_search=ef_search, seed=seed)
    raise ValueError(f"unknown index backend {backend!r}")


def save_index(index, path: str) -> None:
    """Persist either backend to JSON (version-tagged)."""
    payload = {
        "version": 1,
        "backend": index.backend,
        "ids": index.ids,
        "vectors": [[float(x) for x in row] for row in index.vectors],
    }
    if index.backend == "hnsw":
        payload.update({
            "m": index.m,
            "ef_construction": index.ef_construction,
            "ef_search": index.ef_search,
            "seed": index.seed,
            "entry_point": index.entry_point,
            "max_level": index.max_level,
            "graph": [
                {str(node): nbrs for node, nbrs in sorted(layer.items())}
                for layer in index.graph
            ],
        })
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_index(path: str):
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("version") != 1:
        raise ValueError(f"{path}: unsupported index version")
    vectors = np.array(payload["vectors"], dtype=np.float64)
    if payload["backend"] == "exact":
        return ExactIndex(payload["ids"], vectors)
    if payload["backend"] != "hnsw":
        raise ValueError(f"{path}: unknown backend {payload['backend']!r}")
    index = HnswIndex(payload["ids"], vectors, m=payload["m"],
                      ef_construction=payload["ef_construction"],
                      ef_search=payload["ef_search"], seed=payload["seed"],
                      _defer_build=True)
    index.entry_point = payload["entry_point"]
    index.max_level = payload["max_level"]
    index.graph = [
        {int(node): list(nbrs) for node, nbrs in layer.items()}
        for layer in payload["graph"]
    ]
    return index


def knn_query(index, vector, n: int) -> list[tuple[str, float]]:
    """Top-n (item, inner product) for one query vector."""
    return index.query(np.asarray(vector, dtype=np.float64), n)


def recommend(interest_vectors, index, top_n: int = 20,
              n_per_interest: int = 50) -> list[tuple[str, float]]:
    """Query once per interest, keep each item's best score, return top_n.

    n_per_interest must be >= top_n: with an exact backend the per-interest
    unions then provably contain the global max-over-interests top_n.
    """
    if n_per_interest < top_n:
        raise ValueError("n_per_interest must be >= top_n")
    best: dict[str, float] = {}
    for vec in interest_vectors:
        for item, score in knn_query(index, vec, n_per_interest):
            if item not in best or score > best[item]:
                best[item] = score
    ranked = sorted(best.items(), key=lambda kv: (-kv[1], kv[0]))
    return ranked[:top_n]

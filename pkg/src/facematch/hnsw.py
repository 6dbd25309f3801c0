"""Hierarchical navigable small-world graph for approximate top-k search.

The graph stores row indices into an external vector matrix owned by the
caller; it never copies vectors. Layer 0 holds every row in a fixed-width
adjacency matrix and is searched by numba-compiled kernels (the hot path:
building 10k vectors runs tens of millions of dot products). Upper layers
hold a few percent of the rows and are plain Python dicts.

Level assignment is derived from a hash of the caller-supplied key instead
of a live RNG, so rebuilding a store from the same ids reproduces the same
hierarchy.
"""

from __future__ import annotations

import hashlib
import math
import struct

import numpy as np
from numba import njit

_LEVEL_CAP = 32


def level_from_key(key: str, m: int) -> int:
    """Deterministic exponentially distributed level for a vector id."""
    digest = hashlib.sha256(key.encode("utf-8")).digest()
    u = (int.from_bytes(digest[:8], "little") + 1) / 2.0**64
    level = int(-math.log(u) / math.log(m))
    return min(level, _LEVEL_CAP)


# ---------------------------------------------------------------------------
# numba kernels: array-based heaps + layer-0 ef-search + neighbor heuristic
# ---------------------------------------------------------------------------


@njit(cache=True)
def _minheap_push(hd, hi, n, d, i):
    hd[n] = d
    hi[n] = i
    k = n
    while k > 0:
        p = (k - 1) >> 1
        if hd[p] <= hd[k]:
            break
        hd[p], hd[k] = hd[k], hd[p]
        hi[p], hi[k] = hi[k], hi[p]
        k = p
    return n + 1


@njit(cache=True)
def _minheap_pop(hd, hi, n):
    d = hd[0]
    i = hi[0]
    n -= 1
    hd[0] = hd[n]
    hi[0] = hi[n]
    k = 0
    while True:
        left = 2 * k + 1
        small = k
        if left < n and hd[left] < hd[small]:
            small = left
        right = left + 1
        if right < n and hd[right] < hd[small]:
            small = right
        if small == k:
            break
        hd[small], hd[k] = hd[k], hd[small]
        hi[small], hi[k] = hi[k], hi[small]
        k = small
    return d, i, n


@njit(cache=True)
def _maxheap_push(hd, hi, n, d, i):
    hd[n] = d
    hi[n] = i
    k = n
    while k > 0:
        p = (k - 1) >> 1
        if hd[p] >= hd[k]:
            break
        hd[p], hd[k] = hd[k], hd[p]
        hi[p], hi[k] = hi[k], hi[p]
        k = p
    return n + 1


@njit(cache=True)
def _maxheap_siftdown(hd, hi, n):
    k = 0
    while True:
        left = 2 * k + 1
        big = k
        if left < n and hd[left] > hd[big]:
            big = left
        right = left + 1
        if right < n and hd[right] > hd[big]:
            big = right
        if big == k:
            break
        hd[big], hd[k] = hd[k], hd[big]
        hi[big], hi[k] = hi[k], hi[big]
        k = big


@njit(cache=True, fastmath=True)
def _dist(vectors, i, q):
    row = vectors[i]
    acc = np.float32(0.0)
    for c in range(q.shape[0]):
        acc += row[c] * q[c]
    return np.float32(1.0) - acc


@njit(cache=True, fastmath=True)
def _search_layer0(vectors, adj, deg, marks, mark, entries, q, ef):
    """Best-first ef-search over the base layer.

    Returns (distances, rows) sorted ascending by distance, at most ef long.
    Candidates are only expanded while they can improve the current result
    set, which bounds the frontier.
    """
    cap = 4 * ef + 64
    cd = np.empty(cap, np.float32)
    ci = np.empty(cap, np.int32)
    cn = 0
    rd = np.empty(ef, np.float32)
    ri = np.empty(ef, np.int32)
    rn = 0

    for t in range(entries.shape[0]):
        e = entries[t]
        if marks[e] == mark:
            continue
        marks[e] = mark
        d = _dist(vectors, e, q)
        if cn >= cd.shape[0]:
            ncd = np.empty(cd.shape[0] * 2, np.float32)
            nci = np.empty(cd.shape[0] * 2, np.int32)
            ncd[:cn] = cd[:cn]
            nci[:cn] = ci[:cn]
            cd, ci = ncd, nci
        cn = _minheap_push(cd, ci, cn, d, e)
        if rn < ef:
            rn = _maxheap_push(rd, ri, rn, d, e)
        elif d < rd[0]:
            rd[0] = d
            ri[0] = e
            _maxheap_siftdown(rd, ri, rn)

    while cn > 0:
        d, cur, cn = _minheap_pop(cd, ci, cn)
        if rn >= ef and d > rd[0]:
            break
        for j in range(deg[cur]):
            nb = adj[cur, j]
            if marks[nb] == mark:
                continue
            marks[nb] = mark
            dn = _dist(vectors, nb, q)
            if rn < ef:
                rn = _maxheap_push(rd, ri, rn, dn, nb)
            elif dn < rd[0]:
                rd[0] = dn
                ri[0] = nb
                _maxheap_siftdown(rd, ri, rn)
            else:
                continue
            if cn >= cd.shape[0]:
                ncd = np.empty(cd.shape[0] * 2, np.float32)
                nci = np.empty(cd.shape[0] * 2, np.int32)
                ncd[:cn] = cd[:cn]
                nci[:cn] = ci[:cn]
                cd, ci = ncd, nci
            cn = _minheap_push(cd, ci, cn, dn, nb)

    out_d = np.empty(rn, np.float32)
    out_i = np.empty(rn, np.int32)
    pos = rn - 1
    while rn > 0:
        out_d[pos] = rd[0]
        out_i[pos] = ri[0]
        rn -= 1
        rd[0] = rd[rn]
        ri[0] = ri[rn]
        _maxheap_siftdown(rd, ri, rn)
        pos -= 1
    return out_d, out_i


@njit(cache=True, fastmath=True)
def _select_heuristic(vectors, cand_d, cand_i, m):
    """Diversity-aware neighbor selection (candidates sorted by distance).

    A candidate is kept only if it is closer to the query than to every
    neighbor already kept; remaining slots are refilled from the pruned
    candidates, closest first.
    """
    n = cand_i.shape[0]
    sel = np.empty(n, np.int32)
    nsel = 0
    disc = np.empty(n, np.int32)
    ndisc = 0
    for idx in range(n):
        if nsel >= m:
            break
        e = cand_i[idx]
        de = cand_d[idx]
        keep = True
        row_e = vectors[e]
        for s in range(nsel):
            row_s = vectors[sel[s]]
            acc = np.float32(0.0)
            for c in range(row_e.shape[0]):
                acc += row_e[c] * row_s[c]
            if np.float32(1.0) - acc < de:
                keep = False
                break
        if keep:
            sel[nsel] = e
            nsel += 1
        else:
            disc[ndisc] = e
            ndisc += 1
    t = 0
    while nsel < m and t < ndisc:
        sel[nsel] = disc[t]
        nsel += 1
        t += 1
    return sel[:nsel].copy()


# ---------------------------------------------------------------------------
# graph structure
# ---------------------------------------------------------------------------


class HnswGraph:
    """Incrementally built HNSW graph over rows of an external matrix."""

    def __init__(self, m: int = 16, ef_construction: int = 200):
        if m < 1 or ef_construction < 1:
            raise ValueError("hnsw parameters must be >= 1")
        self.m = m
        self.m0 = 2 * m
        self.ef_construction = ef_construction
        self.entry = -1
        self.max_level = 0
        self.levels: list[int] = []
        # upper[lv - 1] maps row -> neighbor rows at layer lv
        self.upper: list[dict[int, list[int]]] = []
        self._adj0 = np.zeros((0, self.m0), np.int32)
        self._deg0 = np.zeros(0, np.int32)
        self._marks = np.zeros(0, np.int64)
        self._mark = 0

    def __len__(self) -> int:
        return len(self.levels)

    def _ensure_capacity(self, needed: int) -> None:
        cap = self._adj0.shape[0]
        if needed <= cap:
            return
        new_cap = max(needed, int(cap * 1.5) + 16)
        adj = np.zeros((new_cap, self.m0), np.int32)
        adj[:cap] = self._adj0
        deg = np.zeros(new_cap, np.int32)
        deg[:cap] = self._deg0
        marks = np.zeros(new_cap, np.int64)
        marks[:cap] = self._marks
        self._adj0, self._deg0, self._marks = adj, deg, marks

    # -- construction -------------------------------------------------------

    def add(self, vectors: np.ndarray, row: int, level: int) -> None:
        """Insert row (must equal the current node count) at the given level."""
        if row != len(self.levels):
            raise ValueError("rows must be added in order")
        self._ensure_capacity(row + 1)
        self.levels.append(level)
        self._deg0[row] = 0
        for lv in range(1, level + 1):
            while len(self.upper) < lv:
                self.upper.append({})
            self.upper[lv - 1][row] = []
        if self.entry < 0:
            self.entry = row
            self.max_level = level
            return
        self._connect(vectors, row, level)
        if level > self.max_level:
            self.max_level = level
            self.entry = row

    def relink(self, vectors: np.ndarray, row: int) -> None:
        """Refresh a node's edges after its vector changed in place.

        Old edges are kept (they stay harmless for routing); new edges are
        added as on insert so searches for the new vector terminate at it.
        """
        if self.entry == row and len(self.levels) == 1:
            return
        self._connect(vectors, row, self.levels[row])

    def _connect(self, vectors: np.ndarray, row: int, level: int) -> None:
        q = np.ascontiguousarray(vectors[row])
        ep = self.entry
        for lv in range(self.max_level, level, -1):
            ep = self._greedy_upper(vectors, q, ep, lv, skip=row)
        entries = [ep]
        for lv in range(min(level, self.max_level), 0, -1):
            cand = self._search_upper(vectors, q, entries, lv, self.ef_construction)
            cand = [(d, i) for d, i in cand if i != row]
            if cand:
                sel = self._heuristic(vectors, cand, self.m)
                self._link_upper(vectors, row, sel, lv)
                entries = [i for _, i in cand]
        entries_arr = np.array(entries, np.int32)
        self._mark += 1
        dists, rows = _search_layer0(
            vectors, self._adj0, self._deg0, self._marks, self._mark,
            entries_arr, q, self.ef_construction,
        )
        keep = rows != row
        dists, rows = dists[keep], rows[keep]
        if rows.size == 0:
            return
        sel = _select_heuristic(vectors, dists, rows, self.m)
        self._link0(vectors, row, sel)

    def _link0(self, vectors: np.ndarray, row: int, sel: np.ndarray) -> None:
        adj, deg = self._adj0, self._deg0
        for s in sel:
            s = int(s)
            if not (adj[row, : deg[row]] == s).any() and deg[row] < self.m0:
                adj[row, deg[row]] = s
                deg[row] += 1
            if (adj[s, : deg[s]] == row).any():
                continue
            if deg[s] < self.m0:
                adj[s, deg[s]] = row
                deg[s] += 1
            else:
                # full: re-select the m0 best among current neighbors + row
                cand_rows = np.empty(deg[s] + 1, np.int32)
                cand_rows[: deg[s]] = adj[s, : deg[s]]
                cand_rows[deg[s]] = row
                base = np.ascontiguousarray(vectors[s])
                cand_d = (1.0 - vectors[cand_rows] @ base).astype(np.float32)
                order = np.argsort(cand_d, kind="stable")
                chosen = _select_heuristic(
                    vectors, cand_d[order], cand_rows[order], self.m0
                )
                deg[s] = len(chosen)
                adj[s, : len(chosen)] = chosen

    def _link_upper(self, vectors: np.ndarray, row: int, sel: list[int], lv: int) -> None:
        graph = self.upper[lv - 1]
        mine = graph.setdefault(row, [])
        for s in sel:
            if s not in mine:
                mine.append(s)
            theirs = graph.setdefault(s, [])
            if row in theirs:
                continue
            theirs.append(row)
            if len(theirs) > self.m:
                base = np.ascontiguousarray(vectors[s])
                cand_rows = np.array(theirs, np.int32)
                cand_d = (1.0 - vectors[cand_rows] @ base).astype(np.float32)
                order = np.argsort(cand_d, kind="stable")
                chosen = _select_heuristic(
                    vectors, cand_d[order], cand_rows[order], self.m
                )
                graph[s] = [int(c) for c in chosen]
        if len(mine) > self.m:
            graph[row] = mine[: self.m]

    def _heuristic(self, vectors, cand: list[tuple[float, int]], m: int) -> list[int]:
        cand_d = np.array([d for d, _ in cand], np.float32)
        cand_i = np.array([i for _, i in cand], np.int32)
        return [int(i) for i in _select_heuristic(vectors, cand_d, cand_i, m)]

    def _greedy_upper(self, vectors, q, ep: int, lv: int, skip: int = -1) -> int:
        graph = self.upper[lv - 1]
        cur = ep
        cur_d = float(1.0 - vectors[cur] @ q)
        improved = True
        while improved:
            improved = False
            for nb in graph.get(cur, ()):
                if nb == skip:
                    continue
                d = float(1.0 - vectors[nb] @ q)
                if d < cur_d:
                    cur, cur_d = nb, d
                    improved = True
        return cur

    def _search_upper(self, vectors, q, entries: list[int], lv: int, ef: int):
        import heapq

        graph = self.upper[lv - 1]
        visited = set(entries)
        cand: list[tuple[float, int]] = []
        res: list[tuple[float, int]] = []  # max-heap via negated distance
        for e in entries:
            d = float(1.0 - vectors[e] @ q)
            heapq.heappush(cand, (d, e))
            heapq.heappush(res, (-d, e))
            if len(res) > ef:
                heapq.heappop(res)
        while cand:
            d, cur = heapq.heappop(cand)
            if len(res) >= ef and d > -res[0][0]:
                break
            for nb in graph.get(cur, ()):
                if nb in visited:
                    continue
                visited.add(nb)
                dn = float(1.0 - vectors[nb] @ q)
                if len(res) < ef:
                    heapq.heappush(res, (-dn, nb))
                    heapq.heappush(cand, (dn, nb))
                elif dn < -res[0][0]:
                    heapq.heapreplace(res, (-dn, nb))
                    heapq.heappush(cand, (dn, nb))
        return sorted((-nd, i) for nd, i in res)

    # -- queries ------------------------------------------------------------

    def search(self, vectors: np.ndarray, q: np.ndarray, ef: int) -> np.ndarray:
        """Rows of the approximate nearest neighbors, closest first."""
        if self.entry < 0:
            return np.empty(0, np.int32)
        q = np.ascontiguousarray(q, np.float32)
        ep = self.entry
        for lv in range(self.max_level, 0, -1):
            ep = self._greedy_upper(vectors, q, ep, lv)
        # fresh scratch per call: searches may run concurrently under a read lock
        marks = np.zeros(len(self.levels), np.int64)
        _, rows = _search_layer0(
            vectors, self._adj0, self._deg0, marks, 1,
            np.array([ep], np.int32), q, max(ef, 1),
        )
        return rows

    # -- persistence --------------------------------------------------------

    def serialize(self) -> bytes:
        """Adjacency lists as little-endian 32-bit ids, layer 0 then upper."""
        count = len(self.levels)
        out = bytearray()
        entry = self.entry if self.entry >= 0 else 0xFFFFFFFF
        out += struct.pack("<III", count, entry, self.max_level)
        out += np.asarray(self.levels, "<i4").tobytes()
        for row in range(count):
            d = int(self._deg0[row])
            out += struct.pack("<I", d)
            out += self._adj0[row, :d].astype("<i4").tobytes()
        for lv in range(1, self.max_level + 1):
            nodes = sorted(self.upper[lv - 1]) if lv <= len(self.upper) else []
            out += struct.pack("<I", len(nodes))
            for node in nodes:
                nbrs = self.upper[lv - 1][node]
                out += struct.pack("<II", node, len(nbrs))
                out += np.asarray(nbrs, "<i4").tobytes()
        return bytes(out)

    @classmethod
    def deserialize(cls, data: bytes, m: int, ef_construction: int) -> "HnswGraph":
        graph = cls(m=m, ef_construction=ef_construction)
        view = memoryview(data)
        offset = 0

        def take(n: int) -> memoryview:
            nonlocal offset
            if offset + n > len(view):
                raise ValueError("graph data truncated")
            chunk = view[offset : offset + n]
            offset += n
            return chunk

        count, entry, max_level = struct.unpack("<III", take(12))
        levels = np.frombuffer(take(4 * count), "<i4")
        graph.levels = [int(v) for v in levels]
        graph.entry = -1 if entry == 0xFFFFFFFF else int(entry)
        graph.max_level = int(max_level)
        graph._ensure_capacity(count)
        for row in range(count):
            (d,) = struct.unpack("<I", take(4))
            if d > graph.m0:
                raise ValueError("adjacency degree exceeds limit")
            nbrs = np.frombuffer(take(4 * d), "<i4")
            graph._adj0[row, :d] = nbrs
            graph._deg0[row] = d
        graph.upper = [{} for _ in range(max_level)]
        for lv in range(1, max_level + 1):
            (node_count,) = struct.unpack("<I", take(4))
            for _ in range(node_count):
                node, d = struct.unpack("<II", take(8))
                nbrs = np.frombuffer(take(4 * d), "<i4")
                graph.upper[lv - 1][int(node)] = [int(v) for v in nbrs]
        if offset != len(view):
            raise ValueError("trailing bytes after graph data")
        bad = [r for r in range(count) if (graph._adj0[r, : graph._deg0[r]] >= count).any()]
        if bad or (graph.entry >= count and graph.entry >= 0):
            raise ValueError("adjacency references unknown rows")
        return graph

"""Per-node, per-dimension ordered multisets of center coordinates.

Pairs ``(coordinate, center index)`` are ordered lexicographically.  Instead
of storing the tuples, each pair is replaced by its global rank in that
order, computed once per center set by :class:`CoordinateRanks`; the
``rank`` table doubles as the locator from a center index to its key in
every dimension.  Each dimension's keys live in a ``SortedList`` so insert,
delete, rank, min and max are all logarithmic.
"""
from __future__ import annotations

from bisect import bisect_left

import numpy as np
from sortedcontainers import SortedList


class CoordinateRanks:
    def __init__(self, centers: np.ndarray):
        self.centers = centers
        self.k, self.d = centers.shape
        # stable sort breaks coordinate ties by center index
        self.order = np.argsort(centers, axis=0, kind="stable")
        cols = np.arange(self.d)
        self.sorted_values = centers[self.order, cols]
        self.rank = np.empty_like(self.order)
        self.rank[self.order, cols] = np.arange(self.k)[:, None]
        # plain-list copies: scalar lookups in the build loop are much cheaper on lists
        self.columns = self.sorted_values.T.tolist()

    def count_below_global(self, r: int, z: float) -> int:
        return bisect_left(self.columns[r], z)

    def hits_coordinate(self, r: int, z: float) -> bool:
        col = self.columns[r]
        g = bisect_left(col, z)
        return g < self.k and col[g] == z


class OrderedCoordinateIndex:
    """The centers of one tree node, kept sorted in every dimension."""

    def __init__(self, ranks: CoordinateRanks, members):
        self.ranks = ranks
        members = np.asarray(members, dtype=np.int64)
        self.lists = [SortedList(ranks.rank[members, r].tolist()) for r in range(ranks.d)]

    def __len__(self) -> int:
        return len(self.lists[0])

    def members(self) -> np.ndarray:
        keys = np.fromiter(self.lists[0], dtype=np.int64, count=len(self))
        return self.ranks.order[keys, 0]

    def min(self, r: int) -> float:
        return self.ranks.columns[r][self.lists[r][0]]

    def max(self, r: int) -> float:
        return self.ranks.columns[r][self.lists[r][-1]]

    def box(self) -> tuple[list[float], list[float]]:
        cols = self.ranks.columns
        lo = [cols[r][sl[0]] for r, sl in enumerate(self.lists)]
        hi = [cols[r][sl[-1]] for r, sl in enumerate(self.lists)]
        return lo, hi

    def count_below(self, r: int, z: float) -> int:
        """Number of member centers with coordinate ``< z`` in dimension ``r``."""
        return self.lists[r].bisect_left(self.ranks.count_below_global(r, z))

    def add(self, i: int) -> None:
        for r, sl in enumerate(self.lists):
            sl.add(int(self.ranks.rank[i, r]))

    def remove(self, i: int) -> None:
        for r, sl in enumerate(self.lists):
            sl.remove(int(self.ranks.rank[i, r]))

    def split_off(self, r: int, count: int, lower: bool) -> "OrderedCoordinateIndex":
        """Move the ``count`` lowest (or highest) members along ``r`` into a new index.

        Cost is O(d · count · log k): the moved centers are deleted from every
        dimension of this index and bulk-loaded into the new one.
        """
        sl = self.lists[r]
        keys = list(sl.islice(0, count)) if lower else list(sl.islice(len(sl) - count, len(sl)))
        moved = self.ranks.order[np.array(keys, dtype=np.int64), r]
        rank = self.ranks.rank
        for rr, lst in enumerate(self.lists):
            for key in rank[moved, rr].tolist():
                lst.remove(key)
        return OrderedCoordinateIndex(self.ranks, moved)

"""Binarized user-item relations parsed from MovieLens-format rating files."""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp

__all__ = [
    "BinaryRelation",
    "SplitSpec",
    "RatingsParseError",
    "SplitWarning",
    "parse_ratings",
    "write_ratings",
    "split",
    "load_split_files",
]


class RatingsParseError(ValueError):
    """Raised for malformed or empty rating input; carries the line number."""

    def __init__(self, message: str, line_no: int | None = None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class SplitWarning(UserWarning):
    """A split left some users without training entries."""


@dataclass(frozen=True, eq=False)
class BinaryRelation:
    """Immutable sparse boolean incidence between users (rows) and items (columns).

    Entry (u, i) present means user u rated item i, whatever the rating was.
    Dense indices are assigned in ascending external-id order, so index order
    and external-id order agree everywhere downstream.
    """

    user_ids: np.ndarray  # (n,) external user ids, strictly ascending
    item_ids: np.ndarray  # (m,) external item ids, strictly ascending
    matrix: sp.csr_matrix  # n x m, int8 ones

    @property
    def n(self) -> int:
        return len(self.user_ids)

    @property
    def m(self) -> int:
        return len(self.item_ids)

    @property
    def entry_count(self) -> int:
        return int(self.matrix.nnz)

    @cached_property
    def user_index(self) -> dict[int, int]:
        return {int(u): k for k, u in enumerate(self.user_ids)}

    @cached_property
    def item_index(self) -> dict[int, int]:
        return {int(i): k for k, i in enumerate(self.item_ids)}

    @cached_property
    def _csc(self) -> sp.csc_matrix:
        return self.matrix.tocsc()

    def items_of(self, user: int) -> np.ndarray:
        """Item indices in the profile of user index `user`."""
        lo, hi = self.matrix.indptr[user], self.matrix.indptr[user + 1]
        return self.matrix.indices[lo:hi]

    def users_of(self, item: int) -> np.ndarray:
        lo, hi = self._csc.indptr[item], self._csc.indptr[item + 1]
        return self._csc.indices[lo:hi]

    def pairs(self) -> np.ndarray:
        """All (user_idx, item_idx) entries as an (N, 2) array in row-major order."""
        coo = self.matrix.tocoo()
        order = np.lexsort((coo.col, coo.row))
        return np.column_stack([coo.row[order], coo.col[order]]).astype(np.int64)

    def pair_set(self) -> set[tuple[int, int]]:
        return {(int(a), int(b)) for a, b in self.pairs()}

    @classmethod
    def from_pairs(cls, user_ids, item_ids, pairs: np.ndarray) -> "BinaryRelation":
        user_ids = np.asarray(user_ids, dtype=np.int64)
        item_ids = np.asarray(item_ids, dtype=np.int64)
        pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
        data = np.ones(len(pairs), dtype=np.int8)
        matrix = sp.coo_matrix(
            (data, (pairs[:, 0], pairs[:, 1])),
            shape=(len(user_ids), len(item_ids)),
        ).tocsr()
        matrix.data[:] = 1  # collapse duplicates back to binary
        return cls(user_ids=user_ids, item_ids=item_ids, matrix=matrix)


def _iter_lines(source):
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="latin-1") as fh:
            yield from fh
    else:
        yield from source


def parse_ratings(source, *, min_rating: int | None = None) -> BinaryRelation:
    """Parse tab-separated `user item rating timestamp` lines into a relation.

    Every distinct rated (user, item) pair becomes one binary entry; the
    rating value is ignored unless `min_rating` is given, in which case only
    lines with rating >= min_rating count as entries.
    """
    users: list[int] = []
    items: list[int] = []
    for line_no, line in enumerate(_iter_lines(source), start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) != 4:
            raise RatingsParseError(
                f"expected 4 tab-separated fields, got {len(fields)}", line_no
            )
        try:
            user, item, rating = int(fields[0]), int(fields[1]), int(fields[2])
            int(fields[3])
        except ValueError:
            raise RatingsParseError(
                f"non-integer field in {fields!r}", line_no
            ) from None
        if min_rating is not None and rating < min_rating:
            continue
        users.append(user)
        items.append(item)
    if not users:
        raise RatingsParseError("no rating entries in input")
    users_arr = np.asarray(users, dtype=np.int64)
    items_arr = np.asarray(items, dtype=np.int64)
    user_ids, urow = np.unique(users_arr, return_inverse=True)
    item_ids, icol = np.unique(items_arr, return_inverse=True)
    pairs = np.unique(np.column_stack([urow, icol]), axis=0)
    return BinaryRelation.from_pairs(user_ids, item_ids, pairs)


def write_ratings(relation: BinaryRelation, path_or_file) -> None:
    """Serialize the pair set back to MovieLens format (rating 1, timestamp 0)."""
    close = False
    if hasattr(path_or_file, "write"):
        fh = path_or_file
    else:
        fh = open(path_or_file, "w", encoding="latin-1")
        close = True
    try:
        for u, i in relation.pairs():
            fh.write(f"{relation.user_ids[u]}\t{relation.item_ids[i]}\t1\t0\n")
    finally:
        if close:
            fh.close()


@dataclass(frozen=True)
class SplitSpec:
    """How to partition a relation into train and test pair sets."""

    method: str = "random-holdout"  # "random-holdout" | "file-pair"
    holdout_fraction: float = 0.2
    seed: int = 0
    base_path: str | os.PathLike | None = None
    test_path: str | os.PathLike | None = None

    def __post_init__(self):
        if self.method not in ("random-holdout", "file-pair"):
            raise ValueError(f"unknown split method {self.method!r}")
        if self.method == "random-holdout" and not 0.0 < self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in (0, 1)")
        if self.method == "file-pair" and (self.base_path is None or self.test_path is None):
            raise ValueError("file-pair split needs base_path and test_path")

    @classmethod
    def random(cls, holdout_fraction: float = 0.2, seed: int = 0) -> "SplitSpec":
        return cls(method="random-holdout", holdout_fraction=holdout_fraction, seed=seed)

    @classmethod
    def file_pair(cls, base_path, test_path) -> "SplitSpec":
        return cls(method="file-pair", base_path=base_path, test_path=test_path)


def _warn_empty_profiles(train: BinaryRelation) -> None:
    empty = int((np.diff(train.matrix.indptr) == 0).sum())
    if empty:
        warnings.warn(
            f"{empty} user(s) have an empty training profile and will be "
            "skipped in per-user evaluation",
            SplitWarning,
            stacklevel=3,
        )


def split(relation: BinaryRelation, spec: SplitSpec) -> tuple[BinaryRelation, BinaryRelation]:
    """Partition the relation's pairs; both halves share n, m and index maps."""
    if spec.method == "random-holdout":
        pairs = relation.pairs()
        n_pairs = len(pairs)
        if n_pairs < 2:
            raise ValueError("cannot split a relation with fewer than 2 entries")
        n_test = int(round(spec.holdout_fraction * n_pairs))
        n_test = min(max(n_test, 1), n_pairs - 1)
        perm = np.random.default_rng(spec.seed).permutation(n_pairs)
        test_pairs = pairs[np.sort(perm[:n_test])]
        train_pairs = pairs[np.sort(perm[n_test:])]
    else:
        base_raw = _read_pair_file(spec.base_path, relation)
        test_raw = _read_pair_file(spec.test_path, relation)
        base_set = {tuple(p) for p in base_raw}
        test_set = {tuple(p) for p in test_raw}
        if base_set & test_set:
            raise ValueError("file-pair split has overlapping train/test pairs")
        if base_set | test_set != relation.pair_set():
            raise ValueError("file-pair split does not cover the relation exactly")
        train_pairs = np.array(sorted(base_set), dtype=np.int64)
        test_pairs = np.array(sorted(test_set), dtype=np.int64)
    train = BinaryRelation.from_pairs(relation.user_ids, relation.item_ids, train_pairs)
    test = BinaryRelation.from_pairs(relation.user_ids, relation.item_ids, test_pairs)
    _warn_empty_profiles(train)
    return train, test


def _read_pair_file(path, relation: BinaryRelation) -> np.ndarray:
    raw = parse_ratings(path)
    try:
        rows = [relation.user_index[int(u)] for u in raw.user_ids]
        cols = [relation.item_index[int(i)] for i in raw.item_ids]
    except KeyError as exc:
        raise ValueError(f"id {exc.args[0]} in {path} not present in relation") from None
    rmap = np.asarray(rows, dtype=np.int64)
    cmap = np.asarray(cols, dtype=np.int64)
    pairs = raw.pairs()
    return np.column_stack([rmap[pairs[:, 0]], cmap[pairs[:, 1]]])


def load_split_files(base_path, test_path):
    """Parse a pre-split pair of rating files sharing one id universe.

    Returns (full, train, test) relations with identical index maps built
    from the union of both files.
    """
    base_lines = list(_iter_lines(base_path))
    test_lines = list(_iter_lines(test_path))
    full = parse_ratings(base_lines + test_lines)
    train, test = split(full, SplitSpec.file_pair(base_lines, test_lines))
    return full, train, test

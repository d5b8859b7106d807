"""Hot kernels: the pairwise ≈ table and its equivalence closure.

The table for one agent is stored bucket by bucket.  Two sequences can only
be related when they share a bucket key (the agent's own calls, with their
positions for privacy p1/p2), so each bucket holds a dense square block and
pairs across buckets are implicitly false.  A single bucket covering the
whole universe gives the unbucketed table.

Each kernel has a numba implementation and a numpy implementation with
identical results; ``backend`` selects one, defaulting to
:data:`gossipscope._accel.USE_NUMBA`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from ._accel import njit, resolve_backend

AFTER, BEFORE = 0, 1


@dataclass
class Buckets:
    members: np.ndarray  # universe indices grouped by bucket, ascending within a bucket
    start: np.ndarray  # bucket b occupies members[start[b]:start[b+1]]
    size: np.ndarray
    table_offset: np.ndarray  # flat offset of bucket b's square block
    bid: np.ndarray  # bucket of each universe member
    loc: np.ndarray  # position of each member inside its bucket

    @property
    def pairs(self) -> int:
        return int(np.sum(self.size.astype(np.int64) ** 2))


def bucket_keys(offsets, parent, last, involved, privacy: int, bucketed: bool = True) -> np.ndarray:
    """Integer bucket key per member; a parent's key is never larger than its child's.

    p3 keys are the agent's own calls in order; p1/p2 keys also record the
    positions of the agent's calls (and hence the length).
    """
    size = len(parent)
    key = np.zeros(size, dtype=np.int64)
    if not bucketed:
        return key
    interned = {}
    m1 = len(involved) + 1
    for k in range(1, len(offsets) - 1):
        lo, hi = int(offsets[k]), int(offsets[k + 1])
        tok = last[lo:hi]
        inv = involved[tok]
        pk = key[parent[lo:hi]]
        if privacy == 3:
            combo = np.where(inv, pk * m1 + tok + 1, -1)
        else:
            combo = pk * m1 + np.where(inv, tok + 1, 0)
        uniq, back = np.unique(combo, return_inverse=True)
        ids = np.array([-1 if u < 0 else interned.setdefault(u, len(interned) + 1) for u in uniq.tolist()],
                       dtype=np.int64)
        ids = ids[back]
        key[lo:hi] = np.where(ids >= 0, ids, pk)
    return key


def make_buckets(key: np.ndarray) -> Buckets:
    order = np.argsort(key, kind="stable")
    sorted_keys = key[order]
    boundaries = np.flatnonzero(np.diff(sorted_keys)) + 1
    start = np.concatenate([[0], boundaries, [len(key)]]).astype(np.int64)
    size = np.diff(start)
    table_offset = np.concatenate([[0], np.cumsum(size.astype(np.int64) ** 2)[:-1]]).astype(np.int64)
    bid = np.empty(len(key), dtype=np.int64)
    loc = np.empty(len(key), dtype=np.int64)
    for b in range(len(size)):
        idx = order[start[b] : start[b + 1]]
        bid[idx] = b
        loc[idx] = np.arange(len(idx))
    return Buckets(order.astype(np.int64), start, size, table_offset, bid, loc)


# ---------------------------------------------------------------------------
# ≈ table


@njit(cache=True)
def _lookup_nb(flat, bid, loc, bsize, boff, x, y):
    bx = bid[x]
    if bx != bid[y]:
        return False
    return flat[boff[bx] + loc[x] * bsize[bx] + loc[y]]


@njit(cache=True)
def _approx_nb(parent, last, involved, affected, alpha_val, beta_val, privacy, observance,
               members, start, bsize, boff, bid, loc, flat):
    nb = len(bsize)
    for b in range(nb):
        s = bsize[b]
        off = boff[b]
        base = start[b]
        for li in range(s):
            i = members[base + li]
            ci = last[i]
            pi = parent[i]
            for lj in range(s):
                j = members[base + lj]
                cj = last[j]
                pj = parent[j]
                v = False
                if ci < 0 and cj < 0:
                    v = True
                elif privacy == 3:
                    if ci >= 0 and not involved[ci]:
                        v = _lookup_nb(flat, bid, loc, bsize, boff, pi, j)
                    if not v and cj >= 0 and not involved[cj]:
                        v = _lookup_nb(flat, bid, loc, bsize, boff, i, pj)
                elif ci >= 0 and cj >= 0 and not involved[ci] and not involved[cj]:
                    if privacy == 2 or ci == cj:
                        v = _lookup_nb(flat, bid, loc, bsize, boff, pi, pj)
                if not v and ci >= 0 and ci == cj and involved[ci]:
                    if not affected[ci]:
                        ok = True
                    elif observance == AFTER:
                        ok = alpha_val[i] == alpha_val[j]
                    else:
                        ok = beta_val[i] == beta_val[j]
                    if ok:
                        v = _lookup_nb(flat, bid, loc, bsize, boff, pi, pj)
                flat[off + li * s + lj] = v
    return flat


def _lookup_np(flat, bk: Buckets, xs, ys):
    bx = bk.bid[xs]
    by = bk.bid[ys]
    same = bx[:, None] == by[None, :]
    idx = bk.table_offset[bx][:, None] + bk.loc[xs][:, None] * bk.size[bx][:, None] + bk.loc[ys][None, :]
    idx = np.where(same, idx, 0)
    return flat[idx] & same


def _approx_np(parent, last, length, involved, affected, alpha_val, beta_val, privacy, observance,
               bk: Buckets, flat):
    for b in range(len(bk.size)):
        s = int(bk.size[b])
        mem = bk.members[bk.start[b] : bk.start[b + 1]]
        block = flat[bk.table_offset[b] : bk.table_offset[b] + s * s].reshape(s, s)
        lens = length[mem]
        cuts = np.flatnonzero(np.diff(lens)) + 1
        groups = [slice(lo, hi) for lo, hi in zip(np.r_[0, cuts], np.r_[cuts, s])]
        for gr in groups:
            R = mem[gr]
            ci = last[R]
            pi = parent[R]
            for gc in groups:
                C = mem[gc]
                cj = last[C]
                pj = parent[C]
                v = np.zeros((len(R), len(C)), dtype=bool)
                has_i = ci[0] >= 0
                has_j = cj[0] >= 0
                if not has_i and not has_j:
                    v[:] = True
                elif privacy == 3:
                    if has_i:
                        v |= (~involved[ci])[:, None] & _lookup_np(flat, bk, pi, C)
                    if has_j:
                        v |= (~involved[cj])[None, :] & _lookup_np(flat, bk, R, pj)
                if has_i and has_j:
                    P = _lookup_np(flat, bk, pi, pj)
                    out_i = ~involved[ci]
                    out_j = ~involved[cj]
                    same_call = ci[:, None] == cj[None, :]
                    if privacy == 2:
                        v |= out_i[:, None] & out_j[None, :] & P
                    elif privacy == 1:
                        v |= same_call & out_i[:, None] & P
                    inside = same_call & involved[ci][:, None]
                    if observance == AFTER:
                        cond = alpha_val[R][:, None] == alpha_val[C][None, :]
                    else:
                        cond = beta_val[R][:, None] == beta_val[C][None, :]
                    cond = cond | ~affected[ci][:, None]
                    v |= inside & cond & P
                block[gr, gc] = v
    return flat


def approx_table(parent, last, length, involved, affected, alpha_val, beta_val,
                 privacy: int, observance: int, bk: Buckets, backend: str | None = None) -> np.ndarray:
    """Flat bucketed ≈ table for one agent (see module docstring for the layout)."""
    flat = np.zeros(bk.pairs, dtype=np.bool_)
    if resolve_backend(backend) == "numba":
        return _approx_nb(parent, last, involved, affected, alpha_val, beta_val, privacy, observance,
                          bk.members, bk.start, bk.size, bk.table_offset, bk.bid, bk.loc, flat)
    return _approx_np(parent, last, length, involved, affected, alpha_val, beta_val, privacy,
                      observance, bk, flat)


# ---------------------------------------------------------------------------
# closure


@njit(cache=True)
def _find(uf, x):
    root = x
    while uf[root] != root:
        root = uf[root]
    while uf[x] != root:
        nxt = uf[x]
        uf[x] = root
        x = nxt
    return root


@njit(cache=True)
def _closure_nb(flat, members, start, bsize, boff, size):
    uf = np.arange(size)
    for b in range(len(bsize)):
        s = bsize[b]
        off = boff[b]
        base = start[b]
        for li in range(s):
            for lj in range(li + 1, s):
                if flat[off + li * s + lj] or flat[off + lj * s + li]:
                    ra = _find(uf, members[base + li])
                    rb = _find(uf, members[base + lj])
                    if ra != rb:
                        if ra < rb:
                            uf[rb] = ra
                        else:
                            uf[ra] = rb
    out = np.empty(size, dtype=np.int64)
    for x in range(size):
        out[x] = _find(uf, x)
    return out


def _closure_np(flat, bk: Buckets, size: int) -> np.ndarray:
    labels = np.empty(size, dtype=np.int64)
    next_label = 0
    for b in range(len(bk.size)):
        s = int(bk.size[b])
        mem = bk.members[bk.start[b] : bk.start[b + 1]]
        block = flat[bk.table_offset[b] : bk.table_offset[b] + s * s].reshape(s, s)
        _, lab = connected_components(csr_matrix(block), directed=True, connection="weak")
        labels[mem] = lab + next_label
        next_label += int(lab.max()) + 1 if s else 0
    return labels


def canonical_labels(labels: np.ndarray) -> np.ndarray:
    """Relabel classes 0..k-1 in order of their smallest member."""
    _, first, inverse = np.unique(labels, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse]


def closure_labels(flat, bk: Buckets, size: int, backend: str | None = None) -> np.ndarray:
    """Canonical class id of every member under the reflexive-transitive closure."""
    if resolve_backend(backend) == "numba":
        raw = _closure_nb(flat, bk.members, bk.start, bk.size, bk.table_offset, size)
    else:
        raw = _closure_np(flat, bk, size)
    return canonical_labels(raw)

"""Hot inner-loop kernels: tree growth and subtree depth statistics.

Each kernel is written once in numpy-compatible Python. When numba is
importable (and ``FOUNDMINE_DISABLE_NUMBA`` is unset) the same source is
compiled with ``numba.njit``; otherwise the interpreted version runs.
Both backends produce bit-identical results: randomness comes from an
explicit xorshift64 generator and no reassociating math is enabled, so
the env flag trades speed only.

Level sets are stored as uint64 bitmasks, which caps an attribute at 64
observed levels inside the forest; wider attributes are excluded from
candidate draws by the caller.
"""

import os
import warnings

import numpy as np

_U0 = np.uint64(0)
_U1 = np.uint64(1)


def _build(jit):
    """Instantiate the kernel family under a wrapping decorator."""

    @jit
    def xs_step(state):
        # xorshift64; state must stay nonzero (mix64 guarantees that).
        state = state ^ (state << np.uint64(13))
        state = state ^ (state >> np.uint64(7))
        state = state ^ (state << np.uint64(17))
        return state

    @jit
    def xs_below(state, n):
        # Draw uniformly from [0, n); top bits, modulo bias negligible here.
        state = xs_step(state)
        return state, np.int64((state >> np.uint64(11)) % np.uint64(n))

    @jit
    def mask_lex_less(a, b):
        # Order uint64 level-set masks by the lexicographic order of
        # their sorted member lists (used only for split tie-breaks).
        d = a ^ b
        if d == _U0:
            return False
        low = d & (~(d - _U1))
        above = ~((low << _U1) - _U1)
        if a & low:
            return (b & above) != _U0
        return (a & above) == _U0

    @jit
    def split_gain(l0, l1, t0, t1, parent_gini):
        # Mean Gini decrease per row observed on the split attribute.
        nl = np.float64(l0 + l1)
        r0 = t0 - l0
        r1 = t1 - l1
        nr = np.float64(r0 + r1)
        pl1 = np.float64(l1) / nl
        pl0 = np.float64(l0) / nl
        pr1 = np.float64(r1) / nr
        pr0 = np.float64(r0) / nr
        gl = 1.0 - pl1 * pl1 - pl0 * pl0
        gr = 1.0 - pr1 * pr1 - pr0 * pr0
        return parent_gini - (nl * gl + nr * gr) / (nl + nr)

    @jit
    def grow_tree(
        codes,
        y,
        n_levels,
        cand_attrs,
        mtry,
        min_node,
        bootstrap,
        seed,
        node_attr,
        node_mask,
        node_left,
        node_right,
        node_depth,
        node_size,
    ):
        """Grow one fully-deep binary tree over categorical codes.

        codes: int16 (n, Q), missing = -1.  y: int8 labels 0/1.
        cand_attrs: attribute ids eligible for splitting.
        Output arrays must be preallocated with capacity 2n + 1.
        Returns the number of nodes written.
        """
        n = codes.shape[0]
        state = seed

        idx = np.empty(n, np.int64)
        if bootstrap:
            for i in range(n):
                state, j = xs_below(state, n)
                idx[i] = j
        else:
            for i in range(n):
                idx[i] = i

        max_lev = np.int64(2)
        for q in range(n_levels.shape[0]):
            if n_levels[q] > max_lev:
                max_lev = n_levels[q]
        cnt0 = np.zeros(max_lev, np.int64)
        cnt1 = np.zeros(max_lev, np.int64)
        obs = np.empty(max_lev, np.int64)
        n_ok = cand_attrs.shape[0]
        cand = np.empty(n_ok, np.int64)
        buf_l = np.empty(n, np.int64)
        buf_r = np.empty(n, np.int64)

        cap = node_attr.shape[0]
        stack_node = np.empty(cap, np.int64)
        stack_lo = np.empty(cap, np.int64)
        stack_hi = np.empty(cap, np.int64)

        node_depth[0] = 0
        node_size[0] = n
        stack_node[0] = 0
        stack_lo[0] = 0
        stack_hi[0] = n
        top = 0
        next_id = 1

        while top >= 0:
            nid = stack_node[top]
            lo = stack_lo[top]
            hi = stack_hi[top]
            top -= 1
            size = hi - lo

            node_attr[nid] = -1
            node_mask[nid] = _U0
            node_left[nid] = -1
            node_right[nid] = -1

            ones = np.int64(0)
            for i in range(lo, hi):
                ones += np.int64(y[idx[i]])
            if size <= min_node or ones == 0 or ones == size:
                continue

            m_try = mtry if mtry < n_ok else n_ok
            for t in range(n_ok):
                cand[t] = cand_attrs[t]

            best_gain = -np.inf
            best_attr = np.int64(-1)
            best_mask = _U0

            for t in range(m_try):
                state, j = xs_below(state, n_ok - t)
                a = cand[t + j]
                cand[t + j] = cand[t]
                cand[t] = a

                lev_count = n_levels[a]
                for l in range(lev_count):
                    cnt0[l] = 0
                    cnt1[l] = 0
                for i in range(lo, hi):
                    c = codes[idx[i], a]
                    if c >= 0:
                        if y[idx[i]] == 1:
                            cnt1[c] += 1
                        else:
                            cnt0[c] += 1

                m = 0
                tot0 = np.int64(0)
                tot1 = np.int64(0)
                for l in range(lev_count):
                    if cnt0[l] + cnt1[l] > 0:
                        obs[m] = l
                        m += 1
                        tot0 += cnt0[l]
                        tot1 += cnt1[l]
                if m < 2:
                    continue

                tot = np.float64(tot0 + tot1)
                p1 = np.float64(tot1) / tot
                p0 = np.float64(tot0) / tot
                parent_gini = 1.0 - p1 * p1 - p0 * p0

                if m <= 12:
                    # All binary partitions of the observed levels, each
                    # once: the last observed level always stays right.
                    n_cand = (1 << (m - 1)) - 1
                    for lm in range(1, n_cand + 1):
                        l0 = np.int64(0)
                        l1 = np.int64(0)
                        gm = _U0
                        for b in range(m - 1):
                            if (lm >> b) & 1:
                                lev = obs[b]
                                l0 += cnt0[lev]
                                l1 += cnt1[lev]
                                gm = gm | (_U1 << np.uint64(lev))
                        gain = split_gain(l0, l1, tot0, tot1, parent_gini)
                        if gain > best_gain or (
                            gain == best_gain
                            and (
                                a < best_attr
                                or (a == best_attr and mask_lex_less(gm, best_mask))
                            )
                        ):
                            best_gain = gain
                            best_attr = a
                            best_mask = gm
                else:
                    # Combinatorial guard: one-vs-rest candidates only.
                    for b in range(m):
                        lev = obs[b]
                        gm = _U1 << np.uint64(lev)
                        gain = split_gain(
                            cnt0[lev], cnt1[lev], tot0, tot1, parent_gini
                        )
                        if gain > best_gain or (
                            gain == best_gain
                            and (
                                a < best_attr
                                or (a == best_attr and mask_lex_less(gm, best_mask))
                            )
                        ):
                            best_gain = gain
                            best_attr = a
                            best_mask = gm

            if best_attr < 0:
                continue

            nl = 0
            nr = 0
            for i in range(lo, hi):
                row = idx[i]
                c = codes[row, best_attr]
                if c < 0:
                    # Rows missing the split attribute go to a uniformly
                    # random child.
                    state = xs_step(state)
                    if (state >> np.uint64(63)) & _U1:
                        buf_l[nl] = row
                        nl += 1
                    else:
                        buf_r[nr] = row
                        nr += 1
                elif (best_mask >> np.uint64(c)) & _U1:
                    buf_l[nl] = row
                    nl += 1
                else:
                    buf_r[nr] = row
                    nr += 1
            for i in range(nl):
                idx[lo + i] = buf_l[i]
            for i in range(nr):
                idx[lo + nl + i] = buf_r[i]

            lid = next_id
            rid = next_id + 1
            next_id += 2
            node_attr[nid] = best_attr
            node_mask[nid] = best_mask
            node_left[nid] = lid
            node_right[nid] = rid
            d = node_depth[nid] + 1
            node_depth[lid] = d
            node_depth[rid] = d
            node_size[lid] = nl
            node_size[rid] = nr
            top += 1
            stack_node[top] = rid
            stack_lo[top] = lo + nl
            stack_hi[top] = hi
            top += 1
            stack_node[top] = lid
            stack_lo[top] = lo
            stack_hi[top] = lo + nl

        return next_id

    @jit
    def tree_depth_stats(attr, left, right, depth, n_attrs, d1_out, d2_out):
        """First- and second-order maximal-subtree depths for one tree.

        d1_out[v]: depth of the shallowest v-split, or tree height + 1
        when v never splits.  d2_out[u, v]: shallowest v-split depth
        measured inside u's maximal subtrees (minimum over subtrees),
        imputed with subtree height + 1 (or tree height + 1 when u is
        absent).  Children always carry larger node ids than parents.
        """
        n_nodes = attr.shape[0]
        INF = np.int64(1) << np.int64(40)

        rel = np.full((n_nodes, n_attrs), INF, np.int64)
        height = np.zeros(n_nodes, np.int64)
        for n in range(n_nodes - 1, -1, -1):
            a = attr[n]
            if a >= 0:
                l = left[n]
                r = right[n]
                hl = height[l]
                hr = height[r]
                height[n] = (hl if hl > hr else hr) + 1
                for v in range(n_attrs):
                    mn = rel[l, v] if rel[l, v] < rel[r, v] else rel[r, v]
                    rel[n, v] = mn + 1
                rel[n, a] = 0

        tree_h = np.int64(0)
        for n in range(n_nodes):
            if depth[n] > tree_h:
                tree_h = depth[n]

        # Count of strict ancestors splitting each attribute.
        anc = np.zeros((n_nodes, n_attrs), np.int64)
        for n in range(n_nodes):
            a = attr[n]
            if a >= 0:
                l = left[n]
                r = right[n]
                for v in range(n_attrs):
                    anc[l, v] = anc[n, v]
                    anc[r, v] = anc[n, v]
                anc[l, a] += 1
                anc[r, a] += 1

        best2 = np.full((n_attrs, n_attrs), INF, np.int64)
        maxh = np.full(n_attrs, np.int64(-1), np.int64)
        d1 = np.full(n_attrs, INF, np.int64)
        for n in range(n_nodes):
            a = attr[n]
            if a >= 0 and anc[n, a] == 0:
                if depth[n] < d1[a]:
                    d1[a] = depth[n]
                if height[n] > maxh[a]:
                    maxh[a] = height[n]
                for v in range(n_attrs):
                    if rel[n, v] < best2[a, v]:
                        best2[a, v] = rel[n, v]

        for u in range(n_attrs):
            if maxh[u] < 0:
                d1_out[u] = tree_h + 1
                for v in range(n_attrs):
                    d2_out[u, v] = tree_h + 1
            else:
                d1_out[u] = d1[u]
                for v in range(n_attrs):
                    if best2[u, v] < INF:
                        d2_out[u, v] = best2[u, v]
                    else:
                        d2_out[u, v] = maxh[u] + 1
        return tree_h

    @jit
    def warmup():
        # Touch every kernel once so JIT cost is paid up front.
        codes = np.zeros((4, 2), np.int16)
        codes[2, 0] = 1
        codes[3, 0] = 1
        codes[1, 1] = -1
        y = np.zeros(4, np.int8)
        y[2] = 1
        y[3] = 1
        nlev = np.full(2, 2, np.int64)
        ca = np.arange(2, dtype=np.int64)
        cap = 9
        na = np.empty(cap, np.int64)
        nm = np.empty(cap, np.uint64)
        nl = np.empty(cap, np.int64)
        nr = np.empty(cap, np.int64)
        nd = np.empty(cap, np.int64)
        ns = np.empty(cap, np.int64)
        n_nodes = grow_tree(
            codes, y, nlev, ca, np.int64(2), np.int64(1), True,
            np.uint64(12345), na, nm, nl, nr, nd, ns,
        )
        d1 = np.empty(2, np.int64)
        d2 = np.empty((2, 2), np.int64)
        tree_depth_stats(
            na[:n_nodes], nl[:n_nodes], nr[:n_nodes], nd[:n_nodes], 2, d1, d2
        )
        return n_nodes

    return {
        "xs_step": xs_step,
        "xs_below": xs_below,
        "mask_lex_less": mask_lex_less,
        "grow_tree": grow_tree,
        "tree_depth_stats": tree_depth_stats,
        "warmup": warmup,
    }


def _env_disabled() -> bool:
    return os.environ.get("FOUNDMINE_DISABLE_NUMBA", "").strip().lower() not in (
        "",
        "0",
        "false",
    )


_BACKENDS = {"python": _build(lambda f: f)}

if not _env_disabled():
    try:
        import numba

        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            _BACKENDS["numba"] = _build(numba.njit(cache=False, nogil=True))
        _active = "numba"
    except ImportError:
        _active = "python"
else:
    _active = "python"


def active_backend() -> str:
    return _active


def available_backends() -> tuple:
    return tuple(sorted(_BACKENDS))


def set_backend(name: str) -> None:
    """Switch kernel backend at runtime (used by tests and benchmarks)."""
    global _active
    if name not in _BACKENDS:
        raise ValueError(
            f"backend {name!r} not available (have {sorted(_BACKENDS)})"
        )
    _active = name


def kernels() -> dict:
    return _BACKENDS[_active]

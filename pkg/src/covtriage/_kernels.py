"""Hot traversal kernels over packed tree arrays.

Compiled with numba when available (the scoring service needs sub-millisecond
per-request attribution); the pure-Python definitions are the fallback and
the reference semantics either way.
"""

from __future__ import annotations

import numpy as np


def _leaf_sum_single(offsets, feature, threshold, default_left, left, right, value, x):
    """Sum of routed leaf values for one input row (NaN = missing)."""
    total = 0.0
    for t in range(offsets.shape[0] - 1):
        node = offsets[t]
        while feature[node] >= 0:
            xv = x[feature[node]]
            if np.isnan(xv):
                go_left = default_left[node] == 1
            else:
                go_left = xv < threshold[node]
            node = left[node] if go_left else right[node]
        total += value[node]
    return total


def _expected_leaf_sum(offsets, feature, left, right, value, cover):
    """Cover-weighted mean leaf value summed over all trees."""
    total = 0.0
    nstack = np.empty(512, dtype=np.int64)
    wstack = np.empty(512, dtype=np.float64)
    for t in range(offsets.shape[0] - 1):
        sp = 0
        nstack[0] = offsets[t]
        wstack[0] = 1.0
        sp = 1
        while sp > 0:
            sp -= 1
            node = nstack[sp]
            w = wstack[sp]
            if feature[node] < 0:
                total += w * value[node]
            else:
                c = cover[node]
                nstack[sp] = left[node]
                wstack[sp] = w * cover[left[node]] / c
                sp += 1
                nstack[sp] = right[node]
                wstack[sp] = w * cover[right[node]] / c
                sp += 1
    return total


def _shap_single(offsets, feature, threshold, default_left, left, right, value, cover,
                 max_depth, x, scale, phi):
    """Path-dependent Shapley attribution for one row, accumulated into phi.

    Iterative form of the fractional-path tree traversal: each path entry
    holds (feature, zero_fraction, one_fraction, permutation weight); EXTEND
    pushes a split onto the path, UNWIND removes one entry exactly inverting
    EXTEND.  `scale` multiplies leaf values (the ensemble learning rate).
    """
    D = max_depth
    psize = (D + 3) * (D + 4) // 2 + 8
    pd = np.empty(psize, dtype=np.int64)
    pz = np.empty(psize, dtype=np.float64)
    po = np.empty(psize, dtype=np.float64)
    pw = np.empty(psize, dtype=np.float64)
    ssize = 2 * (D + 2) + 8
    st_node = np.empty(ssize, dtype=np.int64)
    st_ud = np.empty(ssize, dtype=np.int64)
    st_poff = np.empty(ssize, dtype=np.int64)
    st_pz = np.empty(ssize, dtype=np.float64)
    st_po = np.empty(ssize, dtype=np.float64)
    st_pf = np.empty(ssize, dtype=np.int64)

    for t in range(offsets.shape[0] - 1):
        st_node[0] = offsets[t]
        st_ud[0] = 0
        st_poff[0] = 0
        st_pz[0] = 1.0
        st_po[0] = 1.0
        st_pf[0] = -1
        sp = 1
        while sp > 0:
            sp -= 1
            node = st_node[sp]
            ud = st_ud[sp]
            poff = st_poff[sp]
            pzf = st_pz[sp]
            pof = st_po[sp]
            pf = st_pf[sp]
            moff = poff + ud + 1

            for i in range(ud):
                pd[moff + i] = pd[poff + i]
                pz[moff + i] = pz[poff + i]
                po[moff + i] = po[poff + i]
                pw[moff + i] = pw[poff + i]
            # EXTEND with (pzf, pof, pf)
            pd[moff + ud] = pf
            pz[moff + ud] = pzf
            po[moff + ud] = pof
            pw[moff + ud] = 1.0 if ud == 0 else 0.0
            for i in range(ud - 1, -1, -1):
                pw[moff + i + 1] += pof * pw[moff + i] * (i + 1.0) / (ud + 1.0)
                pw[moff + i] = pzf * pw[moff + i] * (ud - i) / (ud + 1.0)

            if feature[node] < 0:
                leaf_v = value[node] * scale
                for i in range(1, ud + 1):
                    # sum of path weights after unwinding entry i
                    one_f = po[moff + i]
                    zero_f = pz[moff + i]
                    tot = 0.0
                    if one_f != 0.0:
                        # tmp is the unwound weight scaled by 1/(ud+1)
                        next_one = pw[moff + ud]
                        for j in range(ud - 1, -1, -1):
                            tmp = next_one / ((j + 1.0) * one_f)
                            tot += tmp
                            next_one = pw[moff + j] - tmp * zero_f * (ud - j)
                    else:
                        for j in range(ud - 1, -1, -1):
                            tot += pw[moff + j] / (zero_f * (ud - j))
                    tot *= ud + 1.0
                    phi[pd[moff + i]] += tot * (po[moff + i] - pz[moff + i]) * leaf_v
            else:
                f = feature[node]
                xv = x[f]
                if np.isnan(xv):
                    go_left = default_left[node] == 1
                else:
                    go_left = xv < threshold[node]
                hot = left[node] if go_left else right[node]
                cold = right[node] if go_left else left[node]
                c = cover[node]
                hot_zf = cover[hot] / c
                cold_zf = cover[cold] / c
                iz = 1.0
                io = 1.0
                k = -1
                for i in range(ud + 1):
                    if pd[moff + i] == f:
                        k = i
                        break
                ud_eff = ud
                if k >= 0:
                    # UNWIND the previous occurrence of f
                    iz = pz[moff + k]
                    io = po[moff + k]
                    if io != 0.0:
                        next_one = pw[moff + ud]
                        for j in range(ud - 1, -1, -1):
                            tmp = pw[moff + j]
                            pw[moff + j] = next_one * (ud + 1.0) / ((j + 1.0) * io)
                            next_one = tmp - pw[moff + j] * iz * (ud - j) / (ud + 1.0)
                    else:
                        for j in range(ud - 1, -1, -1):
                            pw[moff + j] = pw[moff + j] * (ud + 1.0) / (iz * (ud - j))
                    for j in range(k, ud):
                        pd[moff + j] = pd[moff + j + 1]
                        pz[moff + j] = pz[moff + j + 1]
                        po[moff + j] = po[moff + j + 1]
                    ud_eff = ud - 1

                st_node[sp] = hot
                st_ud[sp] = ud_eff + 1
                st_poff[sp] = moff
                st_pz[sp] = hot_zf * iz
                st_po[sp] = io
                st_pf[sp] = f
                sp += 1
                st_node[sp] = cold
                st_ud[sp] = ud_eff + 1
                st_poff[sp] = moff
                st_pz[sp] = cold_zf * iz
                st_po[sp] = 0.0
                st_pf[sp] = f
                sp += 1


def _shap_batch(offsets, feature, threshold, default_left, left, right, value, cover,
                max_depth, X, scale, out):
    for r in range(X.shape[0]):
        _shap_single(offsets, feature, threshold, default_left, left, right, value, cover,
                     max_depth, X[r], scale, out[r])


try:  # pragma: no cover - exercised implicitly everywhere
    from numba import njit

    _leaf_sum_single = njit(cache=True)(_leaf_sum_single)
    _expected_leaf_sum = njit(cache=True)(_expected_leaf_sum)
    _shap_single = njit(cache=True)(_shap_single)

    def _shap_batch_impl(offsets, feature, threshold, default_left, left, right, value, cover,
                         max_depth, X, scale, out):
        for r in range(X.shape[0]):
            _shap_single(offsets, feature, threshold, default_left, left, right, value, cover,
                         max_depth, X[r], scale, out[r])

    _shap_batch = njit(cache=True)(_shap_batch_impl)
    JIT_ENABLED = True
except ImportError:  # pragma: no cover
    JIT_ENABLED = False


def leaf_sum_single(packed, x: np.ndarray) -> float:
    return float(_leaf_sum_single(packed.offsets, packed.feature, packed.threshold,
                                  packed.default_left, packed.left, packed.right,
                                  packed.value, x))


def expected_leaf_sum(packed) -> float:
    return float(_expected_leaf_sum(packed.offsets, packed.feature, packed.left,
                                    packed.right, packed.value, packed.cover))


def shap_single(packed, x: np.ndarray, scale: float, phi: np.ndarray) -> None:
    _shap_single(packed.offsets, packed.feature, packed.threshold, packed.default_left,
                 packed.left, packed.right, packed.value, packed.cover,
                 packed.max_depth, x, scale, phi)


def shap_batch(packed, X: np.ndarray, scale: float, out: np.ndarray) -> None:
    _shap_batch(packed.offsets, packed.feature, packed.threshold, packed.default_left,
                packed.left, packed.right, packed.value, packed.cover,
                packed.max_depth, np.ascontiguousarray(X), scale, out)

"""NumPy implementation of the monomial kernels.

Used when the compiled ``_kernels`` extension is unavailable.  Each
monomial is applied to every configuration at once with vectorized bit
arithmetic; the signature matches the compiled module exactly.
"""

import numpy as np

BACKEND = "numpy"

_ONE = np.uint64(1)


def _below_parity(words, q):
    mask = np.uint64((1 << q) - 1)
    return np.bitwise_count(words & mask) & 1


def _act(configs, q_idx, p_idx):
    """Vectorized ``b†_Q b_P``: returns (alive mask, sign, new words)."""
    words = configs.copy()
    alive = np.ones(len(words), dtype=bool)
    odd = np.zeros(len(words), dtype=np.uint8)
    for p in p_idx:
        bit = _ONE << np.uint64(p)
        alive &= (words & bit) != 0
        odd ^= _below_parity(words, p)
        words = words & ~bit
    for q in q_idx[::-1]:
        bit = _ONE << np.uint64(q)
        alive &= (words & bit) == 0
        odd ^= _below_parity(words, q)
        words = words | bit
    sign = 1.0 - 2.0 * odd
    return alive, sign, words


def _targets(configs, words, alive):
    pos = np.searchsorted(configs, words)
    pos_c = np.minimum(pos, len(configs) - 1)
    found = alive & (configs[pos_c] == words)
    return found, pos_c


def monomial_coo(configs, q_flat, q_off, p_flat, p_off, values):
    """COO triplets ``(row, col, value)`` of sum_j value_j b†_Qj b_Pj
    restricted to ``configs`` (sorted uint64 words)."""
    configs = np.asarray(configs, dtype=np.uint64)
    cols_all = np.arange(len(configs), dtype=np.int64)
    rows, cols, vals = [], [], []
    for j in range(len(values)):
        q_idx = q_flat[q_off[j]:q_off[j + 1]]
        p_idx = p_flat[p_off[j]:p_off[j + 1]]
        alive, sign, words = _act(configs, q_idx, p_idx)
        found, pos = _targets(configs, words, alive)
        if not found.any():
            continue
        rows.append(pos[found])
        cols.append(cols_all[found])
        vals.append(sign[found] * values[j])
    if not rows:
        empty = np.zeros(0, dtype=np.int64)
        return empty, empty.copy(), np.zeros(0, dtype=np.complex128)
    return (
        np.concatenate(rows).astype(np.int64),
        np.concatenate(cols).astype(np.int64),
        np.concatenate(vals).astype(np.complex128),
    )


def apply_monomials(configs, q_flat, q_off, p_flat, p_off, values, vec):
    """Matrix-free product ``H @ vec`` over the same monomial layout."""
    configs = np.asarray(configs, dtype=np.uint64)
    vec = np.asarray(vec, dtype=np.complex128)
    out = np.zeros(len(configs), dtype=np.complex128)
    nz = vec != 0
    for j in range(len(values)):
        q_idx = q_flat[q_off[j]:q_off[j + 1]]
        p_idx = p_flat[p_off[j]:p_off[j + 1]]
        alive, sign, words = _act(configs, q_idx, p_idx)
        found, pos = _targets(configs, words, alive & nz)
        np.add.at(out, pos[found], values[j] * sign[found] * vec[found])
    return out

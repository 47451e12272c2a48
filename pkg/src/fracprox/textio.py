"""Plain-text matrix formats.

Dense: a ``rows cols`` header line, then row-major whitespace-separated
values (one matrix row per line). Sparse: a ``rows cols nnz`` header, then
one ``i j v`` triplet per line with 0-based indices. Floats are written with
``repr`` so a save/load round trip is exact.
"""

from pathlib import Path

import numpy as np
import scipy.sparse as sp


def _fmt(v):
    return repr(float(v))


def save_dense(path, a):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(-1, 1)
    lines = [f"{a.shape[0]} {a.shape[1]}"]
    lines += [" ".join(_fmt(v) for v in row) for row in a]
    Path(path).write_text("\n".join(lines) + "\n")


def load_dense(path):
    tokens = Path(path).read_text().split()
    if len(tokens) < 2:
        raise ValueError(f"{path}: missing 'rows cols' header")
    rows, cols = int(tokens[0]), int(tokens[1])
    vals = np.array([float(t) for t in tokens[2:]])
    if vals.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} values, found {vals.size}")
    return vals.reshape(rows, cols)


def load_vector(path):
    return load_dense(path).ravel()


def save_sparse(path, a):
    a = sp.coo_matrix(a)
    order = np.lexsort((a.col, a.row))
    lines = [f"{a.shape[0]} {a.shape[1]} {a.nnz}"]
    lines += [f"{a.row[k]} {a.col[k]} {_fmt(a.data[k])}" for k in order]
    Path(path).write_text("\n".join(lines) + "\n")


def load_sparse(path):
    lines = Path(path).read_text().split("\n")
    head = lines[0].split()
    if len(head) != 3:
        raise ValueError(f"{path}: missing 'rows cols nnz' header")
    rows, cols, nnz = (int(t) for t in head)
    body = [ln.split() for ln in lines[1:] if ln.strip()]
    if len(body) != nnz:
        raise ValueError(f"{path}: expected {nnz} triplets, found {len(body)}")
    if nnz == 0:
        return sp.csr_matrix((rows, cols))
    i = np.array([int(t[0]) for t in body])
    j = np.array([int(t[1]) for t in body])
    v = np.array([float(t[2]) for t in body])
    return sp.csr_matrix((v, (i, j)), shape=(rows, cols))

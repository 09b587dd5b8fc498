"""Text formats: Matrix Market coordinate files, vectors, tables and CSVs."""
import csv
import math
from pathlib import Path

import numpy as np
import scipy.sparse as sp

from .errors import MatrixMarketParseError
from .linalg import as_csr

SYMMETRIES = ("general", "symmetric", "skew-symmetric")
FIELDS = ("real", "integer", "pattern")


def load_matrix_market(path):
    """Read a coordinate Matrix Market file into canonical CSR.

    Symmetric and skew-symmetric files store one triangle; the other is
    expanded.  Errors carry the 1-based line number.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MatrixMarketParseError("empty file", line=1)
    head = lines[0].split()
    if len(head) != 5 or head[0].lower() != "%%matrixmarket" or head[1].lower() != "matrix":
        raise MatrixMarketParseError("missing %%MatrixMarket matrix header", line=1)
    fmt, fld, sym = (h.lower() for h in head[2:])
    if fmt != "coordinate":
        raise MatrixMarketParseError(f"unsupported format {fmt!r}", line=1)
    if fld not in FIELDS:
        raise MatrixMarketParseError(f"unsupported field {fld!r}", line=1)
    if sym not in SYMMETRIES:
        raise MatrixMarketParseError(f"unsupported symmetry {sym!r}", line=1)
    idx = 1
    while idx < len(lines) and (not lines[idx].strip() or lines[idx].lstrip().startswith("%")):
        idx += 1
    if idx == len(lines):
        raise MatrixMarketParseError("missing size line", line=idx + 1)
    try:
        n_rows, n_cols, nnz = (int(t) for t in lines[idx].split())
    except ValueError:
        raise MatrixMarketParseError("size line must hold three integers", line=idx + 1) from None
    if n_rows < 0 or n_cols < 0 or nnz < 0:
        raise MatrixMarketParseError("negative size", line=idx + 1)
    if sym != "general" and n_rows != n_cols:
        raise MatrixMarketParseError(f"{sym} matrix must be square", line=idx + 1)
    rows, cols, vals = [], [], []
    want = 2 if fld == "pattern" else 3
    for lineno in range(idx + 2, len(lines) + 1):
        text = lines[lineno - 1].strip()
        if not text or text.startswith("%"):
            continue
        parts = text.split()
        if len(parts) != want:
            raise MatrixMarketParseError(f"expected {want} fields, got {len(parts)}", line=lineno)
        try:
            i, j = int(parts[0]), int(parts[1])
            v = 1.0 if fld == "pattern" else float(parts[2])
        except ValueError:
            raise MatrixMarketParseError("malformed entry", line=lineno) from None
        if not (1 <= i <= n_rows and 1 <= j <= n_cols):
            raise MatrixMarketParseError(f"index ({i}, {j}) out of range", line=lineno)
        if not math.isfinite(v):
            raise MatrixMarketParseError("non-finite value", line=lineno)
        if sym != "general" and i < j:
            raise MatrixMarketParseError(f"{sym} file stores an upper-triangle entry", line=lineno)
        if sym == "skew-symmetric" and i == j:
            raise MatrixMarketParseError("skew-symmetric file stores a diagonal entry", line=lineno)
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
        if len(vals) > nnz:
            raise MatrixMarketParseError(f"more than {nnz} entries", line=lineno)
    if len(vals) != nnz:
        raise MatrixMarketParseError(f"expected {nnz} entries, found {len(vals)}", line=len(lines))
    r, c, v = np.array(rows, dtype=np.intp), np.array(cols, dtype=np.intp), np.array(vals)
    if sym != "general":
        off = r != c
        sign = 1.0 if sym == "symmetric" else -1.0
        r, c, v = np.concatenate([r, c[off]]), np.concatenate([c, r[off]]), np.concatenate([v, sign * v[off]])
    return as_csr(sp.coo_matrix((v, (r, c)), shape=(n_rows, n_cols)))


def _detect_symmetry(A):
    if A.shape[0] != A.shape[1] or A.nnz == 0:
        return "general"
    S = A + A.T
    S.eliminate_zeros()
    if S.nnz == 0:
        return "skew-symmetric"
    D = A - A.T
    D.eliminate_zeros()
    return "symmetric" if D.nnz == 0 else "general"


def save_matrix_market(path, A, symmetry=None):
    """Write A in coordinate format; ``symmetry=None`` detects it exactly."""
    A = as_csr(A)
    A.eliminate_zeros()
    sym = symmetry or _detect_symmetry(A)
    if sym not in SYMMETRIES:
        raise ValueError(f"unknown symmetry {sym!r}")
    C = A.tocoo()
    r, c, v = C.row, C.col, C.data
    if sym == "symmetric":
        keep = r >= c
    elif sym == "skew-symmetric":
        keep = r > c
    else:
        keep = np.ones(r.size, dtype=bool)
    order = np.lexsort((r[keep], c[keep]))
    r, c, v = r[keep][order], c[keep][order], v[keep][order]
    with open(path, "w") as fh:
        fh.write(f"%%MatrixMarket matrix coordinate real {sym}\n")
        fh.write(f"{A.shape[0]} {A.shape[1]} {r.size}\n")
        for i, j, x in zip(r, c, v):
            fh.write(f"{i + 1} {j + 1} {x:.17g}\n")


def save_vector(path, x):
    np.savetxt(path, np.asarray(x, dtype=np.float64), fmt="%.17g")


def load_vector(path):
    return np.atleast_1d(np.loadtxt(path, dtype=np.float64))


def save_dense(path, X):
    np.savetxt(path, np.atleast_2d(np.asarray(X, dtype=np.float64)), fmt="%.17g")


def load_dense(path):
    return np.atleast_2d(np.loadtxt(path, dtype=np.float64))


def save_partition(path, restrictions):
    """One line per subdomain: its sorted unknown indices."""
    with open(path, "w") as fh:
        for idx in restrictions:
            fh.write(" ".join(str(int(i)) for i in idx) + "\n")


def load_partition(path):
    with open(path) as fh:
        return [np.array([int(t) for t in line.split()], dtype=np.intp) for line in fh if line.strip()]


def save_eigen_table(path, eigs):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "mu", "abs_mu", "residual"])
        for i, p in enumerate(eigs.pairs, start=1):
            w.writerow([i, f"{p.mu:.17g}", f"{abs(p.mu):.17g}", f"{p.residual:.6e}"])


def write_residual_csv(path, report):
    path = Path(path)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "w_norm", "h_norm"])
        for i, (a, b) in enumerate(zip(report.residual_history, report.h_residual_history)):
            w.writerow([i, f"{a:.17g}", f"{b:.17g}"])
    tmp.replace(path)

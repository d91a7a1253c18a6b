"""Matrix Market input/output on top of :mod:`scipy.io`.

The files themselves are parsed by ``scipy.io.mmread``; this module adds the
checks that report the offending line number and writes values with 17
significant digits so a write/read cycle reproduces every double exactly.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .lacore import as_csr


class MatrixMarketError(ValueError):
    """Parse error carrying the 1-based line number that triggered it."""

    def __init__(self, line: int, msg: str, path=None):
        where = f"{path}:" if path else ""
        super().__init__(f"{where}line {line}: {msg}")
        self.line = line


_FIELDS = {"real", "double", "integer"}
_SYMM = {"general", "symmetric", "skew-symmetric"}


def write_matrix_market(path, A, comment: str | None = None) -> None:
    """Write a sparse matrix in coordinate format, a dense array in array format."""
    if sp.issparse(A):
        A = as_csr(A).tocoo()
    else:
        A = np.asarray(A, dtype=float)
        if A.ndim == 1:
            A = A[:, None]
    scipy.io.mmwrite(str(path), A, comment=comment or "", field="real", precision=17, symmetry="general")


def _check(path: Path) -> None:
    """Validate header, size line and entry count/shape with line numbers."""
    text = path.read_text().splitlines()
    if not text:
        raise MatrixMarketError(1, "empty file", path)
    head = text[0].strip().split()
    if len(head) != 5 or head[0].lower() != "%%matrixmarket" or head[1].lower() != "matrix":
        raise MatrixMarketError(1, "malformed header, expected '%%MatrixMarket matrix <format> <field> <symmetry>'",
                                path)
    fmt, field, symm = (h.lower() for h in head[2:])
    if fmt not in ("coordinate", "array"):
        raise MatrixMarketError(1, f"unsupported format '{fmt}'", path)
    if field not in _FIELDS:
        raise MatrixMarketError(1, f"unsupported field '{field}'", path)
    if symm not in _SYMM:
        raise MatrixMarketError(1, f"unsupported symmetry '{symm}'", path)
    body = [(i + 1, ln.split()) for i, ln in enumerate(text) if i > 0 and ln.strip() and not ln.lstrip().startswith("%")]
    if not body:
        raise MatrixMarketError(len(text), "missing size line", path)
    size_line, size = body[0]
    want = 3 if fmt == "coordinate" else 2
    if len(size) != want or not all(t.isdigit() for t in size):
        raise MatrixMarketError(size_line, f"bad size line '{' '.join(size)}'", path)
    dims = [int(t) for t in size]
    entries = body[1:]
    count = dims[2] if fmt == "coordinate" else dims[0] * dims[1]
    if fmt == "array" and symm != "general":
        count = len(entries)  # packed triangle; scipy checks the layout
    if len(entries) != count:
        where = entries[-1][0] if entries else size_line
        raise MatrixMarketError(where, f"expected {count} entries, found {len(entries)}", path)
    width = 3 if fmt == "coordinate" else 1
    for ln, parts in entries:
        if len(parts) != width:
            raise MatrixMarketError(ln, f"bad entry '{' '.join(parts)}'", path)
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise MatrixMarketError(ln, f"bad entry '{' '.join(parts)}'", path) from None
        if fmt == "coordinate" and not (1 <= vals[0] <= dims[0] and 1 <= vals[1] <= dims[1]):
            raise MatrixMarketError(ln, f"index ({parts[0]}, {parts[1]}) outside {dims[0]}x{dims[1]}", path)


def read_matrix_market(path):
    """Read a Matrix Market file.

    Returns a canonical CSR matrix for coordinate files and a dense ``ndarray``
    for array files.

    Raises
    ------
    MatrixMarketError
        With the offending line number for any malformed header, size line or entry.
    """
    path = Path(path)
    _check(path)
    A = scipy.io.mmread(str(path))
    if sp.issparse(A):
        return as_csr(A.astype(float))
    return np.asarray(A, dtype=float)

"""Matrix Market and plain-text vector I/O.

Floating-point values are written with 17 significant digits in scientific
notation, which round-trips ``float64`` exactly.
"""

import numpy as np
import scipy.io

from .exceptions import InputError

FLOAT_FMT = "{:.16e}"


def fmt(x):
    return FLOAT_FMT.format(x)


def read_matrix(path):
    """Read a Matrix Market file (coordinate or array) into a dense array."""
    try:
        M = scipy.io.mmread(str(path))
    except (ValueError, OSError) as exc:
        raise InputError(f"cannot read Matrix Market file {path}: {exc}") from exc
    if hasattr(M, "toarray"):
        M = M.toarray()
    M = np.asarray(M)
    if M.dtype.kind == "c":
        return M.astype(np.complex128)
    return M.astype(np.float64)


def write_matrix(path, A, comment=None):
    """Write a dense matrix in Matrix Market array format (column-major)."""
    A = np.atleast_2d(np.asarray(A))
    field = "complex" if A.dtype.kind == "c" else "real"
    lines = [f"%%MatrixMarket matrix array {field} general"]
    if comment:
        lines.extend("% " + c for c in comment.splitlines())
    lines.append(f"{A.shape[0]} {A.shape[1]}")
    for a in A.flatten(order="F"):
        if field == "complex":
            lines.append(f"{fmt(a.real)} {fmt(a.imag)}")
        else:
            lines.append(fmt(a))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_vector(path):
    """Read one entry per line; a line with two tokens is ``re im``."""
    values = []
    complex_ = False
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            s = line.strip()
            if not s or s.startswith(("#", "%")):
                continue
            tok = s.split()
            try:
                if len(tok) == 1:
                    values.append(complex(float(tok[0]), 0.0))
                elif len(tok) == 2:
                    values.append(complex(float(tok[0]), float(tok[1])))
                    complex_ = True
                else:
                    raise ValueError("expected 1 or 2 tokens")
            except ValueError as exc:
                raise InputError(f"{path}:{lineno}: {exc}") from exc
    if not values:
        raise InputError(f"{path}: empty vector file")
    v = np.array(values, dtype=np.complex128)
    return v if complex_ else v.real.copy()


def write_vector(path, v):
    v = np.asarray(v).ravel()
    with open(path, "w") as fh:
        for x in v:
            if v.dtype.kind == "c":
                fh.write(f"{fmt(x.real)} {fmt(x.imag)}\n")
            else:
                fh.write(fmt(x) + "\n")

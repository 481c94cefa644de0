"""Input validation helpers shared by the functional and estimator layers."""

import numpy as np

from .exceptions import DimensionMismatch, InputError


def _as_float_or_complex(a):
    a = np.asarray(a)
    if a.dtype.kind in "biuf":
        return a.astype(np.float64, copy=False)
    if a.dtype.kind == "c":
        return a.astype(np.complex128, copy=False)
    raise InputError(f"expected numeric data, got dtype {a.dtype}")


def check_matrix(A, *, square=True, name="A"):
    """Return ``A`` as a finite 2-D float64/complex128 array."""
    A = _as_float_or_complex(A)
    if A.ndim != 2 or A.shape[0] < 1 or A.shape[1] < 1:
        raise InputError(f"{name} must be a non-empty 2-D array, got shape {A.shape}")
    if square and A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise InputError(f"{name} contains non-finite entries")
    return A


def check_vector(b, n=None, *, name="b", allow_block=False):
    """Return ``b`` as a finite 1-D array (or 2-D block when allowed) of length ``n``."""
    b = _as_float_or_complex(b)
    if b.ndim == 2 and allow_block:
        pass
    elif b.ndim != 1:
        raise InputError(f"{name} must be 1-D, got shape {b.shape}")
    if b.shape[0] < 1:
        raise InputError(f"{name} must be non-empty")
    if n is not None and b.shape[0] != n:
        raise DimensionMismatch(f"{name} has length {b.shape[0]}, expected {n}")
    if not np.all(np.isfinite(b)):
        raise InputError(f"{name} contains non-finite entries")
    return b


def check_same_shape(*arrays):
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise DimensionMismatch(f"shape mismatch: {sorted(shapes)}")


def result_dtype(*arrays):
    return np.result_type(np.float64, *[np.asarray(a).dtype for a in arrays])


def is_real(a):
    return np.asarray(a).dtype.kind != "c"

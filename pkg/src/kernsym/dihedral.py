"""The dihedral group D4 acting on square matrices.

The eight symmetries of the square are named e, r, r2, r3 (rotations)
and s, sr, sr2, sr3 (reflections). Direction convention, fixed here and
relied on by the tests:

* r rotates 90 degrees clockwise when the matrix is printed row 0 on
  top: ``apply(R, [[1, 2], [3, 4]]) == [[3, 1], [4, 2]]``;
* s reflects across the vertical axis (reverses each row);
* sr reflects across the main diagonal, i.e. transposition;
* sr2 reflects across the horizontal axis;
* sr3 reflects across the anti-diagonal.

Writing g = s^m r^k, ``compose(a, b)`` returns the element acting as
"apply b first, then a": apply(compose(a, b), M) == apply(a, apply(b, M)).
All elements act as the identity on 1x1 matrices; even sizes are fine.
"""

from __future__ import annotations

from enum import Enum
from functools import lru_cache

import numpy as np

from .tensors import check_kernel


class D4Element(Enum):
    """One of the eight symmetries of the square, encoded as (mirror, rotation)."""

    E = (0, 0)
    R = (0, 1)
    R2 = (0, 2)
    R3 = (0, 3)
    S = (1, 0)
    SR = (1, 1)
    SR2 = (1, 2)
    SR3 = (1, 3)

    @property
    def label(self) -> str:
        return self.name.lower()


ELEMENTS: tuple[D4Element, ...] = tuple(D4Element)

# Source coordinates for output cell (i, j) of an n x n matrix.
_SOURCE_MAPS = {
    D4Element.E: lambda i, j, n: (i, j),
    D4Element.R: lambda i, j, n: (n - 1 - j, i),
    D4Element.R2: lambda i, j, n: (n - 1 - i, n - 1 - j),
    D4Element.R3: lambda i, j, n: (j, n - 1 - i),
    D4Element.S: lambda i, j, n: (i, n - 1 - j),
    D4Element.SR: lambda i, j, n: (j, i),
    D4Element.SR2: lambda i, j, n: (n - 1 - i, j),
    D4Element.SR3: lambda i, j, n: (n - 1 - j, n - 1 - i),
}


@lru_cache(maxsize=None)
def permutation(t: D4Element, n: int) -> np.ndarray:
    """Flat index permutation p with apply(t, M).flat[q] == M.flat[p[q]]."""
    src = _SOURCE_MAPS[t]
    p = np.empty(n * n, dtype=np.intp)
    for i in range(n):
        for j in range(n):
            si, sj = src(i, j, n)
            p[i * n + j] = si * n + sj
    p.setflags(write=False)
    return p


def apply(t: D4Element, m) -> np.ndarray:
    """Transform a square matrix by the given group element."""
    a = check_kernel(m)
    n = a.shape[0]
    return a.ravel()[permutation(t, n)].reshape(n, n)


def compose(t1: D4Element, t2: D4Element) -> D4Element:
    """Group product: the element acting as t2 followed by t1."""
    m1, k1 = t1.value
    m2, k2 = t2.value
    m = m1 ^ m2
    k = (k2 - k1 if m2 else k2 + k1) % 4
    return D4Element((m, k))


def inverse(t: D4Element) -> D4Element:
    """The element undoing t: compose(t, inverse(t)) == E."""
    m, k = t.value
    if m:
        return t  # reflections are involutions
    return D4Element((0, (-k) % 4))


def non_identity_set() -> tuple[D4Element, ...]:
    """The seven non-identity elements, in the fixed order r, r2, r3, s, sr, sr2, sr3.

    The identity is omitted because its distance term is always zero and
    carries no information about a kernel's symmetry.
    """
    return ELEMENTS[1:]

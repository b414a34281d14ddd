"""Pauli words, Bloch vectors and Pauli transfer matrices at arbitrary precision.

Conventions:
    * A Pauli word on ``n`` qubits is indexed by an integer ``i < 4**n``. The
      single-qubit factor on qubit ``m`` (1-based) is ``(i // 4**(m-1)) % 4``
      with 0=I, 1=X, 2=Y, 3=Z, so qubit 1 is the least-significant digit and
      the rightmost tensor factor.
    * A transfer matrix ``M`` maps Bloch vectors (Pauli expectations) as
      ``v_out = M @ v_in``. A rotation ``R(theta)`` generated by ``P`` is the
      channel ``rho -> U rho U^dag`` with ``U = exp(i theta/2 P)``.
"""

from __future__ import annotations

import functools
import os
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .errors import (
    DimensionMismatch,
    IndexOutOfRange,
    InvalidProbability,
    SpanOutOfRange,
)

PAULI_LABELS = "IXYZ"
DEFAULT_DIGITS = 64
MAX_QUBITS = 5


@dataclass(frozen=True)
class PrecisionContext:
    """Decimal-precision scope for every numeric computation.

    Each instance owns a private mpmath context, so two contexts with different
    digits never interfere and results for a given ``digits`` are reproducible.

    Attributes:
        digits: Decimal significant digits (at least 16).
    """

    digits: int = DEFAULT_DIGITS
    mp: mpmath.MPContext = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if int(self.digits) < 16:
            raise ValueError(f"digits must be >= 16, got {self.digits}")
        ctx = mpmath.MPContext()
        ctx.dps = int(self.digits)
        object.__setattr__(self, "mp", ctx)

    def mpf(self, x):
        """Convert ``x`` (int, float, str or mpf) to this context's real type."""
        if isinstance(x, str):
            return self.mp.mpf(x)
        if isinstance(x, (mpmath.mpf, mpmath.mpc)) or hasattr(x, "_mpf_"):
            return self.mp.mpf(x)
        if isinstance(x, (int, np.integer)):
            return self.mp.mpf(int(x))
        return self.mp.mpf(float(x)) if isinstance(x, np.floating) else self.mp.mpf(x)

    def mpc(self, re, im=0):
        return self.mp.mpc(self.mpf(re), self.mpf(im))

    @property
    def pi(self):
        return self.mp.pi

    def tol(self, slack: int = 0):
        """Tolerance ``10**(-digits + slack)``."""
        return self.mp.mpf(10) ** (-(self.digits - slack))

    def half_tol(self):
        """Tolerance ``10**(-digits/2)`` used for unbiasedness checks."""
        return self.mp.mpf(10) ** (-(self.digits // 2))

    def zeros(self, shape):
        out = np.empty(shape, dtype=object)
        zero = self.mp.mpf(0)
        out.fill(zero)
        return out

    def identity(self, dim: int):
        out = self.zeros((dim, dim))
        one = self.mp.mpf(1)
        for i in range(dim):
            out[i, i] = one
        return out

    def array(self, values):
        arr = np.asarray(values, dtype=object)
        return np.vectorize(self.mpf, otypes=[object])(arr) if arr.size else arr


@functools.lru_cache(maxsize=None)
def _context_for(digits: int) -> PrecisionContext:
    return PrecisionContext(digits)


def default_context() -> PrecisionContext:
    """Context at ``MITIQ_FORGE_DIGITS`` digits if set, otherwise 64."""
    env = os.environ.get("MITIQ_FORGE_DIGITS")
    digits = int(env) if env else DEFAULT_DIGITS
    return _context_for(digits)


def get_context(ctx: PrecisionContext | int | None) -> PrecisionContext:
    if ctx is None:
        return default_context()
    if isinstance(ctx, PrecisionContext):
        return ctx
    return _context_for(int(ctx))


@dataclass(frozen=True)
class PauliWord:
    """Pauli word with per-qubit factors read from base-4 digits of ``index``."""

    index: int
    n_qubits: int

    def factor(self, qubit: int) -> int:
        """Single-qubit Pauli index acting on 1-based ``qubit``."""
        return (self.index // 4 ** (qubit - 1)) % 4

    def factors(self) -> tuple:
        """Factors ordered from qubit ``n`` (leftmost) down to qubit 1."""
        return tuple(self.factor(q) for q in range(self.n_qubits, 0, -1))

    def label(self) -> str:
        return "".join(PAULI_LABELS[f] for f in self.factors())

    def __str__(self):
        return "⊗".join(PAULI_LABELS[f] for f in self.factors())


def pauli_word(index: int, n_qubits: int) -> PauliWord:
    """Build the Pauli word with the given index on ``n_qubits`` qubits.

    Raises:
        IndexOutOfRange: if ``index >= 4**n_qubits`` or is negative.
    """
    if n_qubits < 1:
        raise ValueError("n_qubits must be positive")
    if index < 0 or index >= 4**n_qubits:
        raise IndexOutOfRange(f"index {index} not in [0, {4 ** n_qubits})")
    return PauliWord(int(index), int(n_qubits))


# single-qubit products: _PHASE[a][b] is the phase of P_a P_b = phase * P_(a^b)
_PHASE = (
    (1, 1, 1, 1),
    (1, 1, 1j, -1j),
    (1, -1j, 1, 1j),
    (1, 1j, -1j, 1),
)


def word_product(a: int, b: int, n_qubits: int) -> tuple:
    """Return ``(phase, index)`` with ``P_a P_b = phase * P_index``."""
    phase = 1
    for q in range(n_qubits):
        da = (a >> (2 * q)) & 3
        db = (b >> (2 * q)) & 3
        phase *= _PHASE[da][db]
    return phase, a ^ b


def anticommutes(a: int, b: int, n_qubits: int) -> bool:
    count = 0
    for q in range(n_qubits):
        da = (a >> (2 * q)) & 3
        db = (b >> (2 * q)) & 3
        if da and db and da != db:
            count += 1
    return count % 2 == 1


@functools.lru_cache(maxsize=None)
def rotation_tables(generator: int, n_qubits: int):
    """Index tables describing a rotation generated by Pauli word ``generator``.

    Returns:
        ``(anti, partner, sign)`` integer arrays. ``anti`` lists the words that
        anticommute with the generator; ``partner[k]`` is ``anti[k] ^ generator``;
        ``sign[k]`` is the real sign ``s`` with ``R(theta)`` mapping
        ``P_w -> cos(theta) P_w + s sin(theta) P_partner``.
    """
    anti, partner, sign = [], [], []
    for w in range(4**n_qubits):
        if anticommutes(w, generator, n_qubits):
            phase, w2 = word_product(w, generator, n_qubits)
            s = (-1j * phase).real
            anti.append(w)
            partner.append(w2)
            sign.append(int(round(s)))
    return (
        np.array(anti, dtype=np.int64),
        np.array(partner, dtype=np.int64),
        np.array(sign, dtype=np.int64),
    )


@dataclass(frozen=True)
class BlochVector:
    """Vector of Pauli-word expectations of an ``n``-qubit state."""

    n_qubits: int
    entries: np.ndarray

    def __post_init__(self):
        if len(self.entries) != 4**self.n_qubits:
            raise DimensionMismatch("Bloch vector length must be 4**n")


@dataclass(frozen=True)
class TransferMatrix:
    """Real ``4**n x 4**n`` Pauli transfer matrix."""

    n_qubits: int
    entries: np.ndarray

    def __post_init__(self):
        d = 4**self.n_qubits
        if self.entries.shape != (d, d):
            raise DimensionMismatch("transfer matrix must be 4**n square")

    def __matmul__(self, other: "TransferMatrix") -> "TransferMatrix":
        if other.n_qubits != self.n_qubits:
            raise DimensionMismatch("cannot compose matrices of different size")
        return TransferMatrix(self.n_qubits, self.entries.dot(other.entries))

    def is_trace_preserving(self) -> bool:
        row = self.entries[0]
        return row[0] == 1 and all(x == 0 for x in row[1:])


def _check_p(p):
    if p < 0 or p > 1:
        raise InvalidProbability(f"p={p} outside [0, 1]")


def rotation_ptm(generator: int, n_qubits: int, cos_part, sin_part, ctx=None) -> TransferMatrix:
    """Transfer matrix of a scaled rotation about a Pauli word.

    Words commuting with the generator are left unchanged. Each anticommuting
    word ``P_w`` is sent to ``cos_part * P_w + s * sin_part * P_partner``. With
    ``cos_part = (1-2p)cos(theta)`` and ``sin_part = (1-2p)sin(theta)`` this is
    the rotation by ``theta`` followed by a stochastic flip with probability p.
    """
    ctx = get_context(ctx)
    m = ctx.identity(4**n_qubits)
    a, b = ctx.mpf(cos_part), ctx.mpf(sin_part)
    anti, partner, sign = rotation_tables(generator, n_qubits)
    for w, w2, s in zip(anti, partner, sign):
        m[w, w] = a
        m[w2, w] = b if s > 0 else -b
    return TransferMatrix(n_qubits, m)


def basis_ptm(axis: int, theta, p=0, ctx=None) -> TransferMatrix:
    """Single-qubit ``R_axis(theta, p)`` matrix entered entry by entry.

    Args:
        axis: 1, 2 or 3 for X, Y, Z generators.
        theta: rotation angle in radians.
        p: stochastic flip probability in [0, 1].
    """
    if axis not in (1, 2, 3):
        raise ValueError("axis must be 1, 2 or 3")
    _check_p(p)
    ctx = get_context(ctx)
    th = ctx.mpf(theta)
    scale = 1 - 2 * ctx.mpf(p)
    c = scale * ctx.mp.cos(th)
    s = scale * ctx.mp.sin(th)
    m = ctx.identity(4)
    if axis == 1:
        m[2, 2], m[2, 3], m[3, 2], m[3, 3] = c, s, -s, c
    elif axis == 2:
        m[1, 1], m[1, 3], m[3, 1], m[3, 3] = c, -s, s, c
    else:
        m[1, 1], m[1, 2], m[2, 1], m[2, 2] = c, s, -s, c
    return TransferMatrix(1, m)


_ZZ_DIAG = (1, 2, 4, 7, 8, 11, 13, 14)
_ZZ_PLUS = ((1, 14), (4, 11), (7, 8), (13, 2))
_ZZ_MINUS = ((14, 1), (11, 4), (8, 7), (2, 13))


def zz_ptm(theta, p=0, ctx=None) -> TransferMatrix:
    """Two-qubit ``R_15(theta, p)`` (generator Z (x) Z) entered from its entry list."""
    _check_p(p)
    ctx = get_context(ctx)
    th = ctx.mpf(theta)
    scale = 1 - 2 * ctx.mpf(p)
    c = scale * ctx.mp.cos(th)
    s = scale * ctx.mp.sin(th)
    m = ctx.identity(16)
    for i in _ZZ_DIAG:
        m[i, i] = c
    for i, j in _ZZ_PLUS:
        m[i, j] = s
    for i, j in _ZZ_MINUS:
        m[i, j] = -s
    return TransferMatrix(2, m)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product of object arrays (``np.kron`` keeps the dtype)."""
    return np.kron(a, b)


def promote(tm: TransferMatrix, lowest_target_qubit: int, n_total: int, ctx=None) -> TransferMatrix:
    """Embed ``tm`` acting on a contiguous span into ``n_total`` qubits.

    Qubit 1 is the rightmost tensor factor, so a one-qubit matrix on qubit
    ``q`` becomes ``I^(n-q) (x) M (x) I^(q-1)``.

    Raises:
        SpanOutOfRange: if the span does not fit.
    """
    k = tm.n_qubits
    q = lowest_target_qubit
    if q < 1 or q + k - 1 > n_total or n_total > MAX_QUBITS:
        raise SpanOutOfRange(f"span {q}..{q + k - 1} does not fit in {n_total} qubits")
    ctx = get_context(ctx)
    left = ctx.identity(4 ** (n_total - q - k + 1))
    right = ctx.identity(4 ** (q - 1))
    return TransferMatrix(n_total, kron(kron(left, tm.entries), right))


def apply(tm: TransferMatrix, v: BlochVector) -> BlochVector:
    """Matrix-vector product ``tm @ v``."""
    if tm.n_qubits != v.n_qubits:
        raise DimensionMismatch("transfer matrix and vector sizes differ")
    return BlochVector(v.n_qubits, tm.entries.dot(v.entries))


def initial_bloch(n_qubits: int, ctx=None) -> BlochVector:
    """Bloch vector of the all-zero product state, ``(1, 0, 0, 1)^(x)n``."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be positive")
    ctx = get_context(ctx)
    one, zero = ctx.mpf(1), ctx.mpf(0)
    single = np.array([one, zero, zero, one], dtype=object)
    out = single
    for _ in range(n_qubits - 1):
        out = np.kron(single, out)
    return BlochVector(n_qubits, out)


def measure_qubit1(v: BlochVector) -> tuple:
    """Return ``(<X>, <Y>, <Z>, <I>)`` on qubit 1, read from entries 1, 2, 3, 0."""
    e = v.entries
    return e[1], e[2], e[3], e[0]


def apply_rotation(state: np.ndarray, generator: int, n_qubits: int, cos_part, sin_part) -> np.ndarray:
    """Apply a scaled rotation directly to a flat Bloch-vector array.

    Equivalent to ``rotation_ptm(...) @ state`` but touches only the words that
    anticommute with the generator.
    """
    anti, partner, _ = rotation_tables(generator, n_qubits)
    out = state.copy()
    # row w receives column partner(w) with the sign stored for partner(w)
    psign = _partner_sign(generator, n_qubits)
    out[anti] = cos_part * state[anti] + sin_part * (psign * state[partner])
    return out


@functools.lru_cache(maxsize=None)
def _partner_sign(generator: int, n_qubits: int) -> np.ndarray:
    anti, partner, sign = rotation_tables(generator, n_qubits)
    lookup = {int(w): int(s) for w, s in zip(anti, sign)}
    return np.array([lookup[int(p)] for p in partner], dtype=object)


def dense_unitary_ptm(u: np.ndarray, n_qubits: int) -> np.ndarray:
    """Float transfer matrix of a unitary given as a complex matrix.

    Used as an independent oracle in tests and for compilation checks.
    """
    paulis = [
        np.eye(2, dtype=complex),
        np.array([[0, 1], [1, 0]], dtype=complex),
        np.array([[0, -1j], [1j, 0]], dtype=complex),
        np.array([[1, 0], [0, -1]], dtype=complex),
    ]
    words = []
    for i in range(4**n_qubits):
        mat = np.eye(1, dtype=complex)
        for q in range(n_qubits, 0, -1):
            mat = np.kron(mat, paulis[(i // 4 ** (q - 1)) % 4])
        words.append(mat)
    d = 2**n_qubits
    out = np.zeros((4**n_qubits, 4**n_qubits))
    for k, pk in enumerate(words):
        img = u @ pk @ u.conj().T
        for j, pj in enumerate(words):
            out[j, k] = np.trace(pj @ img).real / d
    return out

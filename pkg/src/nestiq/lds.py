"""Low-discrepancy point sets and their randomizations.

Sobol digital sequences in base 2 (Gray-code order), Owen nested-uniform
scrambling, random shifts, rank-1 lattice points, and exact star-discrepancy
diagnostics for small point sets.

All randomness flows through :class:`RandomizationKey`, a counter-based keyed
scheme: distinct (seed, tag, indices) tuples give independent bit streams,
every operation is a pure function of its explicit inputs, and identical
inputs reproduce bit-identical outputs regardless of call order or threading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "RandomizationKey",
    "SobolParams",
    "DigitalSequence",
    "PointSet",
    "load_direction_numbers",
    "sobol_sequence",
    "owen_scramble",
    "random_shift",
    "lattice_points",
    "star_discrepancy_1d",
    "star_discrepancy_brute",
]

_MASK64 = (1 << 64) - 1
_GOLD_INT = 0x9E3779B97F4A7C15
_GOLD = np.uint64(_GOLD_INT)
_TREE_SALT = np.uint64(0xA0761D6478BD642F)
_FILL_SALT = np.uint64(0xE7037ED1A0B428DB)

# Smallest/largest coordinates a PointSet may carry.  The lower bound keeps
# inverse-CDF transforms finite; the upper bound is the largest double < 1.
COORD_MIN = 2.0 ** -64
COORD_MAX = float(np.nextafter(1.0, 0.0))


def _mix64_int(z: int) -> int:
    """SplitMix64 finalizer on Python ints (mod 2^64)."""
    z &= _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def mix64(z: np.ndarray) -> np.ndarray:
    """Vectorized SplitMix64 finalizer on uint64 arrays."""
    z = np.asarray(z, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))


def _fold_int(root: int, value) -> int:
    """Fold one index or short string into a 64-bit root."""
    if isinstance(value, str):
        r = _mix64_int(root ^ 0x5BF03635)
        for b in value.encode("utf-8"):
            r = _mix64_int(r ^ (((b + 1) * _GOLD_INT) & _MASK64))
        return r
    return _mix64_int(root ^ (((int(value) + 1) * _GOLD_INT) & _MASK64))


def fold_index_array(root, idx: np.ndarray) -> np.ndarray:
    """Fold an integer index array into root(s); broadcasts, returns uint64."""
    root = np.asarray(root, dtype=np.uint64)
    idx = np.asarray(idx, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return mix64(root ^ ((idx + np.uint64(1)) * _GOLD))


@dataclass(frozen=True)
class RandomizationKey:
    """Identifier of one independent randomization stream.

    The (seed, tag, indices) triple is hashed into a 64-bit root from which
    scramble trees, shift vectors and plain uniforms are derived lazily.
    Distinct triples yield statistically independent streams.
    """

    seed: int
    tag: str = ""
    indices: tuple = ()

    def child(self, *indices) -> "RandomizationKey":
        """Extend the index tuple (integers or short strings)."""
        return RandomizationKey(self.seed, self.tag, self.indices + tuple(indices))

    def root(self) -> int:
        r = _mix64_int((self.seed & _MASK64) ^ 0x6A09E667F3BCC909)
        r = _fold_int(r, self.tag)
        for ix in self.indices:
            r = _fold_int(r, ix)
        return r

    def subroot(self, *extra) -> int:
        r = self.root()
        for ix in extra:
            r = _fold_int(r, ix)
        return r

    def uniforms(self, shape, salt: str = "uniform") -> np.ndarray:
        """Deterministic iid uniforms on (0,1), clamped away from 0 and 1."""
        shape = (shape,) if isinstance(shape, int) else tuple(shape)
        size = int(np.prod(shape)) if shape else 1
        base = np.uint64(self.subroot(salt))
        ctr = np.arange(1, size + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            bits = mix64(base ^ (ctr * _GOLD))
        u = (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53
        return np.clip(u, COORD_MIN, COORD_MAX).reshape(shape)


# ---------------------------------------------------------------------------
# Sobol direction numbers
# ---------------------------------------------------------------------------

# Joe-Kuo "new-joe-kuo-6" records "d s a m_1 ... m_s" for dimensions 2..64.
# Dimension 1 is the base-2 radical inverse (van der Corput) and needs no
# record.  Published initial values; expanded to 32 bits at load time.
_BUILTIN_JOE_KUO = """
2 1 0 1
3 2 1 1 3
4 3 1 1 3 1
5 3 2 1 1 1
6 4 1 1 1 3 3
7 4 4 1 3 5 13
8 5 2 1 1 5 5 17
9 5 4 1 1 5 5 5
10 5 7 1 1 7 11 19
11 5 11 1 1 5 1 1
12 5 13 1 1 1 3 11
13 5 14 1 3 5 5 31
14 6 1 1 3 3 9 7 49
15 6 13 1 1 1 15 21 21
16 6 16 1 3 1 13 27 49
17 6 19 1 1 1 15 7 5
18 6 22 1 3 1 15 13 25
19 6 25 1 1 5 5 19 61
20 7 1 1 3 7 11 23 15 103
21 7 4 1 3 7 13 13 15 69
22 7 7 1 1 3 13 7 35 63
23 7 8 1 3 5 9 1 25 53
24 7 14 1 3 1 13 9 35 107
25 7 19 1 3 1 5 27 61 31
26 7 21 1 1 5 11 19 41 61
27 7 28 1 3 5 3 3 13 69
28 7 31 1 1 7 13 1 19 1
29 7 32 1 3 7 5 13 19 59
30 7 37 1 1 3 9 25 29 41
31 7 41 1 3 5 13 23 1 55
32 7 42 1 3 7 3 13 59 17
33 7 50 1 3 1 3 5 53 69
34 7 55 1 1 5 5 23 33 13
35 7 56 1 1 7 7 1 61 123
36 7 59 1 1 7 9 13 61 49
37 7 62 1 3 3 5 3 55 33
38 8 14 1 3 1 15 31 13 49 245
39 8 21 1 3 5 15 31 59 63 97
40 8 22 1 3 1 11 11 11 77 249
41 8 38 1 3 1 11 27 43 71 9
42 8 47 1 1 7 15 21 11 81 45
43 8 49 1 3 7 3 25 31 65 79
44 8 50 1 3 1 1 19 11 3 205
45 8 52 1 1 5 9 19 21 29 157
46 8 56 1 3 7 11 1 33 89 185
47 8 67 1 3 3 3 15 9 79 71
48 8 70 1 3 7 11 15 39 119 27
49 8 84 1 1 3 1 11 31 97 225
50 8 97 1 1 1 3 23 43 57 177
51 8 103 1 3 7 7 17 17 37 71
52 8 115 1 3 1 5 27 63 123 213
53 8 122 1 1 3 5 11 43 53 133
54 9 8 1 3 5 5 29 17 47 173 479
55 9 13 1 3 3 11 3 1 109 9 69
56 9 16 1 1 1 5 17 39 23 5 343
57 9 22 1 3 1 5 25 15 31 103 499
58 9 25 1 1 1 11 11 17 63 105 183
59 9 44 1 1 5 11 9 29 97 231 363
60 9 47 1 1 5 15 19 45 41 7 383
61 9 52 1 3 7 7 31 19 83 137 221
62 9 55 1 1 1 3 23 15 111 223 83
63 9 59 1 1 5 13 31 15 55 25 161
64 9 62 1 1 3 13 25 47 39 87 257
"""

_N_BITS = 32


class DirectionNumberError(ValueError):
    """Malformed or inconsistent direction-number input."""


@dataclass(frozen=True)
class SobolParams:
    """Expanded Sobol parameters: 32 direction numbers per dimension.

    ``directions[j, k]`` is v_{j,k+1} stored as a bit-reversed fraction:
    an unsigned 32-bit integer in [2^(32-k-1), 2^32).
    """

    directions: np.ndarray
    poly_degree: np.ndarray
    poly_coeff: np.ndarray

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=np.uint32)
        if d.ndim != 2 or d.shape[1] != _N_BITS or d.shape[0] < 1:
            raise DirectionNumberError("directions must be (dimension, 32)")
        k = np.arange(1, _N_BITS + 1)
        lo = (np.uint64(1) << np.uint64(_N_BITS)) >> k.astype(np.uint64)
        if np.any(d.astype(np.uint64) < lo[None, :]):
            raise DirectionNumberError(
                "direction number v_k must have its top bit among the first k bits"
            )
        object.__setattr__(self, "directions", d)

    @property
    def dimension(self) -> int:
        return self.directions.shape[0]


def _expand_directions(degree: int, coeff: int, m_init: list[int]) -> np.ndarray:
    """Expand initial odd integers m_1..m_s to 32 direction numbers."""
    v = np.zeros(_N_BITS, dtype=np.uint64)
    for k, m in enumerate(m_init):
        v[k] = np.uint64(m << (_N_BITS - k - 1))
    for k in range(degree, _N_BITS):
        acc = int(v[k - degree]) ^ (int(v[k - degree]) >> degree)
        for i in range(1, degree):
            if (coeff >> (degree - 1 - i)) & 1:
                acc ^= int(v[k - i])
        v[k] = np.uint64(acc)
    return v.astype(np.uint32)


def _van_der_corput_directions() -> np.ndarray:
    return (np.uint64(1) << (np.uint64(_N_BITS) - np.arange(1, _N_BITS + 1, dtype=np.uint64))).astype(np.uint32)


def load_direction_numbers(source=None, dimension: int | None = None) -> SobolParams:
    """Build :class:`SobolParams` from a Joe-Kuo format text source.

    ``source`` may be bytes, a string, or any iterable of lines holding
    whitespace-separated records ``d s a m_1 ... m_s`` (one optional header
    line is tolerated).  Without a source, a built-in table covers
    dimensions 1-64.  Dimension 1 always uses the base-2 radical inverse.
    """
    if source is None:
        text = _BUILTIN_JOE_KUO
    elif isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        text = "\n".join(
            ln.decode("utf-8") if isinstance(ln, bytes) else str(ln) for ln in source
        )

    rows = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped:
            continue
        tokens = stripped.split()
        try:
            values = [int(t) for t in tokens]
        except ValueError:
            if not rows and lineno <= 2:
                continue  # header line
            raise DirectionNumberError(f"line {lineno}: non-numeric token in record")
        if len(values) < 4:
            raise DirectionNumberError(f"line {lineno}: expected 'd s a m_1 ... m_s'")
        d, s, a = values[0], values[1], values[2]
        m = values[3:]
        if len(m) != s:
            raise DirectionNumberError(
                f"line {lineno}: degree {s} but {len(m)} initial values"
            )
        if s < 1 or a < 0 or (s > 1 and a >= (1 << (s - 1))):
            raise DirectionNumberError(f"line {lineno}: invalid polynomial (s={s}, a={a})")
        for k, mk in enumerate(m, start=1):
            if mk % 2 == 0:
                raise DirectionNumberError(
                    f"line {lineno}: initial value m_{k}={mk} must be odd"
                )
            if not 0 < mk < (1 << k):
                raise DirectionNumberError(
                    f"line {lineno}: initial value m_{k}={mk} out of range [1, 2^{k})"
                )
        rows.append((lineno, d, s, a, m))

    rows.sort(key=lambda r: r[1])
    expected = 2
    for lineno, d, _, _, _ in rows:
        if d != expected:
            raise DirectionNumberError(
                f"line {lineno}: dimension {d} where {expected} expected (gap or duplicate)"
            )
        expected += 1

    if dimension is not None:
        if dimension < 1:
            raise DirectionNumberError("dimension must be >= 1")
        if dimension > len(rows) + 1:
            raise DirectionNumberError(
                f"requested dimension {dimension} exceeds table size {len(rows) + 1}"
            )
        rows = rows[: max(dimension - 1, 0)]

    dim = len(rows) + 1
    directions = np.empty((dim, _N_BITS), dtype=np.uint32)
    degrees = np.zeros(dim, dtype=np.int64)
    coeffs = np.zeros(dim, dtype=np.int64)
    directions[0] = _van_der_corput_directions()
    for j, (_, _, s, a, m) in enumerate(rows, start=1):
        directions[j] = _expand_directions(s, a, m)
        degrees[j] = s
        coeffs[j] = a
    return SobolParams(directions=directions, poly_degree=degrees, poly_coeff=coeffs)


# ---------------------------------------------------------------------------
# Point set containers
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DigitalSequence:
    """Integer-lattice representation of a digital point set.

    ``values`` is (count, dimension) uint32; the unrandomized coordinate is
    ``value / 2^32``.  Counts are restricted to powers of two, the block
    sizes for which base-2 digital nets balance dyadic boxes.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.uint32)
        if v.ndim != 2:
            raise ValueError("values must be a (count, dimension) array")
        m = v.shape[0]
        if m < 1 or (m & (m - 1)) != 0:
            raise ValueError(f"count must be a power of two, got {m}")
        object.__setattr__(self, "values", v)

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def dimension(self) -> int:
        return self.values.shape[1]

    def fractions(self) -> np.ndarray:
        """Raw coordinates value/2^32 (may contain exact zeros)."""
        return self.values.astype(np.float64) * 2.0**-32


@dataclass(frozen=True)
class PointSet:
    """Real-valued points strictly inside (0,1)^d.

    Coordinates are clamped to [2^-64, 1-2^-64] so inverse-CDF transforms
    stay finite.
    """

    values: np.ndarray

    def __post_init__(self):
        v = np.ascontiguousarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError("values must be a nonempty (count, dimension) array")
        if np.any(v < COORD_MIN) or np.any(v > COORD_MAX):
            raise ValueError("coordinates must lie in [2^-64, 1-2^-64]")
        object.__setattr__(self, "values", v)

    @property
    def count(self) -> int:
        return self.values.shape[0]

    @property
    def dimension(self) -> int:
        return self.values.shape[1]


def _clamp_unit(values: np.ndarray) -> np.ndarray:
    return np.clip(values, COORD_MIN, COORD_MAX)


# ---------------------------------------------------------------------------
# Sequence generation and randomization
# ---------------------------------------------------------------------------


def sobol_sequence(params: SobolParams, dimension: int, log2_count: int) -> DigitalSequence:
    """First 2^log2_count Sobol points in ``dimension`` dims, Gray-code order.

    The point set equals the first block of the sequence; for dimension 1
    the integers are exactly {i * 2^(32-k) : 0 <= i < 2^k} as a set.
    """
    if not 1 <= dimension <= params.dimension:
        raise ValueError(
            f"dimension {dimension} out of range [1, {params.dimension}]"
        )
    if not 0 <= log2_count <= 31:
        raise ValueError(f"log2_count {log2_count} out of range [0, 31]")
    m = 1 << log2_count
    values = np.zeros((m, dimension), dtype=np.uint32)
    if m > 1:
        idx = np.arange(1, m, dtype=np.int64)
        # lowest set bit of i selects the direction number toggled at step i
        ctz = np.log2(idx & -idx).astype(np.int64)
        steps = params.directions[:dimension, :][:, ctz]  # (d, m-1)
        values[1:] = np.bitwise_xor.accumulate(steps, axis=1).T
    return DigitalSequence(values=values)


def _owen_lanes(root, dimension: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension 64-bit lane keys for the scramble tree and bit fill.

    ``root`` may be a scalar or an array of stream roots; lanes broadcast to
    root.shape + (dimension,).
    """
    root = np.asarray(root, dtype=np.uint64)[..., None]
    d_idx = (np.arange(1, dimension + 1, dtype=np.uint64)) * _GOLD
    with np.errstate(over="ignore"):
        tree = mix64(root ^ d_idx ^ _TREE_SALT)
        fill = mix64(root ^ d_idx ^ _FILL_SALT)
    return tree, fill


def _scramble_values(values_u32: np.ndarray, tree: np.ndarray, fill: np.ndarray) -> np.ndarray:
    """Nested uniform scramble of 32-bit integers under per-dim lane keys.

    ``values_u32`` is (M, d); ``tree``/``fill`` broadcast as (..., d).
    Returns floats of shape (..., M, d) in [2^-64, 1-2^-53].

    The permutation bit at tree depth k is a keyed hash of the k leading
    original digits (heap-indexed node id), which realizes Owen scrambling
    without materializing permutation trees.  Digits 33-64 are filled with
    uniform bits hashed from the full 32-digit path.
    """
    x = values_u32.astype(np.uint64)  # (M, d)
    tree = np.asarray(tree, dtype=np.uint64)[..., None, :]  # (..., 1, d)
    fill = np.asarray(fill, dtype=np.uint64)[..., None, :]
    one = np.uint64(1)
    out = np.zeros(np.broadcast_shapes(tree.shape, x.shape), dtype=np.uint64)
    with np.errstate(over="ignore"):
        for k in range(_N_BITS):
            prefix = x >> np.uint64(_N_BITS - k)
            node = (one << np.uint64(k)) | prefix
            h = mix64((node * _GOLD) ^ tree)
            digit = (x >> np.uint64(_N_BITS - 1 - k)) & one
            out |= ((digit ^ (h >> np.uint64(63))) << np.uint64(63 - k))
        low = mix64((x * _GOLD) ^ fill) & np.uint64(0xFFFFFFFF)
        out |= low
    u = (out >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return np.maximum(u, COORD_MIN)


def owen_scramble(seq: DigitalSequence, key: RandomizationKey) -> PointSet:
    """Owen nested uniform scrambling of a digital sequence.

    One key scrambles the whole sequence (the same randomization applies to
    every point); every output coordinate is marginally uniform on (0,1).
    """
    tree, fill = _owen_lanes(key.subroot("owen"), seq.dimension)
    return PointSet(values=_scramble_values(seq.values, tree, fill))


def random_shift(points: PointSet, key: RandomizationKey, shift=None) -> PointSet:
    """Shift all points by one uniform vector, modulo 1.

    ``shift`` overrides the drawn vector (test hook).
    """
    if shift is None:
        shift = key.uniforms(points.dimension, salt="shift")
    else:
        shift = np.asarray(shift, dtype=np.float64)
        if shift.shape != (points.dimension,):
            raise ValueError("shift vector dimension mismatch")
    return PointSet(values=_clamp_unit(np.mod(points.values + shift, 1.0)))


def lattice_points(generating_vector, count: int) -> PointSet:
    """Rank-1 lattice t_m = mod((m-1) * w / count, 1), m = 1..count.

    Exposed for comparison experiments; pair with :func:`random_shift` for
    randomization.
    """
    w = np.asarray(generating_vector, dtype=np.float64)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("generating vector must be a nonempty 1-D sequence")
    if count < 1:
        raise ValueError("count must be >= 1")
    m = np.arange(count, dtype=np.float64)[:, None]
    return PointSet(values=_clamp_unit(np.mod(m * (w[None, :] / count), 1.0)))


# ---------------------------------------------------------------------------
# Star discrepancy
# ---------------------------------------------------------------------------


def _as_coords(points) -> np.ndarray:
    if isinstance(points, PointSet):
        return points.values
    if isinstance(points, DigitalSequence):
        return points.fractions()
    arr = np.asarray(points, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[:, None]
    return arr


def star_discrepancy_1d(points) -> float:
    """Exact 1-D star discrepancy via the sorted-points formula."""
    coords = _as_coords(points)
    if coords.shape[1] != 1:
        raise ValueError("star_discrepancy_1d requires dimension 1")
    t = np.sort(coords[:, 0])
    m = t.size
    if m == 0:
        raise ValueError("empty point set")
    i = np.arange(1, m + 1, dtype=np.float64)
    return float(max(np.max(i / m - t), np.max(t - (i - 1) / m)))


def star_discrepancy_brute(points) -> float:
    """Exact star discrepancy by candidate-box enumeration (test oracle).

    Restricted to dimension <= 3 and at most 64 points; the supremum over
    anchored boxes [0, s) is attained on the grid of point coordinates per
    axis plus 1.
    """
    coords = _as_coords(points)
    m, d = coords.shape
    if m == 0:
        raise ValueError("empty point set")
    if d > 3 or m > 64:
        raise ValueError(
            f"star_discrepancy_brute limited to dimension <= 3 and 64 points, "
            f"got ({m}, {d})"
        )
    axes = [np.unique(np.concatenate([coords[:, j], [1.0]])) for j in range(d)]
    grids = np.meshgrid(*axes, indexing="ij")
    corners = np.stack([g.ravel() for g in grids], axis=1)  # (n_boxes, d)
    vol = np.prod(corners, axis=1)
    # closed count bounds the sup from the right limit; open count handles [0, s)
    inside_le = np.all(coords[None, :, :] <= corners[:, None, :], axis=2)
    inside_lt = np.all(coords[None, :, :] < corners[:, None, :], axis=2)
    n_le = inside_le.sum(axis=1) / m
    n_lt = inside_lt.sum(axis=1) / m
    return float(max(np.max(n_le - vol), np.max(vol - n_lt)))

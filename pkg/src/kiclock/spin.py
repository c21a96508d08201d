"""Electron-nuclear spin Hamiltonian, labeled spectra and transition catalogs.

The model is a single electron spin ``S`` coupled to a single nucleus ``I``
through an isotropic hyperfine interaction, with a static field along z::

    H = -(gamma_e * Sz + gamma_n * Iz) * Bz + A * I.S

All energies are ordinary frequencies in Hz. With ``gamma_e < 0`` (electron)
the electron Zeeman term raises ``mS = +1/2``, and with ``gamma_n > 0`` the
nuclear term lowers ``mI = +9/2``, which is the usual sign convention.

Levels are labeled ``(F, m)`` by adiabatic continuation from zero field,
where ``F`` is the total angular momentum and ``m = mS + mI`` its projection.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Literal, NamedTuple

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import brentq

from .errors import InvalidArgumentError, LabelingError, NoRootError

#: Default field step for adiabatic label tracking (T).
LABEL_STEP = 1e-4
#: Finite-difference step for df/dB (T).
FD_STEP = 1e-6
#: |df/dB| threshold defining a clock transition (Hz/T); 1 kHz/mT.
CT_TOLERANCE = 1e6
#: Largest |Bz| accepted by :func:`labeled_spectrum` (T).
MAX_FIELD = 1.0

_MIN_STEP = 1e-10


def _is_half_integer(x: float) -> bool:
    return x >= 0 and abs(2 * x - round(2 * x)) < 1e-12


def _as_quantum_number(x: float) -> int | float:
    q = round(2 * x) / 2
    return int(q) if q == int(q) else q


@dataclass(frozen=True)
class SpinSystem:
    """Constants of the coupled electron-nuclear spin.

    Attributes:
        S: Electron spin quantum number.
        I: Nuclear spin quantum number.
        gamma_e: Electron gyromagnetic ratio, Hz/T (signed).
        gamma_n: Nuclear gyromagnetic ratio, Hz/T (signed).
        A: Isotropic hyperfine constant, Hz.
    """

    S: float = 0.5
    I: float = 4.5
    gamma_e: float = -28e9
    gamma_n: float = 8e6
    A: float = 1.47507e9

    def __post_init__(self):
        for name in ("S", "I"):
            if not _is_half_integer(getattr(self, name)):
                raise InvalidArgumentError(
                    f"{name} must be a non-negative half-integer, got {getattr(self, name)!r}"
                )

    @property
    def dim(self) -> int:
        return int(round((2 * self.S + 1) * (2 * self.I + 1)))


class SpinOperators(NamedTuple):
    Sx: NDArray
    Sy: NDArray
    Sz: NDArray
    Ix: NDArray
    Iy: NDArray
    Iz: NDArray


def _single_spin(j: float) -> tuple[NDArray, NDArray, NDArray]:
    m = np.arange(j, -j - 1, -1)  # descending basis: m = j, j-1, ..., -j
    jp = np.diag(np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1)), k=1)
    jx = (jp + jp.T) / 2
    jy = (jp - jp.T) / 2j
    return jx.astype(complex), jy, np.diag(m).astype(complex)


def build_operators(S: float, I: float) -> SpinOperators:
    """Angular-momentum operators on the product space ``|mS, mI>``.

    Both bases run from the largest projection down; ``S`` is the left
    factor of the Kronecker product.
    """
    if not (_is_half_integer(S) and _is_half_integer(I)):
        raise InvalidArgumentError(f"spins must be non-negative half-integers, got S={S}, I={I}")
    s_ops = _single_spin(S)
    i_ops = _single_spin(I)
    eye_s = np.eye(len(s_ops[2]))
    eye_i = np.eye(len(i_ops[2]))
    return SpinOperators(
        *(np.kron(op, eye_i) for op in s_ops),
        *(np.kron(eye_s, op) for op in i_ops),
    )


_OPS_CACHE: dict[tuple[float, float], SpinOperators] = {}


def _operators(system: SpinSystem) -> SpinOperators:
    key = (system.S, system.I)
    ops = _OPS_CACHE.get(key)
    if ops is None:
        ops = _OPS_CACHE[key] = build_operators(*key)
    return ops


def zeeman_operator(system: SpinSystem) -> NDArray:
    """dH/dBz in Hz/T."""
    ops = _operators(system)
    return -(system.gamma_e * ops.Sz + system.gamma_n * ops.Iz)


def hamiltonian(system: SpinSystem, Bz: float) -> NDArray:
    """Spin Hamiltonian at field ``Bz`` (T) in Hz, product basis."""
    if not np.isfinite(Bz):
        raise InvalidArgumentError(f"field must be finite, got {Bz!r}")
    ops = _operators(system)
    hf = ops.Ix @ ops.Sx + ops.Iy @ ops.Sy + ops.Iz @ ops.Sz
    return Bz * zeeman_operator(system) + system.A * hf


@dataclass(frozen=True)
class LabeledSpectrum:
    """Eigen-decomposition of the spin Hamiltonian with adiabatic labels.

    ``eigenvectors[:, k]`` is the level with energy ``energies[k]`` and label
    ``labels[k]``; energies ascend.
    """

    system: SpinSystem
    Bz: float
    energies: NDArray
    labels: tuple[tuple[int | float, int | float], ...]
    eigenvectors: NDArray = field(repr=False)

    def index(self, label: tuple) -> int:
        try:
            return self.labels.index(tuple(label))
        except ValueError:
            raise InvalidArgumentError(f"no level labeled {tuple(label)} at Bz={self.Bz} T") from None

    def energy(self, label: tuple) -> float:
        return float(self.energies[self.index(label)])

    def vector(self, label: tuple) -> NDArray:
        return self.eigenvectors[:, self.index(label)]


# ---------------------------------------------------------------------------
# block diagonalization and label tracking

def _m_blocks(system: SpinSystem) -> list[NDArray]:
    ops = _operators(system)
    m_total = np.real(np.diag(ops.Sz + ops.Iz))
    keys = np.round(2 * m_total).astype(int)
    return [np.flatnonzero(keys == k) for k in np.unique(keys)]


def _diagonalize(system: SpinSystem, Bz: float) -> tuple[NDArray, NDArray]:
    """Eigenpairs with every eigenvector confined to one m-sector."""
    h = hamiltonian(system, Bz)
    dim = system.dim
    energies = np.empty(dim)
    vectors = np.zeros((dim, dim), dtype=complex)
    col = 0
    for idx in _m_blocks(system):
        w, v = np.linalg.eigh(h[np.ix_(idx, idx)])
        n = len(idx)
        energies[col:col + n] = w
        vectors[idx, col:col + n] = v
        col += n
    order = np.argsort(energies, kind="stable")
    return energies[order], vectors[:, order]


def _zero_field_labels(system: SpinSystem, vectors: NDArray) -> list[tuple]:
    ops = _operators(system)
    fx, fy, fz = ops.Sx + ops.Ix, ops.Sy + ops.Iy, ops.Sz + ops.Iz
    f2 = fx @ fx + fy @ fy + fz @ fz
    labels = []
    for k in range(vectors.shape[1]):
        v = vectors[:, k]
        f2_val = np.real(v.conj() @ f2 @ v)
        m_val = np.real(v.conj() @ fz @ v)
        F = (-1 + np.sqrt(1 + 4 * f2_val)) / 2
        if abs(2 * F - round(2 * F)) > 1e-6:
            raise LabelingError("zero-field eigenvector is not an F eigenstate", 0.0)
        labels.append((_as_quantum_number(F), _as_quantum_number(m_val)))
    return labels


def _match(prev_vecs: NDArray, prev_labels: list, vecs: NDArray) -> list | None:
    overlap = np.abs(prev_vecs.conj().T @ vecs) ** 2
    best = np.argmax(overlap, axis=0)
    if np.any(overlap[best, np.arange(len(best))] <= 0.5):
        return None
    if len(set(best.tolist())) != len(best):
        return None
    return [prev_labels[i] for i in best]


class _Anchor(NamedTuple):
    Bz: float
    energies: NDArray
    vectors: NDArray
    labels: list


def _track(system: SpinSystem, start: _Anchor, Bz: float, step: float) -> _Anchor:
    """Walk labels from ``start`` to ``Bz`` with sub-steps no larger than ``step``."""
    current = start
    while current.Bz != Bz:
        h = min(step, abs(Bz - current.Bz))
        target = Bz if h == abs(Bz - current.Bz) else current.Bz + np.sign(Bz - current.Bz) * h
        energies, vectors = _diagonalize(system, target)
        labels = _match(current.vectors, current.labels, vectors)
        if labels is None:
            if h / 2 < _MIN_STEP:
                raise LabelingError("eigenvector overlap ambiguous (max overlap <= 0.5)", target)
            step = h / 2
            continue
        current = _Anchor(target, energies, vectors, labels)
    return current


class _AnchorCache:
    """Labeled spectra on a fixed field grid, built incrementally per system."""

    def __init__(self):
        self._lock = threading.Lock()
        self._grids: dict[tuple[SpinSystem, float], dict[int, _Anchor]] = {}

    def get(self, system: SpinSystem, k: int, step: float) -> _Anchor:
        with self._lock:
            grid = self._grids.get((system, step))
            if grid is None:
                energies, vectors = _diagonalize(system, 0.0)
                # zero field is degenerate; rebuild an F-pure basis inside each m-sector
                vectors = _coupled_basis(system, vectors)
                grid = {0: _Anchor(0.0, energies, vectors, _zero_field_labels(system, vectors))}
                self._grids[(system, step)] = grid
            if k in grid:
                return grid[k]
            direction = 1 if k > 0 else -1
            j = k
            while j not in grid:
                j -= direction
            anchor = grid[j]
            while j != k:
                j += direction
                anchor = _track(system, anchor, j * step, step)
                grid[j] = anchor
            return anchor


def _coupled_basis(system: SpinSystem, vectors: NDArray) -> NDArray:
    ops = _operators(system)
    fx, fy, fz = ops.Sx + ops.Ix, ops.Sy + ops.Iy, ops.Sz + ops.Iz
    f2 = fx @ fx + fy @ fy + fz @ fz
    out = np.zeros_like(vectors)
    col = 0
    for idx in _m_blocks(system):
        _, v = np.linalg.eigh(f2[np.ix_(idx, idx)])
        n = len(idx)
        out[idx, col:col + n] = v
        col += n
    # order columns by the zero-field energy for consistency with _diagonalize
    h0 = hamiltonian(system, 0.0)
    e = np.real(np.einsum("ik,ij,jk->k", out.conj(), h0, out))
    return out[:, np.argsort(e, kind="stable")]


_ANCHORS = _AnchorCache()


def labeled_spectrum(system: SpinSystem, Bz: float, step: float = LABEL_STEP) -> LabeledSpectrum:
    """Diagonalize at ``Bz`` and label every level by adiabatic continuation.

    The field is stepped from zero in increments of ``step`` (halved
    automatically when an eigenvector match is ambiguous); each new
    eigenvector inherits the label of the predecessor it overlaps with by
    more than 1/2.

    Raises:
        LabelingError: if the overlap test cannot be satisfied even at the
            smallest step. The offending field is attached.
    """
    if not np.isfinite(Bz) or abs(Bz) > MAX_FIELD + 10 * FD_STEP:
        raise InvalidArgumentError(f"Bz must lie within +-{MAX_FIELD} T, got {Bz!r}")
    k = int(np.trunc(Bz / step))
    anchor = _ANCHORS.get(system, k, step)
    if Bz == 0.0:
        energies, vectors, labels = anchor.energies, anchor.vectors, anchor.labels
    else:
        result = _track(system, anchor, float(Bz), step)
        energies, vectors, labels = result.energies, result.vectors, result.labels
    return LabeledSpectrum(system, float(Bz), energies.copy(), tuple(labels), vectors.copy())


# ---------------------------------------------------------------------------
# transitions

TransitionKind = Literal["esr", "nmr", "all"]


@dataclass(frozen=True)
class Transition:
    """A magnetic-dipole transition between two labeled levels.

    ``lower`` is the lower-energy level at the field where the transition
    was evaluated. ``sensitivity`` is d(frequency)/dBz in Hz/T.
    """

    lower: tuple
    upper: tuple
    frequency: float
    dipole: float
    sensitivity: float
    Bz: float

    @property
    def kind(self) -> str:
        return "esr" if self.lower[0] != self.upper[0] else "nmr"


def transition_frequency(system: SpinSystem, lower: tuple, upper: tuple, Bz: float) -> float:
    """Absolute frequency difference between two labeled levels (Hz)."""
    spec = labeled_spectrum(system, Bz)
    return abs(spec.energy(upper) - spec.energy(lower))


def sensitivity(system: SpinSystem, lower: tuple, upper: tuple, Bz: float, h: float = FD_STEP) -> float:
    """Centered finite difference of the transition frequency, Hz/T."""
    fp = transition_frequency(system, lower, upper, Bz + h)
    fm = transition_frequency(system, lower, upper, Bz - h)
    return (fp - fm) / (2 * h)


def hellmann_feynman_sensitivity(spectrum: LabeledSpectrum, lower: tuple, upper: tuple) -> float:
    """df/dB from expectation values of dH/dBz (independent of finite differences)."""
    dh = zeeman_operator(spectrum.system)
    vu, vl = spectrum.vector(upper), spectrum.vector(lower)
    du = np.real(vu.conj() @ dh @ vu)
    dl = np.real(vl.conj() @ dh @ vl)
    sign = 1.0 if spectrum.energy(upper) >= spectrum.energy(lower) else -1.0
    return float(sign * (du - dl))


def transition_dipole(spectrum: LabeledSpectrum, a: tuple, b: tuple) -> float:
    """|<a|Sx|b>| for two labeled levels."""
    sx = _operators(spectrum.system).Sx
    return float(abs(spectrum.vector(a).conj() @ sx @ spectrum.vector(b)))


def transitions(spectrum: LabeledSpectrum, kind: TransitionKind = "all") -> list[Transition]:
    """All ``|dm| = 1`` transitions of the requested kind, sorted by frequency.

    ``esr`` selects pairs in different F manifolds, ``nmr`` pairs within one
    manifold.
    """
    if kind not in ("esr", "nmr", "all"):
        raise InvalidArgumentError(f"unknown transition kind {kind!r}")
    system = spectrum.system
    above = labeled_spectrum(system, spectrum.Bz + FD_STEP)
    below = labeled_spectrum(system, spectrum.Bz - FD_STEP)
    sx = _operators(system).Sx
    out = []
    labels = spectrum.labels
    for i, li in enumerate(labels):
        for j in range(i + 1, len(labels)):
            lj = labels[j]
            if abs(abs(li[1] - lj[1]) - 1) > 1e-9:
                continue
            same_f = li[0] == lj[0]
            if (kind == "esr" and same_f) or (kind == "nmr" and not same_f):
                continue
            ei, ej = spectrum.energies[i], spectrum.energies[j]
            lo, up = (li, lj) if ei <= ej else (lj, li)
            freq = abs(ej - ei)
            slope = (
                abs(above.energy(up) - above.energy(lo)) - abs(below.energy(up) - below.energy(lo))
            ) / (2 * FD_STEP)
            dip = abs(spectrum.eigenvectors[:, j].conj() @ sx @ spectrum.eigenvectors[:, i])
            out.append(Transition(lo, up, float(freq), float(dip), float(slope), spectrum.Bz))
    out.sort(key=lambda t: (t.frequency, t.lower, t.upper))
    return out


def find_clock_transition(
    system: SpinSystem,
    lower: tuple,
    upper: tuple,
    bracket: tuple[float, float],
    tolerance: float = CT_TOLERANCE,
) -> tuple[float, float]:
    """Locate the field where d(frequency)/dBz of a transition vanishes.

    Args:
        system: Spin constants.
        lower, upper: ``(F, m)`` labels of the two levels.
        bracket: Field interval (T) over which the sensitivity changes sign.
        tolerance: Required |df/dB| at the returned point, Hz/T.

    Returns:
        ``(B_ct, f_ct)`` in T and Hz.

    Raises:
        NoRootError: if the sensitivity does not change sign in ``bracket``,
            or the root found does not meet ``tolerance``.
    """
    lo, hi = sorted(bracket)

    def slope(b):
        return sensitivity(system, lower, upper, b)

    s_lo, s_hi = slope(lo), slope(hi)
    if np.sign(s_lo) == np.sign(s_hi):
        raise NoRootError(
            f"df/dB of {lower}<->{upper} does not change sign in [{lo}, {hi}] T "
            f"({s_lo:.4g}, {s_hi:.4g} Hz/T)"
        )
    b_ct = brentq(slope, lo, hi, xtol=1e-10, rtol=1e-12)
    residual = slope(b_ct)
    if abs(residual) >= tolerance:
        raise NoRootError(f"|df/dB| = {abs(residual):.4g} Hz/T at {b_ct} T exceeds tolerance")
    return float(b_ct), transition_frequency(system, lower, upper, b_ct)


def scan_clock_transitions(
    system: SpinSystem,
    b_max: float = 0.3,
    step: float = 5e-4,
    kind: TransitionKind = "esr",
) -> list[tuple[tuple, tuple, float, float]]:
    """Every sign change of df/dB for transitions of ``kind`` in ``(0, b_max]``.

    Returns ``(lower, upper, B_ct, f_ct)`` tuples sorted by field. Pairs are
    identified by the labels they carry at the start of the scan.
    """
    fields = np.arange(step, b_max + step / 2, step)
    base = transitions(labeled_spectrum(system, fields[0]), kind)
    pairs = [(t.lower, t.upper) for t in base]
    slopes = np.empty((len(fields), len(pairs)))
    for i, b in enumerate(fields):
        spec = labeled_spectrum(system, b)
        up = labeled_spectrum(system, b + FD_STEP)
        dn = labeled_spectrum(system, b - FD_STEP)
        for j, (lo, hi) in enumerate(pairs):
            slopes[i, j] = (
                abs(up.energy(hi) - up.energy(lo)) - abs(dn.energy(hi) - dn.energy(lo))
            ) / (2 * FD_STEP)
    found = []
    for j, (lo, hi) in enumerate(pairs):
        flips = np.flatnonzero(np.sign(slopes[:-1, j]) * np.sign(slopes[1:, j]) < 0)
        for i in flips:
            b_ct, f_ct = find_clock_transition(system, lo, hi, (fields[i], fields[i + 1]))
            found.append((lo, hi, b_ct, f_ct))
    found.sort(key=lambda r: (r[2], r[3]))
    return found


def linewidth_estimate(transition: Transition, deltaB0: float) -> float:
    """Homogeneous linewidth |df/dB| * deltaB0 (Hz) from field noise ``deltaB0`` (T)."""
    return abs(transition.sensitivity) * deltaB0

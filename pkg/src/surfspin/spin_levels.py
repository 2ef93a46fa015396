"""Energy levels and ESR transitions of small isotropic spin systems.

Three spin communities are supported:

* a free S=1/2 doublet (Zeeman only),
* an S=1/2 electron coupled to an I=1/2 nucleus (hydrogen-like),
* an S=1 triplet with optional axial zero-field splitting D.

All energies are frequencies in Hz.  The static field points along z, so the
total projection ``m = m_S + m_I`` is conserved and each Hamiltonian is
block-diagonal in ``m``.  Blocks are at most 2x2 and are diagonalized with a
batched ``numpy.linalg.eigh`` over an array of fields, which keeps the grid
scans in :func:`resonance_fields` cheap.
"""

from dataclasses import dataclass, field
import enum
import functools
import math

import numpy as np

from . import constants as C
from .errors import DomainError

DEFAULT_MIN_STRENGTH = 0.01
DEFAULT_GRID = 2000


class SpinKind(str, enum.Enum):
    FREE_DOUBLET = "free_doublet"
    HYPERFINE_DOUBLET = "hyperfine_doublet"
    TRIPLET = "triplet"


class Label(str, enum.Enum):
    CENTRAL = "central"
    SAT_LOW = "satlow"
    SAT_HIGH = "sathigh"
    OTHER = "other"


@dataclass(frozen=True)
class SpinSystem:
    """Parameters of one spin community.

    ``A`` and ``zero_field_splitting`` are in Hz.  ``g_n`` enters only when
    ``include_nuclear_zeeman`` is set and only for the hyperfine doublet.
    """

    kind: SpinKind
    g_e: float = 2.0
    A: float = 0.0
    g_n: float = C.G_PROTON
    include_nuclear_zeeman: bool = True
    zero_field_splitting: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "kind", SpinKind(self.kind))
        for name in ("g_e", "A", "g_n", "zero_field_splitting"):
            if not math.isfinite(getattr(self, name)):
                raise DomainError(f"{name} must be finite")
        if self.g_e <= 0:
            raise DomainError("g_e must be positive")
        if self.A < 0:
            raise DomainError("hyperfine constant A must be >= 0")
        if self.kind is SpinKind.FREE_DOUBLET and self.A != 0:
            raise DomainError("a free doublet has no hyperfine coupling")

    @classmethod
    def free(cls, g_e=2.0):
        return cls(SpinKind.FREE_DOUBLET, g_e=g_e)

    @classmethod
    def hydrogen(cls, A=C.A_HYDROGEN, g_e=2.0, g_n=C.G_PROTON, include_nuclear_zeeman=True):
        return cls(SpinKind.HYPERFINE_DOUBLET, g_e=g_e, A=A, g_n=g_n,
                   include_nuclear_zeeman=include_nuclear_zeeman)

    @classmethod
    def triplet(cls, g_e=2.0, D=0.0):
        return cls(SpinKind.TRIPLET, g_e=g_e, zero_field_splitting=D)

    @property
    def dim(self):
        return {SpinKind.FREE_DOUBLET: 2, SpinKind.HYPERFINE_DOUBLET: 4, SpinKind.TRIPLET: 3}[self.kind]


@dataclass(frozen=True)
class LevelSet:
    """Eigen-decomposition at a single field.

    ``states[:, i]`` is the eigenvector of ``energies[i]`` in the product basis
    listed by ``basis`` (tuples of ``(m_S, m_I)``; ``m_I`` is 0 when there is
    no nucleus).  ``m_total`` and ``sector_rank`` identify each level by its
    conserved projection and its energy rank inside that projection sector.
    """

    B: float
    energies: np.ndarray
    states: np.ndarray
    basis: tuple
    m_total: np.ndarray
    sector_rank: np.ndarray


@dataclass(frozen=True)
class Transition:
    lower: int
    upper: int
    frequency: float
    strength: float
    label: Label
    key: tuple = field(default=(), compare=False)


# --------------------------------------------------------------------------
# operators
# --------------------------------------------------------------------------

def _spin_ops(s):
    m = np.arange(s, -s - 1, -1, dtype=float)
    sz = np.diag(m)
    sp = np.zeros((len(m), len(m)))
    for i in range(1, len(m)):
        sp[i - 1, i] = math.sqrt(s * (s + 1) - m[i] * (m[i] + 1))
    sx = 0.5 * (sp + sp.T)
    sy = -0.5j * (sp - sp.T)
    return m, sx, sy, sz


@functools.lru_cache(maxsize=64)
def _operators(spin):
    """(basis labels, Sx on the full space, field-independent H0, dH/dB)."""
    gamma_e = spin.g_e * C.mu_B / C.h
    if spin.kind is SpinKind.FREE_DOUBLET:
        m, sx, _, sz = _spin_ops(0.5)
        return _frozen(tuple((mi, 0.0) for mi in m), sx, np.zeros((2, 2)), gamma_e * sz)
    if spin.kind is SpinKind.TRIPLET:
        m, sx, _, sz = _spin_ops(1.0)
        D = spin.zero_field_splitting
        h0 = D * (sz @ sz - (2.0 / 3.0) * np.eye(3))
        return _frozen(tuple((mi, 0.0) for mi in m), sx, h0, gamma_e * sz)
    ms, sx, sy, sz = _spin_ops(0.5)
    one = np.eye(2)
    Sx, Sy, Sz = (np.kron(o, one) for o in (sx, sy, sz))
    Ix, Iy, Iz = (np.kron(one, o) for o in (sx, sy, sz))
    h0 = spin.A * np.real(Sx @ Ix + Sy @ Iy + Sz @ Iz)
    dh = gamma_e * Sz
    if spin.include_nuclear_zeeman:
        dh = dh - (spin.g_n * C.mu_N / C.h) * Iz
    basis = tuple((a, b) for a in ms for b in ms)
    return _frozen(basis, Sx, h0, dh)


def _frozen(basis, *mats):
    for m in mats:
        m.setflags(write=False)
    return (basis, *mats)


def hamiltonian(spin, B):
    """Hamiltonian matrix in Hz at field ``B`` (tesla), product basis."""
    _, _, h0, dh = _operators(spin)
    return h0 + B * dh


def _check_field(B):
    B = np.asarray(B, dtype=float)
    if not np.all(np.isfinite(B)):
        raise DomainError("magnetic field must be finite")
    if np.any(B < 0):
        raise DomainError("magnetic field must be >= 0")
    return B


def _sectors(basis):
    m_of = np.array([round(2 * (a + b)) for a, b in basis])
    return [(m2, np.flatnonzero(m_of == m2)) for m2 in sorted(set(m_of.tolist()))]


def _solve(spin, B):
    """Batched block diagonalization over a 1-d array of fields.

    Returns ``{2m: (evals (n, k), evecs (n, d, k))}`` with eigenvectors
    embedded in the full product space.
    """
    basis, _, h0, dh = _operators(spin)
    d = len(basis)
    out = {}
    for m2, idx in _sectors(basis):
        blk = h0[np.ix_(idx, idx)][None] + B[:, None, None] * dh[np.ix_(idx, idx)][None]
        w, v = np.linalg.eigh(blk)
        full = np.zeros((len(B), d, len(idx)))
        full[:, idx, :] = v
        out[m2] = (w, full)
    return out


def eigensystem(spin, B):
    """Exact diagonalization at field ``B``; energies ascending, in Hz."""
    B = float(_check_field(B))
    basis, _, _, _ = _operators(spin)
    blocks = _solve(spin, np.array([B]))
    energies, vecs, m_tot, rank = [], [], [], []
    for m2, (w, v) in blocks.items():
        for r in range(w.shape[1]):
            energies.append(w[0, r])
            vecs.append(v[0, :, r])
            m_tot.append(m2 / 2.0)
            rank.append(r)
    energies = np.array(energies)
    # ties broken by m so degenerate levels come out in a fixed order
    order = np.lexsort((np.array(m_tot), energies))
    return LevelSet(
        B=B,
        energies=energies[order],
        states=np.array(vecs).T[:, order],
        basis=basis,
        m_total=np.array(m_tot)[order],
        sector_rank=np.array(rank)[order],
    )


# --------------------------------------------------------------------------
# transitions
# --------------------------------------------------------------------------

def _line_labels(spin):
    """Fixed lines as ``{key: label}`` with key ``((2m_a, r_a), (2m_b, r_b))``."""
    if spin.kind is SpinKind.FREE_DOUBLET:
        return {((-1, 0), (1, 0)): Label.CENTRAL}
    if spin.kind is SpinKind.TRIPLET:
        return {((-2, 0), (0, 0)): Label.CENTRAL, ((0, 0), (2, 0)): Label.CENTRAL}
    # electron-flip lines of the hydrogen-like system, followed adiabatically:
    # lower m=0 state -> stretched m=+1 state reaches a fixed frequency first
    return {((0, 0), (2, 0)): Label.SAT_LOW, ((-2, 0), (0, 1)): Label.SAT_HIGH}


def _pair_key(ma, ra, mb, rb):
    a, b = (int(round(2 * ma)), int(ra)), (int(round(2 * mb)), int(rb))
    return (a, b) if a <= b else (b, a)


def transitions(spin, B, min_strength=DEFAULT_MIN_STRENGTH):
    """All transitions with ``|<u|S_x|l>|^2 >= min_strength`` at field ``B``."""
    if not 0 <= min_strength <= 0.5:
        raise DomainError("min_strength must lie in [0, 0.5]")
    lv = eigensystem(spin, B)
    _, sx, _, _ = _operators(spin)
    labels = _line_labels(spin)
    amp = lv.states.conj().T @ sx @ lv.states
    out = []
    n = len(lv.energies)
    for lo in range(n):
        for up in range(lo + 1, n):
            s = float(abs(amp[up, lo]) ** 2)
            if s < min_strength or s == 0.0:
                continue
            key = _pair_key(lv.m_total[lo], lv.sector_rank[lo], lv.m_total[up], lv.sector_rank[up])
            out.append(Transition(lo, up, float(lv.energies[up] - lv.energies[lo]), s,
                                  labels.get(key, Label.OTHER), key))
    return out


def line_frequency(spin, key, B):
    """Frequency (Hz) of the line identified by ``key`` on an array of fields."""
    B = np.atleast_1d(_check_field(B))
    blocks = _solve(spin, B)
    (ma, ra), (mb, rb) = key
    return np.abs(blocks[mb][0][:, rb] - blocks[ma][0][:, ra])


def line_strength(spin, key, B):
    B = np.atleast_1d(_check_field(B))
    _, sx, _, _ = _operators(spin)
    blocks = _solve(spin, B)
    (ma, ra), (mb, rb) = key
    va = blocks[ma][1][:, :, ra]
    vb = blocks[mb][1][:, :, rb]
    return np.abs(np.einsum("ni,ij,nj->n", vb.conj(), sx, va)) ** 2


def labelled_lines(spin, labels=None):
    """Keys of the named lines, optionally restricted to ``labels``."""
    lines = _line_labels(spin)
    if labels is not None:
        wanted = {Label(l) for l in labels}
        lines = {k: v for k, v in lines.items() if v in wanted}
    return lines


def resonance_crossings(spin, f_res, B_max, labels=None, n_grid=DEFAULT_GRID,
                        min_strength=DEFAULT_MIN_STRENGTH, xtol=1e-12):
    """Fields in ``(0, B_max]`` where a labelled line is resonant with ``f_res``.

    Returns ``[(B, label), ...]`` sorted by field.  Brackets come from a
    uniform ``n_grid`` scan; each is refined by bisection until the bracket is
    narrower than ``xtol`` tesla.
    """
    if not (math.isfinite(f_res) and math.isfinite(B_max)):
        raise DomainError("f_res and B_max must be finite")
    if f_res <= 0 or B_max <= 0:
        return []
    return crossings_many(spin, [f_res], B_max, labels, n_grid, min_strength, xtol)[0]


def crossings_many(spin, f_values, B_max, labels=None, n_grid=DEFAULT_GRID,
                   min_strength=DEFAULT_MIN_STRENGTH, xtol=1e-12):
    """:func:`resonance_crossings` for several frequencies sharing one grid scan."""
    f_values = np.asarray(f_values, dtype=float)
    out = [[] for _ in f_values]
    if B_max <= 0:
        return out
    grid = np.linspace(0.0, B_max, n_grid + 1)
    for key, label in labelled_lines(spin, labels).items():
        fg = line_frequency(spin, key, grid)
        which, roots, lo, hi, flo = [], [], [], [], []
        for j, f in enumerate(f_values):
            if not f > 0:
                continue
            g = fg - f
            exact = np.flatnonzero(g[1:] == 0) + 1
            for r in grid[exact]:
                which.append(j)
                roots.append(r)
            idx = np.flatnonzero(((g[:-1] < 0) != (g[1:] < 0)) & (g[1:] != 0))
            lo.append(grid[idx])
            hi.append(grid[idx + 1])
            flo.append(np.column_stack([np.full(idx.size, j), g[idx]]))
        if lo:
            lo = np.concatenate(lo)
            hi = np.concatenate(hi)
            jg = np.concatenate(flo) if flo else np.zeros((0, 2))
            j_of, glo = jg[:, 0].astype(int), jg[:, 1]
            ftarget = f_values[j_of]
            # vectorized bisection over every bracket of this line
            while lo.size and np.max(hi - lo) > xtol:
                mid = 0.5 * (lo + hi)
                gm = line_frequency(spin, key, mid) - ftarget
                left = (gm < 0) == (glo < 0)
                lo = np.where(left, mid, lo)
                glo = np.where(left, gm, glo)
                hi = np.where(left, hi, mid)
            which.extend(j_of.tolist())
            roots.extend((0.5 * (lo + hi)).tolist())
        keep = [(j, r) for j, r in zip(which, roots) if r > 0]
        if keep and min_strength > 0:
            s = line_strength(spin, key, np.array([r for _, r in keep]))
            keep = [jr for jr, si in zip(keep, s) if si >= min_strength]
        for j, r in keep:
            out[j].append((float(r), label))
    for lst in out:
        lst.sort(key=lambda t: t[0])
    return out


def resonance_fields(spin, f_res, B_max, labels=None, **kw):
    """Sorted list of resonant fields (tesla); see :func:`resonance_crossings`."""
    return [b for b, _ in resonance_crossings(spin, f_res, B_max, labels, **kw)]


def boltzmann_populations(energies, T):
    if not (T > 0 and math.isfinite(T)):
        raise DomainError("temperature must be positive")
    e = np.asarray(energies, dtype=float)
    x = -(C.h * (e - e.min())) / (C.k_B * T)
    p = np.exp(x)
    return p / p.sum()


def peak_area_factor(spin, t, B, T, min_strength=DEFAULT_MIN_STRENGTH):
    """Thermal population difference driving the spectral line of ``t``.

    Lines that share the frequency of ``t`` (e.g. the two Delta m = 1 lines of
    a triplet without zero-field splitting) absorb at the same field, so their
    population differences add.  For a free doublet the result is
    ``tanh(h f / 2 k_B T)``.
    """
    if not T > 0:
        raise DomainError("temperature must be positive")
    lv = eigensystem(spin, B)
    p = boltzmann_populations(lv.energies, T)
    tol = max(1e-9 * abs(t.frequency), 1.0)
    total = 0.0
    for tr in transitions(spin, B, min_strength):
        if abs(tr.frequency - t.frequency) <= tol:
            total += p[tr.lower] - p[tr.upper]
    return float(total)


def apparent_g(B_peak, f_res):
    """g-factor that a free spin resonant at ``(B_peak, f_res)`` would have."""
    if not B_peak > 0:
        raise DomainError("B_peak must be positive")
    return C.h * f_res / (C.mu_B * B_peak)


def line_slope(spin, label, B, dB=1e-6):
    """d(frequency)/dB of a labelled line at ``B``, Hz/T (central difference)."""
    keys = [k for k, v in labelled_lines(spin, [label]).items()]
    if not keys:
        raise DomainError(f"spin system has no {Label(label).value} line")
    lo = max(B - dB, 0.0)
    f = line_frequency(spin, keys[0], np.array([lo, B + dB]))
    return float((f[1] - f[0]) / (B + dB - lo))

"""Tight-binding parent models and their doubled-space representation.

Single-particle data lives in a fixed mode layout: modes are ordered
site-major with pseudo-spin minor, i.e. mode = (site * n_colors + color) * 2
+ spin, spin 0 = "up" (left copy) and spin 1 = "down" (particle-hole
conjugated right copy). The doubled Hamiltonian of a parent h is
h (x) sigma^3 in that layout, acting identically on every flavor and color.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateGroundState

PAULI = (
    np.eye(2, dtype=complex),
    np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex),
    np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex),
    np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
)

HERMITICITY_TOL = 1e-12
ORTHONORMALITY_TOL = 1e-10
GAP_TOL = 1e-8


def site_block(x, n_colors=1):
    """Slice covering the 2*n_colors modes of site x."""
    w = 2 * n_colors
    return slice(w * x, w * (x + 1))


# ---- geometry -------------------------------------------------------------


@dataclass(frozen=True)
class Geometry:
    """Site bookkeeping: integer coordinates, neighbor shifts, separations."""

    tag: str
    shape: tuple
    boundary: str
    positions: np.ndarray  # (n_sites, ndim) integer coordinates

    @property
    def n_sites(self):
        return self.positions.shape[0]

    @property
    def ndim(self):
        return self.positions.shape[1]

    def site_index(self, coords):
        coords = tuple(int(c) for c in coords)
        strides = _row_major_strides(self.shape)
        return sum(c * s for c, s in zip(coords, strides))

    def shift(self, site, delta):
        """Site reached from `site` by lattice vector `delta`, or None if the
        step leaves an open lattice."""
        delta = _as_delta(delta, self.ndim)
        coords = [int(c) + d for c, d in zip(self.positions[site], delta)]
        for axis, extent in enumerate(self.shape):
            if self.boundary == "periodic":
                coords[axis] %= extent
            elif not 0 <= coords[axis] < extent:
                return None
        return self.site_index(coords)

    def separation(self, x, y):
        """Euclidean distance, minimum-image for periodic boundaries."""
        d = np.abs(self.positions[x] - self.positions[y]).astype(float)
        if self.boundary == "periodic":
            ext = np.asarray(self.shape, dtype=float)
            d = np.minimum(d, ext - d)
        return float(np.linalg.norm(d))


def _as_delta(delta, ndim):
    if np.isscalar(delta):
        delta = (int(delta),) + (0,) * (ndim - 1)
    delta = tuple(int(d) for d in delta)
    if len(delta) != ndim:
        raise ConfigError(f"offset {delta} has wrong dimension for a {ndim}d lattice")
    return delta


def _row_major_strides(shape):
    strides = []
    acc = 1
    for extent in reversed(shape):
        strides.append(acc)
        acc *= extent
    return tuple(reversed(strides))


def _grid_positions(shape):
    mesh = np.indices(shape).reshape(len(shape), -1).T
    return np.ascontiguousarray(mesh)


# ---- models ---------------------------------------------------------------


@dataclass(frozen=True)
class TightBindingModel:
    """Parent free-fermion model plus dephasing and flavor structure.

    Attributes
    ----------
    h : ndarray
        n_sites x n_sites Hermitian single-particle matrix.
    geometry : Geometry
        Site layout used to resolve operator offsets and separations.
    g : float
        Dephasing strength (>= 0).
    n_flavors : int
        Total flavor count N. With colors, N = n_f * n_colors where
        n_f = n_flavors // n_colors is the count of color multiplets.
    n_colors : int
        Color channels per flavor multiplet (1 = plain dephasing).
    """

    h: np.ndarray
    geometry: Geometry
    g: float = 1.0
    t: float = 1.0
    mass: float = 0.0
    n_flavors: int = 2
    n_colors: int = 1
    disorder_strength: float = 0.0
    disorder_seed: int = 0

    def __post_init__(self):
        h = np.asarray(self.h, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ConfigError(f"h must be square, got shape {h.shape}")
        if h.shape[0] != self.geometry.n_sites:
            raise ConfigError("h size does not match geometry site count")
        if np.max(np.abs(h - h.conj().T)) > HERMITICITY_TOL:
            raise ConfigError("h is not Hermitian to 1e-12")
        if self.g < 0:
            raise ConfigError("dephasing strength g must be >= 0")
        if self.n_flavors < 1 or self.n_colors < 1:
            raise ConfigError("flavor and color counts must be >= 1")
        if self.n_flavors % self.n_colors != 0:
            raise ConfigError("n_flavors must be a multiple of n_colors")
        object.__setattr__(self, "h", h)

    @property
    def n_sites(self):
        return self.h.shape[0]

    @property
    def flavor_power(self):
        """Exponent of the per-configuration determinant in the MC weight:
        N for plain dephasing, n_f = N / n_colors for color channels."""
        return self.n_flavors // self.n_colors


@dataclass(frozen=True)
class DoubledModel:
    """Doubled (two-copy) representation of a parent model.

    hd = h (x) 1_color (x) sigma^3; its ground state at half filling of the
    doubled modes is the purified parent ground state after the particle-hole
    transform on the right copy. M is the occupied orbital count per flavor.
    """

    parent: TightBindingModel
    hd: np.ndarray
    M: int

    @property
    def n_modes(self):
        return self.hd.shape[0]

    @property
    def q_strong(self):
        """Diagonal of the strong (pseudo-spin) U(1) charge."""
        n = self.parent.n_sites * self.parent.n_colors
        return np.kron(np.ones(n), np.array([1.0, -1.0]))

    @property
    def q_weak(self):
        """Diagonal of the weak (total number) U(1) charge."""
        return np.ones(self.n_modes)


@dataclass(frozen=True)
class SlaterOrbitals:
    """Occupied orbitals of a doubled model, columns orthonormal.

    The column phase convention is deterministic: the largest-modulus
    component of each column is made real positive (ties broken by lowest
    mode index), so repeated runs produce identical matrices.
    """

    P: np.ndarray
    energies: np.ndarray
    gap: float

    @property
    def M(self):
        return self.P.shape[1]


def build_model(geometry, **kwargs):
    """Construct a TightBindingModel for a named geometry.

    Parameters
    ----------
    geometry : str
        One of "chain", "square", "pi_flux", "random", "custom".
    L, Lx, Ly : int
        Linear extents (L for chain/random, Lx/Ly for 2d lattices).
    t : float
        Hopping scale (also the overall scale of random models).
    boundary : str
        "open" or "periodic". pi_flux requires periodic with even extents.
    mass : float
        Staggered sublattice potential for pi_flux (opens a gap >= |mass|).
    disorder_strength, disorder_seed :
        Random onsite energies and hopping perturbations, drawn uniformly
        from [-strength, strength] with a seeded generator; identical seeds
        give bitwise-identical models.
    h : ndarray
        Explicit Hermitian matrix for geometry="custom".
    g, n_flavors, n_colors :
        Dephasing strength and flavor structure, stored on the model.
    """
    t = float(kwargs.pop("t", 1.0))
    boundary = kwargs.pop("boundary", "open")
    mass = float(kwargs.pop("mass", 0.0))
    g = float(kwargs.pop("g", 1.0))
    n_flavors = int(kwargs.pop("n_flavors", 2))
    n_colors = int(kwargs.pop("n_colors", 1))
    disorder_strength = float(kwargs.pop("disorder_strength", 0.0))
    disorder_seed = int(kwargs.pop("disorder_seed", 0))
    L = kwargs.pop("L", None)
    Lx = kwargs.pop("Lx", None)
    Ly = kwargs.pop("Ly", None)
    h_custom = kwargs.pop("h", None)
    if kwargs:
        raise ConfigError(f"unknown build_model arguments: {sorted(kwargs)}")
    if boundary not in ("open", "periodic"):
        raise ConfigError(f"unknown boundary '{boundary}'")

    if geometry == "chain":
        if L is None or int(L) < 2:
            raise ConfigError("chain needs L >= 2")
        L = int(L)
        geo = Geometry("chain", (L,), boundary, _grid_positions((L,)))
        h = np.zeros((L, L), dtype=complex)
        for x in range(L - 1):
            h[x, x + 1] = h[x + 1, x] = -t
        if boundary == "periodic" and L > 2:
            h[L - 1, 0] = h[0, L - 1] = -t
    elif geometry in ("square", "pi_flux"):
        if Lx is None or Ly is None or int(Lx) < 2 or int(Ly) < 2:
            raise ConfigError(f"{geometry} needs Lx >= 2 and Ly >= 2")
        Lx, Ly = int(Lx), int(Ly)
        if geometry == "pi_flux":
            if boundary != "periodic":
                raise ConfigError("pi_flux requires periodic boundaries")
            if Lx % 2 or Ly % 2:
                raise ConfigError("pi_flux requires even Lx and Ly")
        geo = Geometry(geometry, (Lx, Ly), boundary, _grid_positions((Lx, Ly)))
        h = np.zeros((Lx * Ly, Lx * Ly), dtype=complex)
        for s in range(Lx * Ly):
            x, y = geo.positions[s]
            for axis, delta in ((0, (1, 0)), (1, (0, 1))):
                if boundary == "open" or geo.shape[axis] > 2:
                    nb = geo.shift(s, delta)
                else:
                    nb = geo.shift(s, delta) if geo.positions[s][axis] == 0 else None
                if nb is None:
                    continue
                amp = -t
                if geometry == "pi_flux" and axis == 1:
                    # gauge: vertical bonds alternate sign with column parity,
                    # giving flux pi through every plaquette
                    amp = -t * (-1.0) ** int(x)
                h[s, nb] += amp
                h[nb, s] += np.conj(amp)
        if geometry == "pi_flux" and mass != 0.0:
            stagger = (-1.0) ** geo.positions.sum(axis=1)
            h += np.diag(mass * stagger)
    elif geometry == "random":
        if L is None or int(L) < 2:
            raise ConfigError("random needs L >= 2")
        L = int(L)
        geo = Geometry("random", (L,), "open", _grid_positions((L,)))
        rng = np.random.default_rng(disorder_seed)
        a = rng.standard_normal((L, L)) + 1j * rng.standard_normal((L, L))
        h = t * (a + a.conj().T) / (2.0 * math.sqrt(L))
    elif geometry == "custom":
        if h_custom is None:
            raise ConfigError("custom geometry needs an explicit h matrix")
        h = np.asarray(h_custom, dtype=complex)
        geo = Geometry("custom", (h.shape[0],), "open", _grid_positions((h.shape[0],)))
    else:
        raise ConfigError(f"unknown geometry '{geometry}'")

    if disorder_strength > 0.0 and geometry in ("chain", "square", "pi_flux"):
        rng = np.random.default_rng(disorder_seed)
        n = h.shape[0]
        h = h + np.diag(rng.uniform(-disorder_strength, disorder_strength, size=n))
        rows, cols = np.nonzero(np.triu(np.abs(h), k=1) > 0)
        bumps = rng.uniform(-disorder_strength, disorder_strength, size=rows.size)
        for r, c, b in zip(rows, cols, bumps):
            h[r, c] += b
            h[c, r] += b

    return TightBindingModel(
        h=h,
        geometry=geo,
        g=g,
        t=t,
        mass=mass,
        n_flavors=n_flavors,
        n_colors=n_colors,
        disorder_strength=disorder_strength,
        disorder_seed=disorder_seed,
    )


def load_hamiltonian_file(path):
    """Read a Hermitian matrix from a plain-text file of whitespace-separated
    "re im" pairs, row-major; the side length is inferred."""
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) % 2:
        raise ConfigError(f"{path}: odd float count, expected 're im' pairs")
    try:
        vals = np.array([float(tok) for tok in tokens], dtype=float)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    n_pairs = len(vals) // 2
    n = math.isqrt(n_pairs)
    if n * n != n_pairs or n < 2:
        raise ConfigError(f"{path}: {n_pairs} entries do not form a square matrix")
    h = (vals[0::2] + 1j * vals[1::2]).reshape(n, n)
    if np.max(np.abs(h - h.conj().T)) > HERMITICITY_TOL:
        raise ConfigError(f"{path}: matrix is not Hermitian to 1e-12")
    return h


def double_hamiltonian(model, M=None):
    """Doubled Hamiltonian hd = h (x) 1_color (x) sigma^3.

    M defaults to half the doubled modes per flavor (the physical sector
    forced by the particle-hole transform).
    """
    blk = np.kron(np.eye(model.n_colors), PAULI[3])
    hd = np.kron(model.h, blk)
    if M is None:
        M = model.n_sites * model.n_colors
    M = int(M)
    if not 0 < M < hd.shape[0]:
        raise ConfigError(f"filling M={M} outside (0, {hd.shape[0]})")
    return DoubledModel(parent=model, hd=hd, M=M)


def ground_orbitals(doubled, gap_tol=GAP_TOL):
    """Occupied orbitals of the doubled model at filling M.

    Raises DegenerateGroundState when the spectral gap between the M-th and
    (M+1)-th level is below gap_tol, listing the offending eigenvalues.
    """
    energies = np.linalg.eigvalsh(doubled.hd)
    M = doubled.M
    gap = float(energies[M] - energies[M - 1])
    if gap <= gap_tol:
        raise DegenerateGroundState(
            f"no spectral gap at filling M={M}: "
            f"E[M-1]={energies[M - 1]:.12g}, E[M]={energies[M]:.12g}"
        )
    _, vecs = np.linalg.eigh(doubled.hd)
    P = np.ascontiguousarray(vecs[:, :M])
    P = fix_column_phases(P)
    return SlaterOrbitals(P=P, energies=energies, gap=gap)


def fix_column_phases(P):
    """Deterministic column phases: largest-|entry| component real positive."""
    P = np.array(P, dtype=complex)
    for k in range(P.shape[1]):
        col = P[:, k]
        idx = int(np.argmax(np.abs(col)))
        ref = col[idx]
        if np.abs(ref) > 0:
            P[:, k] = col * (np.conj(ref) / np.abs(ref))
    return P


def su_generators(n):
    """Traceless Hermitian generators of SU(n), normalized tr(T^a T^b) = d_ab/2.

    Ordering: symmetric pair generators (lexicographic j<k), then
    antisymmetric pair generators, then diagonal generators. For n=2 this is
    the three Pauli matrices over 2, in x, y, z order.
    """
    if n < 2:
        raise ConfigError("su_generators needs n >= 2")
    gens = []
    for j in range(n):
        for k in range(j + 1, n):
            m = np.zeros((n, n), dtype=complex)
            m[j, k] = m[k, j] = 0.5
            gens.append(m)
    for j in range(n):
        for k in range(j + 1, n):
            m = np.zeros((n, n), dtype=complex)
            m[j, k] = -0.5j
            m[k, j] = 0.5j
            gens.append(m)
    for l in range(1, n):
        d = np.zeros(n, dtype=complex)
        d[:l] = 1.0
        d[l] = -l
        gens.append(np.diag(d) / math.sqrt(2.0 * l * (l + 1)))
    return gens


# ---- operator specifications ----------------------------------------------


@dataclass(frozen=True)
class BilinearSpec:
    """One fermion bilinear O = coefficient * c^dag_x (sigma^mu (x) Omega) c_{x+delta}.

    Omega is a Hermitian flavor matrix (traceless for inequality checks);
    mu in {0,1,2,3} picks the pseudo-spin channel. With antisymmetrize=True
    the operator is the current-like combination
    i c^dag_x ... c_{x+delta} - i c^dag_{x+delta} ... c_x (times coefficient).
    """

    x: int
    mu: int
    omega: np.ndarray
    delta: tuple = (0,)
    antisymmetrize: bool = False
    coefficient: complex = 1.0
    name: str = ""

    def __post_init__(self):
        if self.mu not in (0, 1, 2, 3):
            raise ConfigError(f"mu must be in 0..3, got {self.mu}")
        om = np.asarray(self.omega, dtype=complex)
        if om.ndim != 2 or om.shape[0] != om.shape[1]:
            raise ConfigError("omega must be a square matrix")
        if np.max(np.abs(om - om.conj().T)) > HERMITICITY_TOL:
            raise ConfigError("omega must be Hermitian to 1e-12")
        delta = self.delta
        if np.isscalar(delta):
            delta = (int(delta),)
        object.__setattr__(self, "delta", tuple(int(d) for d in delta))
        object.__setattr__(self, "omega", om)
        if not self.name:
            object.__setattr__(self, "name", self._auto_name())

    def _auto_name(self):
        kind = "J" if self.antisymmetrize else "O"
        off = ",".join(str(d) for d in self.delta)
        return f"{kind}[x={self.x},d=({off}),mu={self.mu}]"

    @property
    def omega_trace(self):
        return complex(np.trace(self.omega))

    @property
    def is_traceless(self):
        return abs(self.omega_trace) <= HERMITICITY_TOL

    @property
    def is_onsite(self):
        return all(d == 0 for d in self.delta)

    def partner_site(self, geometry):
        y = geometry.shift(self.x, self.delta)
        if y is None:
            raise ConfigError(
                f"offset {self.delta} from site {self.x} leaves the open lattice"
            )
        return y

    def site_terms(self, geometry, n_colors=1):
        """Site-block decomposition [(row_site, col_site, block)], where block
        is the 2*n_colors square matrix 1_color (x) sigma^mu times weights."""
        m = self.coefficient * np.kron(np.eye(n_colors), PAULI[self.mu])
        y = self.partner_site(geometry)
        if self.antisymmetrize:
            return [(self.x, y, 1j * m), (y, self.x, -1j * m)]
        return [(self.x, y, m)]

    def mode_terms(self, geometry, n_sites, n_flavors):
        """Global-mode decomposition [(p, q, coeff)] meaning coeff * c^dag_p c_q,
        with mode index p = flavor*2*n_sites + 2*site + spin (plain colors only)."""
        terms = []
        for row, col, blk in self.site_terms(geometry, n_colors=1):
            for f1 in range(n_flavors):
                for f2 in range(n_flavors):
                    w_f = self.omega[f1, f2]
                    if w_f == 0:
                        continue
                    for s1 in range(2):
                        for s2 in range(2):
                            w = w_f * blk[s1, s2]
                            if w == 0:
                                continue
                            p = f1 * 2 * n_sites + 2 * row + s1
                            q = f2 * 2 * n_sites + 2 * col + s2
                            terms.append((p, q, complex(w)))
        return terms

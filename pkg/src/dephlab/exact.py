"""Exact small-system oracle in the doubled Fock space.

States are expanded over occupation bitstrings of the doubled modes
(spin up = left copy, spin down = particle-hole conjugated right copy),
flavor-major: global mode = flavor * 2*n_sites + 2*site + spin. Amplitudes
are determinant minors of the doubled orbital matrix; dephasing multiplies
each ket configuration by exp(-(g/2) * sum_i (n_i - N)^2), one such factor
from the ket and one from the bra entering every expectation value. All
correlators are evaluated by brute-force operator application, which is the
point: no Wick theorem, no auxiliary fields, usable as an independent check
on the determinant machinery.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import ConfigError, DegenerateGroundState, SizeLimit
from .model import BilinearSpec, GAP_TOL, fix_column_phases

DEFAULT_BUDGET = 10**7
_DET_CHUNK = 8192


def wrap_angle(theta):
    """Principal branch of an angle array, values in [-pi, pi]."""
    theta = np.asarray(theta, dtype=float)
    return theta - 2.0 * np.pi * np.round(theta / (2.0 * np.pi))


def _popcount(masks):
    return np.bitwise_count(masks.astype(np.uint64)).astype(np.int64)


@dataclass(frozen=True)
class FockAmplitudeTable:
    """Slater expansion of one layer: bitstring -> determinant minor."""

    n_modes: int
    n_filled: int
    masks: np.ndarray
    amplitudes: np.ndarray

    def as_dict(self):
        return dict(zip(self.masks.tolist(), self.amplitudes.tolist()))


def slater_fock_amplitudes(orbitals, budget=DEFAULT_BUDGET):
    """Expand a Slater determinant over occupation bitstrings.

    Parameters
    ----------
    orbitals : ndarray (n, M)
        Orthonormal occupied orbitals (columns).

    Returns
    -------
    FockAmplitudeTable with one entry per M-particle bitstring; the amplitude
    of bitstring b is det(orbitals[rows(b), :]) with rows in increasing mode
    order. Squared amplitudes sum to 1.
    """
    orbitals = np.asarray(orbitals, dtype=complex)
    n, m = orbitals.shape
    count = math.comb(n, m)
    if count > budget:
        raise SizeLimit(f"bitstring table needs {count} entries, budget {budget}")
    rows = np.array(list(combinations(range(n), m)), dtype=np.int64)
    if m == 0:
        return FockAmplitudeTable(n, 0, np.zeros(1, dtype=np.int64), np.ones(1, complex))
    masks = (np.int64(1) << rows).sum(axis=1)
    amps = np.empty(count, dtype=complex)
    for lo in range(0, count, _DET_CHUNK):
        hi = min(lo + _DET_CHUNK, count)
        amps[lo:hi] = np.linalg.det(orbitals[rows[lo:hi], :])
    return FockAmplitudeTable(n, m, masks, amps)


# ---- doubled-state enumeration ---------------------------------------------


def default_filling(model, gap_tol=GAP_TOL):
    """Pre-doubling filling consistent with the half-filled doubled model:
    the number of negative eigenvalues of h."""
    eps = np.linalg.eigvalsh(model.h)
    if np.min(np.abs(eps)) <= gap_tol / 2:
        raise DegenerateGroundState(
            f"parent spectrum touches zero (min |eps| = {np.min(np.abs(eps)):.3g}); "
            "the doubled ground state is degenerate"
        )
    return int(np.sum(eps < 0))


def enumeration_size(model, M=None):
    """Joint configuration count of the full enumeration, or None when the
    model falls outside its scope (colored defects)."""
    if model.n_colors != 1:
        return None
    if M is None:
        M = default_filling(model)
    n = model.n_sites
    per_flavor = math.comb(n, M) * math.comb(n, n - M)
    return per_flavor**model.n_flavors


def _sector_orbitals(model, M):
    """Doubled orbital matrix (2n x n) built sector-wise: spin-up columns are
    the M lowest orbitals of h, spin-down columns the (n-M) lowest of -h."""
    n = model.n_sites
    eps, vecs = np.linalg.eigh(model.h)
    if not 0 <= M <= n:
        raise ConfigError(f"filling M={M} outside [0, {n}]")
    if 0 < M < n and eps[M] - eps[M - 1] <= GAP_TOL:
        raise DegenerateGroundState(
            f"parent gap at filling M={M} is {eps[M] - eps[M - 1]:.3g}"
        )
    up = fix_column_phases(vecs[:, :M])
    down = fix_column_phases(vecs[:, M:][:, ::-1])
    pd = np.zeros((2 * n, n), dtype=complex)
    pd[0::2, :M] = up
    pd[1::2, M:] = down
    return pd


def _flavor_table(model, M, budget):
    """Per-flavor doubled configurations: masks over 2n modes and amplitudes.

    Only strings with M spin-up and (n-M) spin-down particles have support;
    amplitudes are determinant minors of the sector-wise doubled orbitals.
    """
    n = model.n_sites
    pd = _sector_orbitals(model, M)
    count = math.comb(n, M) * math.comb(n, n - M)
    if count > budget:
        raise SizeLimit(f"per-flavor table needs {count} entries, budget {budget}")
    ups = list(combinations(range(n), M))
    downs = list(combinations(range(n), n - M))
    rows = np.empty((count, n), dtype=np.int64)
    idx = 0
    for u in ups:
        ru = [2 * x for x in u]
        for d in downs:
            rows[idx] = sorted(ru + [2 * y + 1 for y in d])
            idx += 1
    masks = (np.int64(1) << rows).sum(axis=1)
    amps = np.empty(count, dtype=complex)
    for lo in range(0, count, _DET_CHUNK):
        hi = min(lo + _DET_CHUNK, count)
        amps[lo:hi] = np.linalg.det(pd[rows[lo:hi], :])
    return masks, amps


def _site_occupations(masks, n_sites, n_flavors):
    """(n_cfg, n_sites) total occupation (both spins, all flavors) per site."""
    occ = np.zeros((masks.size, n_sites), dtype=np.int64)
    for f in range(n_flavors):
        base = f * 2 * n_sites
        for i in range(n_sites):
            occ[:, i] += ((masks >> (base + 2 * i)) & 1) + (
                (masks >> (base + 2 * i + 1)) & 1
            )
    return occ


class _FockTable:
    """Joint configuration table over all flavors."""

    def __init__(self, model, M, budget):
        if model.n_colors != 1:
            raise ConfigError("the exact oracle supports plain dephasing only "
                              "(n_colors == 1)")
        n, N = model.n_sites, model.n_flavors
        if 2 * n * N > 62:
            raise SizeLimit(f"{2 * n * N} doubled modes exceed the 62-bit mask limit")
        per_flavor = math.comb(n, M) * math.comb(n, n - M)
        joint = per_flavor**N
        if joint > budget:
            raise SizeLimit(
                f"joint enumeration needs {joint} configurations, budget {budget}"
            )
        fmasks, famps = _flavor_table(model, M, budget)
        masks, amps = fmasks, famps
        for f in range(1, N):
            masks = (fmasks[:, None] << np.int64(f * 2 * n)) | masks[None, :]
            amps = (famps[:, None] * amps[None, :])
            masks = masks.reshape(-1)
            amps = amps.reshape(-1)
        self.model = model
        self.M = M
        self.n_modes = 2 * n * N
        self.masks = masks
        self.amp0 = amps
        self.site_occ = _site_occupations(masks, n, N)
        self.imbalance = self.site_occ - N  # n_L - n_R per site
        self._index = None

    @property
    def index(self):
        if self._index is None:
            self._index = {m: i for i, m in enumerate(self.masks.tolist())}
        return self._index


def _pair(table, bra_coeffs, masks, coeffs):
    """Bilinear pairing sum_c bra(c) * v(c) over the table's support."""
    idx = table.index
    total = 0.0 + 0.0j
    for m, c in zip(masks.tolist(), coeffs.tolist()):
        i = idx.get(m)
        if i is not None:
            total += bra_coeffs[i] * c
    return total


def _apply_mode_terms(masks, coeffs, terms, n_modes, budget=5 * 10**7):
    """Apply sum_t coeff_t c^dag_p c_q to a Fock vector (masks, coeffs)."""
    if masks.size * max(len(terms), 1) > budget:
        raise SizeLimit("operator application exceeds the enumeration budget")
    out_masks = []
    out_coeffs = []
    one = np.int64(1)
    for p, q, w in terms:
        if not (0 <= p < n_modes and 0 <= q < n_modes):
            raise ConfigError(f"mode index out of range in operator term ({p},{q})")
        has_q = ((masks >> np.int64(q)) & one).astype(bool)
        if p == q:
            sel = has_q
            if not np.any(sel):
                continue
            out_masks.append(masks[sel])
            out_coeffs.append(coeffs[sel] * w)
            continue
        free_p = ((masks >> np.int64(p)) & one) == 0
        sel = has_q & free_p
        if not np.any(sel):
            continue
        m = masks[sel]
        s1 = _popcount(m & ((one << np.int64(q)) - one))
        m2 = m ^ (one << np.int64(q))
        s2 = _popcount(m2 & ((one << np.int64(p)) - one))
        sign = 1.0 - 2.0 * ((s1 + s2) & 1)
        out_masks.append(m2 | (one << np.int64(p)))
        out_coeffs.append(coeffs[sel] * (w * sign))
    if not out_masks:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=complex)
    return np.concatenate(out_masks), np.concatenate(out_coeffs)


def _operator_terms(table, op):
    """Normalize an operator argument to a flat [(p, q, coeff)] list.

    Accepts a BilinearSpec, a list of (BilinearSpec, coefficient) pairs for
    linear combinations, or a raw [(p, q, coeff)] list.
    """
    model = table.model
    if isinstance(op, BilinearSpec):
        return op.mode_terms(model.geometry, model.n_sites, model.n_flavors)
    if isinstance(op, (list, tuple)) and op:
        if all(isinstance(item, BilinearSpec) for item in op):
            op = [(spec, 1.0) for spec in op]
        first = op[0]
        if (
            isinstance(first, (list, tuple))
            and len(first) == 2
            and isinstance(first[0], BilinearSpec)
        ):
            terms = []
            for spec, coeff in op:
                terms.extend(
                    (p, q, coeff * w)
                    for p, q, w in spec.mode_terms(
                        model.geometry, model.n_sites, model.n_flavors
                    )
                )
            return terms
        return [(int(p), int(q), complex(w)) for p, q, w in op]
    raise ConfigError(f"cannot interpret operator specification {op!r}")


class _WeightedState:
    """Shared evaluation core: a ket table, a bra table, a denominator."""

    def expectation(self, ops):
        """<ops[0] * ops[1] * ...> with operators applied right to left."""
        masks, coeffs = self.table.masks, self.ket
        for op in reversed(ops):
            terms = _operator_terms(self.table, op)
            masks, coeffs = _apply_mode_terms(
                masks, coeffs, terms, self.table.n_modes
            )
        return _pair(self.table, self.bra, masks, coeffs) / self.denom

    def greens_less(self):
        """Matrix <c^dag_q c_p> over all doubled modes (rows p, cols q)."""
        nm = self.table.n_modes
        out = np.empty((nm, nm), dtype=complex)
        for p in range(nm):
            for q in range(nm):
                out[p, q] = self.expectation([[(q, p, 1.0)]])
        return out


@dataclass(init=False)
class ExactDoubledState(_WeightedState):
    """Dephased doubled state over the joint configuration table.

    ket(c) = amp0(c) * exp(-(g/2) sum_i (n_i(c) - N)^2); the squared half
    weights combine to the full dephasing factor in the norm and in every
    correlator (one factor from ket, one from bra).
    """

    def __init__(self, model, M=None, budget=DEFAULT_BUDGET):
        if M is None:
            M = default_filling(model)
        self.table = _FockTable(model, M, budget)
        self.g = float(model.g)
        d2 = np.sum(self.table.imbalance.astype(float) ** 2, axis=1)
        self.dephasing_exponent = d2
        w = np.exp(-0.5 * self.g * d2)
        self.half_weights = w
        self.ket = self.table.amp0 * w
        self.bra = np.conj(self.table.amp0) * w
        self.denom = float(np.real(np.sum(self.bra * self.ket)))

    @property
    def model(self):
        return self.table.model

    @property
    def M(self):
        return self.table.M

    @property
    def norm(self):
        return self.denom


class PhaseInsertedState(_WeightedState):
    """Free doubled state with one compensated half-defect on each side.

    Used to cross-check the determinant route at fixed auxiliary field: all
    expectations carry exp(-i theta_i/2 (n_i - N)) from ket and bra, with
    theta the wrapped (principal-branch) doubled phase 2*phi.
    """

    def __init__(self, model, phi, M=None, budget=DEFAULT_BUDGET):
        if M is None:
            M = default_filling(model)
        self.table = _FockTable(model, M, budget)
        theta = wrap_angle(2.0 * np.asarray(phi, dtype=float))
        if theta.shape != (model.n_sites,):
            raise ConfigError("phi must have one entry per site")
        phase = np.exp(-0.5j * (self.table.imbalance @ theta))
        self.phi = np.asarray(phi, dtype=float)
        self.ket = self.table.amp0 * phase
        self.bra = np.conj(self.table.amp0) * phase
        self.denom = complex(np.sum(self.bra * self.ket))

    @property
    def overlap(self):
        """Compensated full-defect overlap <V> (denominator of expectations)."""
        return self.denom


def build_exact_state(model, M=None, budget=DEFAULT_BUDGET):
    """Enumerate the dephased doubled state of `model` (dephasing model.g)."""
    return ExactDoubledState(model, M=M, budget=budget)


def phase_inserted_state(model, phi, M=None, budget=DEFAULT_BUDGET):
    """Fixed-field oracle state with explicit half-defect phase insertions."""
    return PhaseInsertedState(model, phi, M=M, budget=budget)


@dataclass(frozen=True)
class ExactCorrelator:
    full: complex
    connected: complex
    one_point_a: complex
    one_point_b: complex


def exact_renyi2_correlator(state, a, b):
    """Renyi-2 correlator <<A B>> / norm and its connected part.

    Operators sit symmetrically between the two dephasing half-weights.
    Returns full, connected = full - <A><B>, and the two one-point values.
    """
    full = state.expectation([a, b])
    one_a = state.expectation([a])
    one_b = state.expectation([b])
    return ExactCorrelator(
        full=complex(full),
        connected=complex(full - one_a * one_b),
        one_point_a=complex(one_a),
        one_point_b=complex(one_b),
    )


def exact_fourpoint(state, ops):
    """Four-operator expectation <<O1 O2 O3 O4>> / norm."""
    if len(ops) != 4:
        raise ConfigError("exact_fourpoint expects exactly four operators")
    return complex(state.expectation(list(ops)))

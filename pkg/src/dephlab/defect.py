"""Auxiliary-field defect configurations and per-configuration checks.

Decoupling the dephasing weight exp(-g sum_i (n_i - N)^2) with one real field
per site (per color generator in the color case) turns every sample into a
pair of phase defects acting on the free doubled ground state: the ket is
twisted by the half defect, the bra by its conjugate, so equal-time operators
always sit symmetrically between the two halves. Everything needed per
configuration lives here: the normalized weight, the dressed equal-time
Green's functions, Wick-contracted two-point values, the onsite envelope that
dominates every charged correlator, and the machine checks that the
dominance, the positivity of the envelope, and the pseudo-spin conjugation
identity hold configuration by configuration.

All fixed-field quantities are exactly periodic in each field component with
period pi because defect matrices are built from the principal branch of the
doubled phase; the Gaussian measure exp(-phi^2/g) lives on the unwrapped
field.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ConfigurationNode, IntegrityError
from .exact import wrap_angle
from .model import (
    PAULI,
    BilinearSpec,
    double_hamiltonian,
    ground_orbitals,
    site_block,
    su_generators,
)

REALITY_TOL = 1e-8
# below AMP_PHASE_FLOOR the determinant phase is roundoff noise and the
# dressed Green's functions are too ill-conditioned to measure; below
# AMP_NODE_FLOOR the configuration counts as an exact node with zero weight
AMP_PHASE_FLOOR = 1e-6
AMP_NODE_FLOOR = 1e-12


@dataclass(frozen=True)
class DefectMatrices:
    """Single-particle defect unitaries on the doubled modes of one flavor
    block, plus the compensation phase restoring charge neutrality."""

    v: np.ndarray
    vhalf: np.ndarray
    compensation: complex


@dataclass(frozen=True)
class ConfigWeight:
    """Weight data of one field configuration.

    The sampling weight is amp^flavor_power * exp(gaussian_exponent) with
    amp the compensated single-block overlap det(P^dag V P) times the
    compensation phase. amp is provably real for a unique ground state;
    reality_margin records how far the numerics drift off the real axis.
    """

    log_abs_amplitude: float
    amplitude_sign: float
    unit_phase: complex
    reality_margin: float
    gaussian_exponent: float
    flavor_power: int
    node: bool = False

    @property
    def amplitude(self):
        """Real compensated overlap of a single flavor block."""
        if self.node:
            return 0.0
        return self.amplitude_sign * np.exp(self.log_abs_amplitude)

    @property
    def log_weight(self):
        if self.node:
            return -np.inf
        return self.flavor_power * self.log_abs_amplitude + self.gaussian_exponent

    @property
    def sign(self):
        return self.amplitude_sign**self.flavor_power

    @property
    def weight(self):
        if self.node:
            return 0.0
        return self.sign * np.exp(self.log_weight)

    @property
    def is_node(self):
        return self.node


@dataclass(frozen=True)
class FixedFieldValue:
    """Wick decomposition of <<A B>> at fixed field: full = one_a*one_b + loop."""

    full: complex
    loop: complex
    one_a: complex
    one_b: complex


@dataclass(frozen=True)
class PairCheck:
    a_name: str
    b_name: str
    kind: str  # "onsite" or "bond"
    value: complex
    bound: float
    margin: float  # bound - |value|, negative means violation


@dataclass(frozen=True)
class ConfigReport:
    weight: ConfigWeight
    pair_checks: tuple
    min_cstar: float
    sigma1_residual: float
    trace_error: float

    def violations(self, margin_tol=1e-10, cstar_tol=1e-12, sigma1_tol=1e-8):
        """Names of the checks this configuration fails at the given
        tolerances; empty tuple means a fully passing configuration."""
        bad = []
        for pc in self.pair_checks:
            if pc.margin < -margin_tol:
                bad.append(f"dominance[{pc.a_name};{pc.b_name}]")
        if self.min_cstar < -cstar_tol:
            bad.append("envelope_positivity")
        if self.sigma1_residual > sigma1_tol:
            bad.append("pseudo_spin_identity")
        if self.trace_error > sigma1_tol:
            bad.append("particle_number")
        return tuple(bad)


class DefectEngine:
    """Per-configuration machinery for one model: weights, Green's functions,
    correlators, checks. Construction diagonalizes the doubled Hamiltonian
    once; every field configuration then costs a dense solve in the occupied
    sector (no fast updates, sizes here do not need them)."""

    def __init__(self, model):
        self.model = model
        self.doubled = double_hamiltonian(model)
        self.orbitals = ground_orbitals(self.doubled)
        self.p = self.orbitals.P
        self.n_sites = model.n_sites
        self.n_colors = model.n_colors
        self.flavor_power = model.flavor_power
        self.block_dim = 2 * model.n_colors
        self.n_modes = self.doubled.n_modes
        self.m1 = np.kron(np.eye(model.n_sites * model.n_colors), PAULI[1])
        if model.n_colors > 1:
            self.generators = su_generators(model.n_colors)
            self.field_shape = (model.n_sites, len(self.generators))
        else:
            self.generators = None
            self.field_shape = (model.n_sites,)

    # ---- fields and matrices ------------------------------------------

    def zero_field(self):
        return np.zeros(self.field_shape)

    def _check_field(self, phi):
        phi = np.asarray(phi, dtype=float)
        if phi.shape != self.field_shape:
            raise ConfigError(
                f"field shape {phi.shape} does not match {self.field_shape}"
            )
        return phi

    def matrices(self, phi):
        """Defect unitaries for one flavor block, principal branch throughout."""
        phi = self._check_field(phi)
        nc = self.n_colors
        if nc == 1:
            theta = wrap_angle(2.0 * phi)
            diag_half = np.repeat(np.exp(-0.5j * theta), 2)
            v = np.diag(diag_half**2)
            vhalf = np.diag(diag_half)
            comp = complex(np.exp(1j * np.sum(theta)))
            return DefectMatrices(v=v, vhalf=vhalf, compensation=comp)
        blocks_v = []
        blocks_h = []
        for i in range(self.n_sites):
            m = sum(phi[i, a] * t for a, t in enumerate(self.generators))
            lam, q = np.linalg.eigh(m)
            ang = wrap_angle(2.0 * lam)
            vc = (q * np.exp(-1j * ang)) @ q.conj().T
            vch = (q * np.exp(-0.5j * ang)) @ q.conj().T
            blocks_v.append(np.kron(vc, np.eye(2)))
            blocks_h.append(np.kron(vch, np.eye(2)))
        v = np.zeros((self.n_modes, self.n_modes), dtype=complex)
        vhalf = np.zeros_like(v)
        for i in range(self.n_sites):
            blk = site_block(i, nc)
            v[blk, blk] = blocks_v[i]
            vhalf[blk, blk] = blocks_h[i]
        # traceless generators: det V = 1, nothing to compensate
        return DefectMatrices(v=v, vhalf=vhalf, compensation=1.0 + 0.0j)

    # ---- weights --------------------------------------------------------

    def weight(self, phi, mats=None):
        phi = self._check_field(phi)
        if self.model.g <= 0:
            raise ConfigError("the auxiliary-field measure needs g > 0")
        if mats is None:
            mats = self.matrices(phi)
        w = self.p.conj().T @ (mats.v @ self.p)
        sign, log_abs = np.linalg.slogdet(w)
        unit = mats.compensation * sign
        node = abs(sign) == 0 or log_abs < np.log(AMP_NODE_FLOOR)
        if node:
            margin = 0.0
            amp_sign = 0.0
        else:
            margin = abs(unit.imag)
            # the phase of a nearly-cancelled determinant is roundoff noise,
            # so only configurations of non-negligible amplitude are held to
            # the reality requirement
            if margin > REALITY_TOL and log_abs > np.log(AMP_PHASE_FLOOR):
                raise IntegrityError(
                    f"flavor-block amplitude acquired a phase: |Im| = {margin:.3e} "
                    f"(field {np.round(phi, 6)})"
                )
            amp_sign = 1.0 if unit.real >= 0 else -1.0
        return ConfigWeight(
            log_abs_amplitude=float(log_abs),
            amplitude_sign=amp_sign,
            unit_phase=complex(unit),
            reality_margin=float(margin),
            gaussian_exponent=float(-np.sum(phi * phi) / self.model.g),
            flavor_power=self.flavor_power,
            node=bool(node),
        )

    # ---- Green's functions ----------------------------------------------

    def greens(self, phi, mats=None):
        """Equal-time G^< and G^> of one flavor block between the half
        defects; G^<[p, q] = <c^dag_q c_p>_phi. Raises ConfigurationNode on a
        singular overlap (a zero-weight configuration with no Gaussian state
        between the defects)."""
        phi = self._check_field(phi)
        if mats is None:
            mats = self.matrices(phi)
        ur = mats.vhalf @ self.p
        ul = mats.vhalf.conj().T @ self.p
        w = ul.conj().T @ ur
        _, log_abs = np.linalg.slogdet(w)
        if not log_abs > np.log(AMP_PHASE_FLOOR):
            # at (or numerically near) a node there is no normalizable
            # Gaussian state between the defects; the configuration carries
            # negligible weight and its measurement is skipped
            raise ConfigurationNode(
                "defect overlap too close to a node, measurement skipped"
            )
        try:
            x = np.linalg.solve(w, ul.conj().T)
        except np.linalg.LinAlgError:
            raise ConfigurationNode(
                "singular defect overlap, measurement skipped"
            ) from None
        gless = ur @ x
        ggtr = np.eye(self.n_modes, dtype=complex) - gless
        return gless, ggtr

    # ---- Wick contractions ----------------------------------------------

    def _as_combo(self, op):
        if isinstance(op, BilinearSpec):
            return [(op, 1.0)]
        if isinstance(op, (list, tuple)) and op:
            if all(isinstance(s, BilinearSpec) for s in op):
                return [(s, 1.0) for s in op]
            return [(s, complex(c)) for s, c in op]
        raise ConfigError(f"cannot interpret operator specification {op!r}")

    def _omega(self, spec):
        om = spec.omega
        if om.shape[0] != self.flavor_power:
            raise ConfigError(
                f"omega acts on {om.shape[0]} flavors, model has "
                f"{self.flavor_power} determinant blocks"
            )
        return om

    def _loop(self, gless, ggtr, ta, tb):
        """Single Wick loop between one term of A and one term of B."""
        ra, ca, ma = ta
        rb, cb, mb = tb
        nc = self.n_colors
        g_ab = ggtr[site_block(ca, nc), site_block(rb, nc)]
        g_ba = gless[site_block(cb, nc), site_block(ra, nc)]
        return np.trace(ma @ g_ab @ mb @ g_ba)

    def _one_point(self, gless, terms):
        nc = self.n_colors
        total = 0.0 + 0.0j
        for r, c, m in terms:
            total += np.trace(m @ gless[site_block(c, nc), site_block(r, nc)])
        return total

    def correlator(self, gless, ggtr, a, b):
        """Fixed-field <<A B>>: Wick value of the two bilinears between the
        half defects, flavor structure contracted. For traceless flavor
        matrices the one-point parts vanish identically and full == loop."""
        geo = self.model.geometry
        nc = self.n_colors
        full_loop = 0.0 + 0.0j
        one_a = 0.0 + 0.0j
        one_b = 0.0 + 0.0j
        combo_a = self._as_combo(a)
        combo_b = self._as_combo(b)
        for spec_a, ca in combo_a:
            oa = self._omega(spec_a)
            terms_a = spec_a.site_terms(geo, n_colors=nc)
            one_a += ca * np.trace(oa) * self._one_point(gless, terms_a)
            for spec_b, cb in combo_b:
                ob = self._omega(spec_b)
                terms_b = spec_b.site_terms(geo, n_colors=nc)
                cross = np.trace(oa @ ob)
                if cross == 0:
                    continue
                loop = sum(
                    self._loop(gless, ggtr, ta, tb)
                    for ta in terms_a
                    for tb in terms_b
                )
                full_loop += ca * cb * cross * loop
        for spec_b, cb in combo_b:
            ob = self._omega(spec_b)
            terms_b = spec_b.site_terms(geo, n_colors=nc)
            one_b += cb * np.trace(ob) * self._one_point(gless, terms_b)
        return FixedFieldValue(
            full=complex(one_a * one_b + full_loop),
            loop=complex(full_loop),
            one_a=complex(one_a),
            one_b=complex(one_b),
        )

    def cstar(self, gless, ggtr, x, y, omega_a, omega_b=None):
        """Onsite envelope at sites (x, y): the mu=1 instance of the same
        loop contraction. Equals tr(Omega_A Omega_B) times a Frobenius norm
        of a G^< block, hence nonnegative whenever tr(Omega_A Omega_B) >= 0;
        the value returned comes from the generic contraction so positivity
        is a measured property, not an identity baked into the code."""
        if omega_b is None:
            omega_b = omega_a
        zero = (0,) * self.model.geometry.ndim
        a = BilinearSpec(x=x, mu=1, omega=omega_a, delta=zero)
        b = BilinearSpec(x=y, mu=1, omega=omega_b, delta=zero)
        val = self.correlator(gless, ggtr, a, b).loop
        return float(val.real), float(abs(val.imag))

    def sigma1_residual(self, gless):
        """max |sigma1 S sigma1 + S^dag| with S = G^< - 1/2: the pseudo-spin
        conjugation identity that makes the envelope an upper bound."""
        s = gless - 0.5 * np.eye(self.n_modes)
        return float(np.max(np.abs(self.m1 @ s @ self.m1 + s.conj().T)))

    # ---- per-configuration verdict ---------------------------------------

    @staticmethod
    def validate_dominance_pair(a, b):
        if not (isinstance(a, BilinearSpec) and isinstance(b, BilinearSpec)):
            raise ConfigError("dominance checks want plain BilinearSpec pairs")
        if a.antisymmetrize or b.antisymmetrize:
            raise ConfigError("dominance checks cover plain bilinears only")
        if not (a.is_traceless and b.is_traceless):
            raise ConfigError("dominance checks need traceless flavor matrices")

    def pair_bound(self, gless, ggtr, a, b):
        """Dominating envelope of the (A, B) correlator on this configuration.

        Onsite pairs at (x, y) are bounded by C*(x, y); bond pairs by the
        geometric mean sqrt(C*(x+d, y) C*(x, y+d')). Returns (bound, kind,
        cstar_values); coefficients of the specs scale the bound.
        """
        self.validate_dominance_pair(a, b)
        geo = self.model.geometry
        scale = abs(a.coefficient * b.coefficient)
        xa, ya = a.x, a.partner_site(geo)
        xb, yb = b.x, b.partner_site(geo)
        if a.is_onsite and b.is_onsite:
            c0, _ = self.cstar(gless, ggtr, xa, xb, a.omega, b.omega)
            return scale * c0, "onsite", (c0,)
        c1, _ = self.cstar(gless, ggtr, ya, xb, a.omega, b.omega)
        c2, _ = self.cstar(gless, ggtr, xa, yb, a.omega, b.omega)
        bound = scale * np.sqrt(max(c1, 0.0) * max(c2, 0.0))
        return bound, "bond", (c1, c2)

    def check(self, phi, pairs):
        """Evaluate every (A, B) pair and its envelope bound on one
        configuration; see pair_bound for the bound shapes."""
        phi = self._check_field(phi)
        mats = self.matrices(phi)
        wt = self.weight(phi, mats=mats)
        gless, ggtr = self.greens(phi, mats=mats)

        checks = []
        min_cstar = np.inf
        for a, b in pairs:
            val = self.correlator(gless, ggtr, a, b).full
            bound, kind, cstars = self.pair_bound(gless, ggtr, a, b)
            min_cstar = min(min_cstar, *cstars)
            checks.append(
                PairCheck(
                    a_name=a.name,
                    b_name=b.name,
                    kind=kind,
                    value=complex(val),
                    bound=float(bound),
                    margin=float(bound - abs(val)),
                )
            )

        return ConfigReport(
            weight=wt,
            pair_checks=tuple(checks),
            min_cstar=float(min_cstar) if checks else 0.0,
            sigma1_residual=self.sigma1_residual(gless),
            trace_error=float(abs(np.trace(gless) - self.orbitals.M)),
        )

"""Post-processing of correlator data: distance profiles, coarse graining,
decay fits, structure factors, and the momentum-space sum-rule check that a
long-range ordered two-point function forces a diverging current response.

Everything here consumes plain arrays; producing the correlators is the job
of the exact and sampler modules.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, IntegrityError
from .exact import exact_fourpoint, exact_renyi2_correlator
from .model import BilinearSpec

HERMITICITY_TOL = 1e-10
GOLDSTONE_MARGIN_TOL = 1e-8


def coarse_grain(values, window, periodic=True):
    """Rigid-translation average: entry x becomes the mean of the block
    values[x .. x+window-1], with wraparound on a ring.

    For a fixed-separation correlator series C(x, x+r) indexed by the base
    site x this translates both operators together, so the averaged series
    is still a separation-r correlator. Open chains lose window-1 trailing
    entries instead of wrapping.
    """
    v = np.asarray(values)
    if window < 1:
        raise ConfigError("window must be >= 1")
    if v.ndim != 1 or v.size == 0:
        raise ConfigError("coarse_grain expects a nonempty 1d series")
    if window > v.size:
        raise ConfigError("window exceeds series length")
    if periodic:
        stacked = np.stack([np.roll(v, -s) for s in range(window)])
        return stacked.mean(axis=0)
    kernel = np.ones(window) / window
    return np.convolve(v, kernel, mode="valid")


def distance_profile(geometry, pairs):
    """Collapse (x, y, value) records to a distance profile.

    Values at the same minimum-image separation are averaged. Returns
    (r, c, counts) sorted by r.
    """
    buckets = {}
    for x, y, value in pairs:
        r = round(geometry.separation(x, y), 9)
        buckets.setdefault(r, []).append(value)
    if not buckets:
        raise ConfigError("no pairs to profile")
    rs = np.array(sorted(buckets))
    cs = np.array([np.mean(buckets[r]) for r in rs])
    counts = np.array([len(buckets[r]) for r in rs])
    return rs, cs, counts


@dataclass(frozen=True)
class DecayFit:
    """Least-squares line through transformed data. kind='power' fits
    log|C| vs log r, kind='exp' fits log|C| vs r."""

    kind: str
    slope: float
    intercept: float
    residual: float  # rms of the fit residuals in log space
    n_points: int
    r_window: tuple

    @property
    def scaling_dimension(self):
        """Delta for |C(r)| ~ r^(-2 Delta)."""
        if self.kind != "power":
            raise ConfigError("scaling dimension is defined for power fits")
        return -self.slope / 2.0

    @property
    def correlation_length(self):
        """xi for |C(r)| ~ exp(-r / xi)."""
        if self.kind != "exp":
            raise ConfigError("correlation length is defined for exp fits")
        if self.slope >= 0:
            return np.inf
        return -1.0 / self.slope

    @property
    def amplitude(self):
        return float(np.exp(self.intercept))

    def as_dict(self):
        out = {
            "kind": self.kind,
            "slope": self.slope,
            "intercept": self.intercept,
            "residual": self.residual,
            "n_points": self.n_points,
            "r_window": list(self.r_window),
        }
        if self.kind == "power":
            out["scaling_dimension"] = self.scaling_dimension
        else:
            xi = self.correlation_length
            out["correlation_length"] = xi if np.isfinite(xi) else None
        return out


def _fit_line(u, logc):
    slope, intercept = np.polyfit(u, logc, 1)
    resid = logc - (slope * u + intercept)
    return float(slope), float(intercept), float(np.sqrt(np.mean(resid**2)))


def fit_decay(r, c, kind="auto", r_min=None, r_max=None, min_points=4):
    """Fit |C(r)| to a power law or an exponential on a distance window.

    The default window drops r < 2 (short-distance transients) and keeps
    everything else. kind='auto' fits both forms and returns the one with
    the smaller log-space residual.
    """
    r = np.asarray(r, dtype=float)
    c = np.abs(np.asarray(c))
    if r.shape != c.shape or r.ndim != 1:
        raise ConfigError("r and c must be 1d arrays of equal length")
    if r_min is None:
        r_min = 2.0
    if r_max is None:
        r_max = np.inf
    min_points = max(int(min_points), 2)  # a line needs two points
    keep = (r >= r_min) & (r <= r_max) & (c > 0) & (r > 0)
    if keep.sum() < min_points:
        raise ConfigError(
            f"decay fit needs at least {min_points} usable points in "
            f"[{r_min}, {r_max}], got {int(keep.sum())}"
        )
    rw, cw = r[keep], np.log(c[keep])
    window = (float(rw.min()), float(rw.max()))
    fits = {}
    if kind in ("power", "auto"):
        s, b, res = _fit_line(np.log(rw), cw)
        fits["power"] = DecayFit("power", s, b, res, rw.size, window)
    if kind in ("exp", "auto"):
        s, b, res = _fit_line(rw, cw)
        fits["exp"] = DecayFit("exp", s, b, res, rw.size, window)
    if not fits:
        raise ConfigError(f"unknown fit kind {kind!r}")
    return min(fits.values(), key=lambda f: f.residual)


def structure_factor(c_of_r):
    """Plain DFT of a separation profile on a ring.

    S(k_m) = sum_r exp(-i k_m r) C(r) with k_m = 2 pi m / L. A profile with
    the lattice Hermiticity C(L - r) = conj(C(r)) gives a real S; the real
    part is returned then, complex otherwise.
    """
    c = np.asarray(c_of_r, dtype=complex)
    if c.ndim != 1 or c.size == 0:
        raise ConfigError("structure_factor expects a nonempty 1d profile")
    L = c.size
    s = np.fft.fft(c)
    k = 2.0 * np.pi * np.arange(L) / L
    hermitian = np.max(np.abs(c - np.conj(np.roll(c[::-1], 1)))) < HERMITICITY_TOL
    if hermitian and np.max(np.abs(s.imag)) < HERMITICITY_TOL * L:
        return k, s.real
    return k, s


@dataclass(frozen=True)
class GoldstoneCheckPoint:
    k: float
    r: int
    lhs: float
    rhs: float
    skipped: bool = False
    reason: str = ""

    @property
    def margin(self):
        return self.lhs - self.rhs

    def as_dict(self):
        return {
            "k": self.k,
            "r": self.r,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "margin": self.margin if not self.skipped else None,
            "skipped": self.skipped,
            "reason": self.reason,
        }


@dataclass(frozen=True)
class GoldstoneReport:
    points: tuple
    charge: float

    @property
    def checked(self):
        return tuple(p for p in self.points if not p.skipped)

    @property
    def worst_margin(self):
        checked = self.checked
        return min(p.margin for p in checked) if checked else np.inf

    @property
    def passed(self):
        return self.worst_margin >= -GOLDSTONE_MARGIN_TOL

    def as_dict(self):
        return {
            "charge": self.charge,
            "points": [p.as_dict() for p in self.points],
            "worst_margin": None if not self.checked else self.worst_margin,
            "passed": bool(self.passed),
        }


def raising_bilinear(x, n_flavors, dagger=False, omega=None, ndim=1):
    """Pseudo-spin raising operator c^dag sigma^+ Omega c at site x, as a
    weighted combination of the mu = 1, 2 bilinears. Carries charge 2 under
    the strong (pseudo-spin) U(1)."""
    om = np.eye(n_flavors) if omega is None else omega
    s = -0.5j if dagger else 0.5j
    zero = (0,) * ndim
    return [
        (BilinearSpec(x=x, mu=1, omega=om, delta=zero), 0.5),
        (BilinearSpec(x=x, mu=2, omega=om, delta=zero), s),
    ]


def bond_current(x, n_flavors, coefficient=1.0):
    """Strong-charge bond current on (x, x+1). The charge has sigma^3
    pseudo-spin structure and so does the doubled hopping, so continuity
    leaves the current with identity pseudo-spin structure (mu = 0)."""
    return BilinearSpec(
        x=x,
        mu=0,
        omega=np.eye(n_flavors),
        delta=1,
        antisymmetrize=True,
        coefficient=coefficient,
    )


def goldstone_data_from_state(state, omega=None):
    """Assemble the sum-rule inputs from an enumeration-backed state.

    Returns (jj_cov, oo, fourpoint): the site-resolved connected covariance
    of the bond currents, and base-site-averaged profiles of the charge-2
    order parameter two-point function and its four-point normalizer.
    """
    model = state.model
    geo = model.geometry
    if geo.ndim != 1:
        raise ConfigError("sum-rule data assembly supports chains only")
    L = geo.n_sites
    nf = model.flavor_power
    n_bonds = L if geo.boundary == "periodic" else L - 1
    currents = [bond_current(x, nf) for x in range(n_bonds)]
    jj = np.empty((n_bonds, n_bonds), dtype=complex)
    for a in range(n_bonds):
        for b in range(n_bonds):
            jj[a, b] = exact_renyi2_correlator(state, currents[a], currents[b]).connected

    def op(x, dagger=False):
        return raising_bilinear(x, nf, dagger=dagger, omega=omega)

    oo = np.zeros(L, dtype=complex)
    fourpoint = np.zeros(L)
    for r in range(1, L):
        vals, norms = [], []
        for x in range(L):
            if geo.boundary != "periodic" and x + r >= L:
                continue
            y = (x + r) % L
            vals.append(exact_renyi2_correlator(state, op(y), op(x, True)).full)
            norms.append(
                exact_fourpoint(state, [op(x), op(y, True), op(y), op(x, True)])
            )
        oo[r] = np.mean(vals)
        norm = complex(np.mean(norms))
        if abs(norm.imag) > 1e-8 * max(1.0, abs(norm)):
            raise IntegrityError(
                f"four-point normalizer at r={r} has imaginary part {norm.imag:.3g}"
            )
        fourpoint[r] = norm.real
    return jj, oo, fourpoint


def current_structure_factor(jj_cov, k):
    """Momentum response v^dag C v / L of a bond-current covariance matrix,
    v_x = exp(i k x). Positive semidefinite C gives a nonnegative value."""
    c = np.asarray(jj_cov, dtype=complex)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ConfigError("jj_cov must be a square matrix")
    if np.max(np.abs(c - c.conj().T)) > HERMITICITY_TOL * max(1.0, np.abs(c).max()):
        raise ConfigError("jj_cov must be Hermitian")
    L = c.shape[0]
    v = np.exp(1j * k * np.arange(L))
    return float(np.real(v.conj() @ c @ v)) / L


def goldstone_bound_check(jj_cov, oo, fourpoint, charge=2.0, rs=None):
    """Check the momentum sum rule k^2 S_J(k) >= 4 q^2 sin^2(k r / 2)
    |OO(r)|^2 / F(r) on the mesh k = pi / r.

    jj_cov is the connected covariance matrix of the bond currents (full
    site-resolved matrix, not translation averaged: positivity of the
    quadratic form is what the bound rests on). oo[r] is the two-point
    function of the order parameter at separation r and fourpoint[r] the
    matching four-point normalizer. Separations with a nonpositive
    normalizer carry no bound and are reported as skipped.
    """
    oo = np.asarray(oo, dtype=complex)
    fp = np.asarray(fourpoint, dtype=float)
    if oo.shape != fp.shape or oo.ndim != 1:
        raise ConfigError("oo and fourpoint must be 1d arrays of equal length")
    if rs is None:
        rs = range(1, oo.size)
    points = []
    for r in rs:
        r = int(r)
        if not 1 <= r < oo.size:
            raise ConfigError(f"separation {r} outside the data range")
        k = np.pi / r
        lhs = k**2 * current_structure_factor(jj_cov, k)
        if fp[r] <= 0:
            points.append(
                GoldstoneCheckPoint(
                    k=k, r=r, lhs=lhs, rhs=0.0, skipped=True,
                    reason="nonpositive four-point normalizer",
                )
            )
            continue
        rhs = 4.0 * charge**2 * np.sin(k * r / 2.0) ** 2 * abs(oo[r]) ** 2 / fp[r]
        points.append(GoldstoneCheckPoint(k=k, r=r, lhs=lhs, rhs=float(rhs)))
    return GoldstoneReport(points=tuple(points), charge=float(charge))

"""Metropolis sampling over defect fields.

The measure is weight(phi) = amp(phi)^flavor_power * exp(-sum phi^2 / g),
positive for every configuration the engine accepts, so observables are
plain averages over the visited configurations (no reweighting). Proposals
update one site at a time with Gaussian steps; the step size is tuned during
burn-in only, so the measured part of the chain is a fixed, valid Markov
kernel. Errors come from a bin-size-doubling analysis; independent chains
are merged by inverse variance.

g = 0 never samples: the dephasing-free values are evaluated once at zero
field and reported with zero statistical error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .defect import DefectEngine
from .errors import ConfigError, ConfigurationNode, SignProblem

TUNE_WINDOW = 50  # sweeps per burn-in tuning window
TUNE_LOW, TUNE_HIGH = 0.3, 0.6
TUNE_SHRINK, TUNE_GROW = 0.8, 1.25
MIN_BINS = 32  # smallest bin count still trusted for a variance estimate


@dataclass(frozen=True)
class SamplerConfig:
    """Knobs of one sampling run.

    proposal_sigma defaults to sqrt(g/2), the width of the free Gaussian
    measure; burn-in tuning moves it toward a 30-60% acceptance window.
    """

    n_sweeps: int = 2000
    n_burnin: int = 500
    measure_every: int = 1
    proposal_sigma: float | None = None
    seed: int = 0
    n_chains: int = 2
    autotune: bool = True

    def __post_init__(self):
        if self.n_sweeps < 1 or self.n_burnin < 0:
            raise ConfigError("need n_sweeps >= 1 and n_burnin >= 0")
        if self.measure_every < 1:
            raise ConfigError("measure_every must be >= 1")
        if self.n_chains < 1:
            raise ConfigError("n_chains must be >= 1")
        if self.proposal_sigma is not None and self.proposal_sigma <= 0:
            raise ConfigError("proposal_sigma must be positive")


@dataclass(frozen=True)
class PairMeasurement:
    """One named correlator <<A B>>; with envelope=True the dominating
    onsite bound is accumulated alongside and margins are tracked."""

    name: str
    a: object
    b: object
    envelope: bool = False


@dataclass(frozen=True)
class BinnedEstimate:
    mean: complex
    stderr: float
    n_samples: int
    binning: tuple  # ((bin_size, stderr), ...) doubling curve

    def as_dict(self):
        return {
            "mean_re": float(np.real(self.mean)),
            "mean_im": float(np.imag(self.mean)),
            "stderr": self.stderr,
            "n_samples": self.n_samples,
            "binning": [[int(s), float(e)] for s, e in self.binning],
        }


@dataclass(frozen=True)
class CorrelatorEstimate:
    name: str
    full: BinnedEstimate
    one_a: complex
    one_b: complex
    bound: BinnedEstimate | None = None
    worst_margin: float | None = None
    n_violations: int = 0

    @property
    def connected(self):
        return self.full.mean - self.one_a * self.one_b

    def as_dict(self):
        out = {
            "name": self.name,
            "full": self.full.as_dict(),
            "one_a": [float(np.real(self.one_a)), float(np.imag(self.one_a))],
            "one_b": [float(np.real(self.one_b)), float(np.imag(self.one_b))],
            "connected_re": float(np.real(self.connected)),
            "connected_im": float(np.imag(self.connected)),
        }
        if self.bound is not None:
            out["bound"] = self.bound.as_dict()
            out["worst_margin"] = self.worst_margin
            out["n_violations"] = self.n_violations
        return out


@dataclass(frozen=True)
class ChainResult:
    chain_index: int
    acceptance_rate: float
    proposal_sigma: float
    n_measured: int
    n_nodes: int
    estimates: dict


@dataclass(frozen=True)
class SampleResult:
    estimates: dict
    chains: tuple
    sampled: bool

    @property
    def n_nodes(self):
        return sum(c.n_nodes for c in self.chains)


def binned_stats(series):
    """Mean and a bin-doubling error estimate for a (complex) series.

    The quoted stderr is read off the largest bin size that still leaves
    MIN_BINS bins, where the doubling curve has typically flattened; the
    whole curve is returned so saturation can be inspected.
    """
    x = np.asarray(series, dtype=complex)
    n = x.size
    if n == 0:
        raise ConfigError("no samples to analyze")
    mean = complex(x.mean())
    if n == 1:
        return BinnedEstimate(mean=mean, stderr=0.0, n_samples=1, binning=())
    curve = []
    size = 1
    y = x
    while y.size >= 2:
        var = np.var(y.real, ddof=1) + np.var(y.imag, ddof=1)
        curve.append((size, float(np.sqrt(var / y.size))))
        if y.size < 2 * MIN_BINS:
            break
        y = y[: (y.size // 2) * 2].reshape(-1, 2).mean(axis=1)
        size *= 2
    return BinnedEstimate(
        mean=mean, stderr=curve[-1][1], n_samples=n, binning=tuple(curve)
    )


def _measure_config(engine, gless, ggtr, measurements):
    """Evaluate every measurement on one configuration."""
    row = {}
    for meas in measurements:
        val = engine.correlator(gless, ggtr, meas.a, meas.b)
        entry = {"full": val.full, "one_a": val.one_a, "one_b": val.one_b}
        if meas.envelope:
            bound, _, _ = engine.pair_bound(gless, ggtr, meas.a, meas.b)
            entry["bound"] = bound
            entry["margin"] = bound - abs(val.full)
        row[meas.name] = entry
    return row


def _estimates_from_series(measurements, series):
    out = {}
    for meas in measurements:
        rows = series[meas.name]
        full = binned_stats([r["full"] for r in rows])
        one_a = complex(np.mean([r["one_a"] for r in rows]))
        one_b = complex(np.mean([r["one_b"] for r in rows]))
        bound = None
        worst = None
        n_viol = 0
        if meas.envelope:
            bound = binned_stats([r["bound"] for r in rows])
            margins = np.array([r["margin"] for r in rows])
            worst = float(margins.min())
            n_viol = int(np.sum(margins < -1e-10))
        out[meas.name] = CorrelatorEstimate(
            name=meas.name,
            full=full,
            one_a=one_a,
            one_b=one_b,
            bound=bound,
            worst_margin=worst,
            n_violations=n_viol,
        )
    return out


def run_chain(engine, config, measurements, chain_index=0):
    """One Metropolis chain: burn-in with optional step tuning, then
    measurement sweeps. Raises SignProblem if a negative weight ever shows
    up (it cannot for the models this engine accepts, but the guard is
    cheap insurance)."""
    model = engine.model
    if model.g <= 0:
        raise ConfigError("run_chain needs g > 0; use free_values for g = 0")
    rng = np.random.default_rng(
        np.random.SeedSequence(entropy=config.seed, spawn_key=(chain_index,))
    )
    sigma = config.proposal_sigma or math.sqrt(model.g / 2.0)

    phi = engine.zero_field()
    log_w = engine.weight(phi).log_weight  # zero field is never a node

    site_shape = engine.field_shape[1:]  # per-site field entry shape
    n_sites = engine.n_sites

    def sweep(current_phi, current_log_w, width):
        accepted = 0
        for i in range(n_sites):
            proposal = current_phi.copy()
            proposal[i] += rng.normal(scale=width, size=site_shape or None)
            wt = engine.weight(proposal)
            if wt.amplitude_sign < 0:
                raise SignProblem(
                    "negative configuration weight encountered while sampling"
                )
            if np.log(rng.uniform()) < wt.log_weight - current_log_w:
                current_phi = proposal
                current_log_w = wt.log_weight
                accepted += 1
        return current_phi, current_log_w, accepted

    # burn-in, tuning the step width on acceptance windows
    window_acc = 0
    for s in range(config.n_burnin):
        phi, log_w, acc = sweep(phi, log_w, sigma)
        window_acc += acc
        if config.autotune and (s + 1) % TUNE_WINDOW == 0:
            rate = window_acc / (TUNE_WINDOW * n_sites)
            if rate < TUNE_LOW:
                sigma *= TUNE_SHRINK
            elif rate > TUNE_HIGH:
                sigma *= TUNE_GROW
            window_acc = 0

    series = {meas.name: [] for meas in measurements}
    n_nodes = 0
    accepted_total = 0
    for s in range(config.n_sweeps):
        phi, log_w, acc = sweep(phi, log_w, sigma)
        accepted_total += acc
        if (s + 1) % config.measure_every:
            continue
        try:
            gless, ggtr = engine.greens(phi)
        except ConfigurationNode:
            n_nodes += 1
            continue
        row = _measure_config(engine, gless, ggtr, measurements)
        for name, entry in row.items():
            series[name].append(entry)

    n_measured = len(next(iter(series.values()))) if measurements else 0
    if measurements and n_measured == 0:
        raise ConfigError("every measurement landed on a node; nothing to report")
    return ChainResult(
        chain_index=chain_index,
        acceptance_rate=accepted_total / (config.n_sweeps * n_sites),
        proposal_sigma=float(sigma),
        n_measured=n_measured,
        n_nodes=n_nodes,
        estimates=_estimates_from_series(measurements, series),
    )


def _merge_binned(parts):
    """Inverse-variance merge of BinnedEstimates from independent chains."""
    if len(parts) == 1:
        return parts[0]
    errs = np.array([p.stderr for p in parts])
    means = np.array([p.mean for p in parts], dtype=complex)
    n_total = int(sum(p.n_samples for p in parts))
    if np.any(errs == 0.0):
        # a zero-variance observable (constant series) makes the inverse
        # weights degenerate; fall back to the plain average and quote the
        # largest per-chain error
        return BinnedEstimate(
            mean=complex(means.mean()),
            stderr=float(errs.max()),
            n_samples=n_total,
            binning=(),
        )
    w = 1.0 / errs**2
    return BinnedEstimate(
        mean=complex(np.sum(w * means) / np.sum(w)),
        stderr=float(1.0 / np.sqrt(np.sum(w))),
        n_samples=n_total,
        binning=(),
    )


def merge_chains(measurements, chains):
    merged = {}
    for meas in measurements:
        parts = [c.estimates[meas.name] for c in chains]
        weights = np.array([max(p.full.n_samples, 1) for p in parts], dtype=float)
        weights /= weights.sum()
        full = _merge_binned([p.full for p in parts])
        one_a = complex(np.sum(weights * np.array([p.one_a for p in parts])))
        one_b = complex(np.sum(weights * np.array([p.one_b for p in parts])))
        bound = None
        worst = None
        n_viol = 0
        if meas.envelope:
            bound = _merge_binned([p.bound for p in parts])
            worst = float(min(p.worst_margin for p in parts))
            n_viol = int(sum(p.n_violations for p in parts))
        merged[meas.name] = CorrelatorEstimate(
            name=meas.name,
            full=full,
            one_a=one_a,
            one_b=one_b,
            bound=bound,
            worst_margin=worst,
            n_violations=n_viol,
        )
    return merged


def free_values(engine, measurements):
    """Deterministic g = 0 evaluation at zero field, zero statistical error."""
    gless, ggtr = engine.greens(engine.zero_field())
    out = {}
    for meas in measurements:
        val = engine.correlator(gless, ggtr, meas.a, meas.b)
        bound = None
        worst = None
        if meas.envelope:
            b, _, _ = engine.pair_bound(gless, ggtr, meas.a, meas.b)
            bound = BinnedEstimate(mean=complex(b), stderr=0.0, n_samples=1, binning=())
            worst = float(b - abs(val.full))
        out[meas.name] = CorrelatorEstimate(
            name=meas.name,
            full=BinnedEstimate(
                mean=complex(val.full), stderr=0.0, n_samples=1, binning=()
            ),
            one_a=complex(val.one_a),
            one_b=complex(val.one_b),
            bound=bound,
            worst_margin=worst,
            n_violations=0,
        )
    return out


def sample_correlators(model, config, measurements, n_threads=1):
    """Top-level estimator: free evaluation at g = 0, otherwise n_chains
    independent Metropolis chains merged by inverse variance.

    Chains are seeded independently of how they are scheduled and merged in
    chain-index order, so the result does not depend on n_threads.
    """
    engine = DefectEngine(model)
    names = [m.name for m in measurements]
    if len(set(names)) != len(names):
        raise ConfigError("measurement names must be unique")
    if model.g == 0.0:
        return SampleResult(
            estimates=free_values(engine, measurements), chains=(), sampled=False
        )
    indices = range(config.n_chains)
    if n_threads > 1 and config.n_chains > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            chains = tuple(
                pool.map(
                    lambda k: run_chain(engine, config, measurements, chain_index=k),
                    indices,
                )
            )
    else:
        chains = tuple(
            run_chain(engine, config, measurements, chain_index=k) for k in indices
        )
    return SampleResult(
        estimates=merge_chains(measurements, chains), chains=chains, sampled=True
    )

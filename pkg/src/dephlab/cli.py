"""Batch front end: config parsing, run orchestration, and file output.

Configs are plain INI text. Parsing is strict: an unknown section or key is
fatal (with a close-match suggestion), because a silently ignored typo in a
physics parameter is the costliest failure mode this tool has.

Subcommands: exact (oracle values), sample (Monte Carlo estimates, plus an
oracle comparison when route=both), verify (per-configuration inequality
and positivity sweep), analyze (profiles, fits, structure factor, sum-rule
report), model-info (spectrum and filling summary).

Outputs are deterministic: no timestamps, sorted JSON keys, fixed seeds.
Re-running a config reproduces every file byte for byte. DEPHLAB_THREADS
sets the worker-thread count (default 1); it never changes results, only
scheduling.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import difflib
import hashlib
import json
import os
import sys
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .analysis import (
    distance_profile,
    fit_decay,
    goldstone_bound_check,
    goldstone_data_from_state,
    structure_factor,
)
from .defect import DefectEngine
from .errors import ConfigError, ConfigurationNode, DephlabError, SignProblem
from .exact import build_exact_state, exact_renyi2_correlator
from .model import BilinearSpec, build_model, su_generators
from .sampler import PairMeasurement, SamplerConfig, sample_correlators

_SECTION_KEYS = {
    "model": {
        "geometry", "l", "lx", "ly", "t", "boundary", "mass",
        "n", "n_flavors", "n_c", "n_colors",
        "disorder_strength", "disorder_seed", "h_file",
    },
    "dephasing": {"g"},
    "run": {"route", "output_dir", "budget"},
    "sampler": {
        "n_sweeps", "n_burnin", "measure_every", "proposal_sigma",
        "seed", "n_chains", "autotune",
    },
    "measurement": {"envelope"},  # plus any number of pair* keys
    "verify": {"n_configs", "seed"},
    "analyze": {"mu", "omega", "fit", "r_min", "r_max", "goldstone", "charge"},
}

_ROUTES = ("exact", "mc", "both")

_OMEGA_NAMES = ("su2-x", "su2-y", "su2-z", "suN-I")


@dataclass(frozen=True)
class RunConfig:
    model: object
    route: str
    output_dir: str
    budget: int
    sampler: SamplerConfig
    measurements: tuple
    verify_configs: int
    verify_seed: int
    analyze: dict
    config_hash: str
    echo: dict


def _suggest(bad, candidates):
    close = difflib.get_close_matches(bad, sorted(candidates), n=1)
    return f"; did you mean {close[0]!r}?" if close else ""


def _convert(section, key, raw, kind):
    try:
        if kind is bool:
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError:
        raise ConfigError(
            f"[{section}] {key} = {raw!r} is not a valid {kind.__name__}"
        ) from None


def omega_by_name(name, flavor_power):
    """Flavor matrix from a config token: a known generator name or an
    inline JSON matrix (real entries, no spaces)."""
    if name.startswith("["):
        try:
            mat = np.asarray(json.loads(name), dtype=float)
        except (json.JSONDecodeError, ValueError):
            raise ConfigError(f"could not parse inline omega matrix {name!r}") from None
        if mat.shape != (flavor_power, flavor_power):
            raise ConfigError(
                f"omega matrix must be {flavor_power}x{flavor_power}, "
                f"got shape {mat.shape}"
            )
        return mat
    lowered = name.lower()
    if lowered == "sun-i":
        return np.eye(flavor_power)
    if lowered in ("su2-x", "su2-y", "su2-z"):
        if flavor_power != 2:
            raise ConfigError(
                f"omega {name!r} needs two flavors per color, "
                f"model has {flavor_power}"
            )
        return su_generators(2)["xyz".index(lowered[-1])]
    raise ConfigError(
        f"unknown omega {name!r}{_suggest(name, _OMEGA_NAMES)}"
    )


def _parse_pair(name, raw, model):
    """pairK = xA xB mu omega [deltaA deltaB]; sites are row-major indices,
    deltas are offsets along the first axis (0 = onsite)."""
    tokens = raw.split()
    if len(tokens) not in (4, 6):
        raise ConfigError(
            f"[measurement] {name} needs 'x y mu omega' with an optional "
            f"'deltaA deltaB' tail, got {raw!r}"
        )
    x = _convert("measurement", name, tokens[0], int)
    y = _convert("measurement", name, tokens[1], int)
    mu = _convert("measurement", name, tokens[2], int)
    n = model.n_sites
    if not (0 <= x < n and 0 <= y < n):
        raise ConfigError(f"[measurement] {name}: sites must be in 0..{n - 1}")
    om = omega_by_name(tokens[3], model.flavor_power)
    da = db = 0
    if len(tokens) == 6:
        da = _convert("measurement", name, tokens[4], int)
        db = _convert("measurement", name, tokens[5], int)
    pad = (0,) * (model.geometry.ndim - 1)
    a = BilinearSpec(x=x, mu=mu, omega=om, delta=(da,) + pad)
    b = BilinearSpec(x=y, mu=mu, omega=om, delta=(db,) + pad)
    return a, b


def parse_config(text, config_hash=""):
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text)
    except configparser.Error as err:
        raise ConfigError(f"config does not parse: {err}") from None

    for section in cp.sections():
        if section not in _SECTION_KEYS:
            raise ConfigError(
                f"unknown section [{section}]{_suggest(section, _SECTION_KEYS)}"
            )
        allowed = _SECTION_KEYS[section]
        for key in cp[section]:
            if key in allowed or (section == "measurement" and key.startswith("pair")):
                continue
            pool = set(allowed) | ({"pair1"} if section == "measurement" else set())
            raise ConfigError(
                f"unknown key {key!r} in [{section}]{_suggest(key, pool)}"
            )

    if not cp.has_section("model"):
        raise ConfigError("config needs a [model] section")
    ms = cp["model"]
    if "geometry" not in ms:
        raise ConfigError("[model] needs a geometry (chain, square, pi_flux, random, custom)")

    kwargs = {"g": 1.0}
    if cp.has_section("dephasing") and "g" in cp["dephasing"]:
        kwargs["g"] = _convert("dephasing", "g", cp["dephasing"]["g"], float)
    for key, kind in (
        ("l", int), ("lx", int), ("ly", int), ("t", float), ("mass", float),
        ("disorder_strength", float), ("disorder_seed", int),
    ):
        if key in ms:
            name = "L" if key == "l" else key.capitalize() if key in ("lx", "ly") else key
            kwargs[name] = _convert("model", key, ms[key], kind)
    if "boundary" in ms:
        kwargs["boundary"] = ms["boundary"].strip()
    for alias, canonical in (("n", "n_flavors"), ("n_c", "n_colors")):
        for key in (alias, canonical):
            if key in ms:
                kwargs[canonical] = _convert("model", key, ms[key], int)
    if "n_flavors" not in kwargs:
        kwargs["n_flavors"] = 2
    if "h_file" in ms:
        from .model import load_hamiltonian_file

        kwargs["h"] = load_hamiltonian_file(ms["h_file"])
    model = build_model(ms["geometry"].strip(), **kwargs)

    route, output_dir, budget = "both", ".", 10**7
    if cp.has_section("run"):
        rs = cp["run"]
        route = rs.get("route", route).strip()
        output_dir = rs.get("output_dir", output_dir).strip()
        if "budget" in rs:
            budget = _convert("run", "budget", rs["budget"], int)
    if route not in _ROUTES:
        raise ConfigError(
            f"route must be one of {', '.join(_ROUTES)}, got {route!r}"
        )
    if route == "mc" and model.flavor_power % 2:
        raise SignProblem(
            "route=mc requires an even number of flavors per color "
            f"(the weight is a determinant to the power N/N_c = "
            f"{model.flavor_power}, odd powers are not guaranteed "
            "nonnegative); use an even N or route=exact"
        )

    sampler_kwargs = {}
    if cp.has_section("sampler"):
        ss = cp["sampler"]
        for key, kind in (
            ("n_sweeps", int), ("n_burnin", int), ("measure_every", int),
            ("proposal_sigma", float), ("seed", int), ("n_chains", int),
            ("autotune", bool),
        ):
            if key in ss:
                sampler_kwargs[key] = _convert("sampler", key, ss[key], kind)
    sampler = SamplerConfig(**sampler_kwargs)

    measurements = []
    if cp.has_section("measurement"):
        envelope = False
        if "envelope" in cp["measurement"]:
            envelope = _convert(
                "measurement", "envelope", cp["measurement"]["envelope"], bool
            )
        for key, raw in cp["measurement"].items():
            if not key.startswith("pair"):
                continue
            a, b = _parse_pair(key, raw, model)
            measurements.append(PairMeasurement(name=key, a=a, b=b, envelope=envelope))

    verify_configs, verify_seed = 1000, 0
    if cp.has_section("verify"):
        vs = cp["verify"]
        if "n_configs" in vs:
            verify_configs = _convert("verify", "n_configs", vs["n_configs"], int)
        if "seed" in vs:
            verify_seed = _convert("verify", "seed", vs["seed"], int)
    if verify_configs < 1:
        raise ConfigError("[verify] n_configs must be >= 1")

    analyze = {
        "mu": 1,
        "omega": "su2-z" if model.flavor_power == 2 else "suN-I",
        "fit": "auto",
        "r_min": None,
        "r_max": None,
        "goldstone": True,
        "charge": 2.0,
    }
    if cp.has_section("analyze"):
        asec = cp["analyze"]
        for key, kind in (
            ("mu", int), ("r_min", float), ("r_max", float),
            ("goldstone", bool), ("charge", float),
        ):
            if key in asec:
                analyze[key] = _convert("analyze", key, asec[key], kind)
        if "omega" in asec:
            analyze["omega"] = asec["omega"].strip()
        if "fit" in asec:
            analyze["fit"] = asec["fit"].strip()
    if analyze["fit"] not in ("auto", "power", "exp", "none"):
        raise ConfigError(
            f"[analyze] fit must be auto, power, exp or none, got {analyze['fit']!r}"
        )
    if not 0 <= analyze["mu"] <= 3:
        raise ConfigError("[analyze] mu must be in 0..3")

    echo = {s: dict(cp[s]) for s in cp.sections()}
    return RunConfig(
        model=model,
        route=route,
        output_dir=output_dir,
        budget=budget,
        sampler=sampler,
        measurements=tuple(measurements),
        verify_configs=verify_configs,
        verify_seed=verify_seed,
        analyze=analyze,
        config_hash=config_hash,
        echo=echo,
    )


# ---- output files ---------------------------------------------------------


def _metadata(cfg, command):
    model = cfg.model
    return {
        "version": __version__,
        "command": command,
        "config_hash": cfg.config_hash,
        "seed": cfg.sampler.seed,
        "route": cfg.route,
        "config": cfg.echo,
        "model": {
            "geometry": model.geometry.tag,
            "shape": list(model.geometry.shape),
            "boundary": model.geometry.boundary,
            "n_sites": model.n_sites,
            "n_flavors": model.n_flavors,
            "n_colors": model.n_colors,
            "flavor_power": model.flavor_power,
            "g": model.g,
        },
    }


def _write_json(path, payload):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _pair_distance(model, meas):
    return model.geometry.separation(meas.a.x, meas.b.x)


def _write_correlators_csv(path, model, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label", "r", "mean_re", "mean_im", "stderr"])
        for label, r, mean, stderr in rows:
            writer.writerow(
                [label, f"{r:.10g}", f"{mean.real:.16e}", f"{mean.imag:.16e}",
                 f"{stderr:.6e}"]
            )


def _exact_estimates(cfg):
    if not cfg.measurements:
        raise ConfigError("nothing to do: [measurement] lists no pairs")
    state = build_exact_state(cfg.model, budget=cfg.budget)
    out = {}
    for meas in cfg.measurements:
        val = exact_renyi2_correlator(state, meas.a, meas.b)
        out[meas.name] = val
    return out


# ---- subcommands ------------------------------------------------------------


def run_exact(cfg, threads):
    values = _exact_estimates(cfg)
    payload = _metadata(cfg, "exact")
    payload["estimates"] = {
        name: {
            "mean_re": val.full.real,
            "mean_im": val.full.imag,
            "stderr": 0.0,
            "connected_re": val.connected.real,
            "connected_im": val.connected.imag,
            "one_a": [val.one_point_a.real, val.one_point_a.imag],
            "one_b": [val.one_point_b.real, val.one_point_b.imag],
        }
        for name, val in values.items()
    }
    _write_json(os.path.join(cfg.output_dir, "results.json"), payload)
    rows = [
        (m.name, _pair_distance(cfg.model, m), values[m.name].full, 0.0)
        for m in cfg.measurements
    ]
    _write_correlators_csv(
        os.path.join(cfg.output_dir, "correlators.csv"), cfg.model, rows
    )
    print(f"exact: wrote {len(rows)} correlators to {cfg.output_dir}")
    return 0


def run_sample(cfg, threads):
    if cfg.route == "exact":
        raise ConfigError("route=exact forbids sampling; use the exact subcommand")
    if cfg.model.g > 0 and cfg.model.flavor_power % 2:
        raise SignProblem(
            "sampling requires an even number of flavors per color "
            f"(N/N_c = {cfg.model.flavor_power} is odd)"
        )
    if not cfg.measurements:
        raise ConfigError("nothing to do: [measurement] lists no pairs")
    result = sample_correlators(
        cfg.model, cfg.sampler, list(cfg.measurements), n_threads=threads
    )
    payload = _metadata(cfg, "sample")
    payload["sampled"] = result.sampled
    payload["estimates"] = {
        name: est.as_dict() for name, est in result.estimates.items()
    }
    payload["chains"] = [
        {
            "chain_index": c.chain_index,
            "acceptance_rate": c.acceptance_rate,
            "proposal_sigma": c.proposal_sigma,
            "n_measured": c.n_measured,
            "n_nodes": c.n_nodes,
        }
        for c in result.chains
    ]
    _write_json(os.path.join(cfg.output_dir, "results.json"), payload)
    rows = [
        (
            m.name,
            _pair_distance(cfg.model, m),
            result.estimates[m.name].full.mean,
            result.estimates[m.name].full.stderr,
        )
        for m in cfg.measurements
    ]
    _write_correlators_csv(
        os.path.join(cfg.output_dir, "correlators.csv"), cfg.model, rows
    )

    if cfg.route == "both":
        exact_values = _exact_estimates(cfg)
        comparison = {"pairs": {}, "all_within_3sigma": True}
        for m in cfg.measurements:
            est = result.estimates[m.name]
            ref = exact_values[m.name].full
            diff = abs(est.full.mean - ref)
            err = est.full.stderr
            within = bool(diff <= 3.0 * err) if err > 0 else bool(diff <= 1e-12)
            comparison["pairs"][m.name] = {
                "exact_re": ref.real,
                "exact_im": ref.imag,
                "mc_re": est.full.mean.real,
                "mc_im": est.full.mean.imag,
                "abs_difference": diff,
                "stderr": err,
                "within_3sigma": within,
            }
            comparison["all_within_3sigma"] &= within
        payload_cmp = _metadata(cfg, "sample")
        payload_cmp["comparison"] = comparison
        _write_json(os.path.join(cfg.output_dir, "comparison.json"), payload_cmp)
        tag = "agrees" if comparison["all_within_3sigma"] else "DISAGREES"
        print(f"sample: MC {tag} with the oracle within 3 sigma")
    print(f"sample: wrote estimates to {cfg.output_dir}")
    return 0


def _default_verify_pairs(model):
    """Standard battery: every onsite mu at separation 1 plus a delta=1 bond
    pair, all with a traceless diagonal flavor generator."""
    fp = model.flavor_power
    if fp < 2:
        raise ConfigError(
            "the default verify battery needs a traceless flavor matrix; "
            "models with one flavor per color must configure [measurement]"
        )
    om = su_generators(fp)[-1]  # diagonal generator
    y = 1 if model.n_sites > 1 else 0
    zero = (0,) * model.geometry.ndim
    step = (1,) + (0,) * (model.geometry.ndim - 1)
    pairs = [
        (
            BilinearSpec(x=0, mu=mu, omega=om, delta=zero),
            BilinearSpec(x=y, mu=mu, omega=om, delta=zero),
        )
        for mu in range(4)
    ]
    if model.geometry.shift(0, 1) is not None and model.n_sites > 2:
        pairs.append(
            (
                BilinearSpec(x=0, mu=1, omega=om, delta=step),
                BilinearSpec(x=y, mu=1, omega=om, delta=step),
            )
        )
    return pairs


def run_verify(cfg, threads):
    engine = DefectEngine(cfg.model)
    if cfg.measurements:
        pairs = [(m.a, m.b) for m in cfg.measurements]
    else:
        pairs = _default_verify_pairs(cfg.model)
    for a, b in pairs:
        engine.validate_dominance_pair(a, b)

    rng = np.random.default_rng(cfg.verify_seed)
    scale = np.sqrt(cfg.model.g / 2.0) if cfg.model.g > 0 else 0.0
    fields = rng.normal(scale=scale, size=(cfg.verify_configs,) + engine.field_shape)

    def one(phi):
        try:
            return engine.check(phi, pairs)
        except ConfigurationNode:
            return None

    if threads > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            reports = list(pool.map(one, fields))
    else:
        reports = [one(phi) for phi in fields]

    n_nodes = sum(r is None for r in reports)
    reports = [r for r in reports if r is not None]
    if not reports:
        raise ConfigError("every drawn configuration was a node; nothing verified")

    violation_counts = {}
    for rep in reports:
        for name in rep.violations():
            violation_counts[name] = violation_counts.get(name, 0) + 1
    worst_margin = min(
        min((c.margin for c in rep.pair_checks), default=np.inf) for rep in reports
    )
    summary = {
        "n_configs": cfg.verify_configs,
        "n_checked": len(reports),
        "n_nodes": n_nodes,
        "seed": cfg.verify_seed,
        "pairs": [[a.name, b.name] for a, b in pairs],
        "violations": violation_counts,
        "n_violating_configs": sum(1 for r in reports if r.violations()),
        "worst_margin": float(worst_margin),
        "min_cstar": float(min(r.min_cstar for r in reports)),
        "max_sigma1_residual": float(max(r.sigma1_residual for r in reports)),
        "max_reality_margin": float(max(r.weight.reality_margin for r in reports)),
        "max_trace_error": float(max(r.trace_error for r in reports)),
    }
    passed = not violation_counts
    summary["passed"] = passed
    payload = _metadata(cfg, "verify")
    payload["report"] = summary
    _write_json(os.path.join(cfg.output_dir, "report.json"), payload)
    status = "pass" if passed else "FAIL"
    print(
        f"verify: {status} over {summary['n_checked']} configurations "
        f"({n_nodes} nodes skipped), worst margin {worst_margin:.3e}"
    )
    return 0 if passed else 1


def run_analyze(cfg, threads):
    model = cfg.model
    state = build_exact_state(model, budget=cfg.budget)
    om = omega_by_name(cfg.analyze["omega"], model.flavor_power)
    mu = cfg.analyze["mu"]

    zero = (0,) * model.geometry.ndim
    pairs = []
    for x in range(model.n_sites):
        for y in range(x + 1, model.n_sites):
            a = BilinearSpec(x=x, mu=mu, omega=om, delta=zero)
            b = BilinearSpec(x=y, mu=mu, omega=om, delta=zero)
            pairs.append((x, y, exact_renyi2_correlator(state, a, b).full))
    rs, cs, counts = distance_profile(model.geometry, pairs)

    report = {
        "profile": {
            "r": [float(r) for r in rs],
            "c_re": [float(c.real) for c in cs],
            "c_im": [float(c.imag) for c in cs],
            "counts": [int(n) for n in counts],
            "mu": mu,
            "omega": cfg.analyze["omega"],
        }
    }

    if cfg.analyze["fit"] != "none":
        try:
            fit = fit_decay(
                rs, cs, kind=cfg.analyze["fit"],
                r_min=cfg.analyze["r_min"], r_max=cfg.analyze["r_max"],
            )
            report["fit"] = fit.as_dict()
        except ConfigError as err:
            report["fit"] = {"skipped": str(err)}

    if model.geometry.boundary == "periodic" and model.geometry.ndim == 1:
        L = model.n_sites
        ring = np.zeros(L, dtype=complex)
        for r in range(L):
            vals = [
                exact_renyi2_correlator(
                    state,
                    BilinearSpec(x=x, mu=mu, omega=om),
                    BilinearSpec(x=(x + r) % L, mu=mu, omega=om),
                ).full
                for x in range(L)
            ]
            ring[r] = np.mean(vals)
        k, s = structure_factor(ring)
        entry = {"k": [float(v) for v in k]}
        if np.iscomplexobj(s):
            entry["s_re"] = [float(v.real) for v in s]
            entry["s_im"] = [float(v.imag) for v in s]
        else:
            entry["s_re"] = [float(v) for v in s]
        report["structure_factor"] = entry
    else:
        report["structure_factor"] = None

    if cfg.analyze["goldstone"]:
        jj, oo, fourpoint = goldstone_data_from_state(state)
        gb = goldstone_bound_check(jj, oo, fourpoint, charge=cfg.analyze["charge"])
        report["goldstone"] = gb.as_dict()

    payload = _metadata(cfg, "analyze")
    payload["report"] = report
    _write_json(os.path.join(cfg.output_dir, "report.json"), payload)
    print(f"analyze: wrote report to {cfg.output_dir}")
    return 0


def run_model_info(cfg, threads):
    from .exact import enumeration_size
    from .model import double_hamiltonian, ground_orbitals

    model = cfg.model
    doubled = double_hamiltonian(model)
    orbitals = ground_orbitals(doubled)  # degenerate spectrum raises here
    eps = np.linalg.eigvalsh(np.asarray(model.h))
    size = enumeration_size(model)
    feasible = (
        size is not None
        and size <= cfg.budget
        and 2 * model.n_sites * model.n_flavors <= 62
    )
    info = {
        "geometry": model.geometry.tag,
        "shape": list(model.geometry.shape),
        "boundary": model.geometry.boundary,
        "n_sites": model.n_sites,
        "n_flavors": model.n_flavors,
        "n_colors": model.n_colors,
        "flavor_power": model.flavor_power,
        "g": model.g,
        "parent_spectrum": [float(e) for e in eps],
        "doubled_modes": doubled.n_modes,
        "filling": orbitals.M,
        "doubled_gap": orbitals.gap,
        "enumeration_size": size,
        "enumeration_feasible": feasible,
    }
    print(json.dumps(info, indent=2, sort_keys=True))
    return 0


_DISPATCH = {
    "exact": run_exact,
    "sample": run_sample,
    "verify": run_verify,
    "analyze": run_analyze,
    "model-info": run_model_info,
}


def _thread_count():
    raw = os.environ.get("DEPHLAB_THREADS", "1")
    try:
        threads = int(raw)
    except ValueError:
        raise ConfigError(f"DEPHLAB_THREADS={raw!r} is not an integer") from None
    if threads < 1:
        raise ConfigError("DEPHLAB_THREADS must be >= 1")
    return threads


def load_config(path, output_override=None):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    digest = hashlib.sha256(text.encode("utf-8")).hexdigest()
    cfg = parse_config(text, config_hash=digest)
    if output_override:
        cfg = replace(cfg, output_dir=output_override)
    return cfg


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="dephlab",
        description="Renyi-2 correlator laboratory for dephased free fermions",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__}"
    )
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "exact": "enumeration-oracle correlator values",
        "sample": "Monte Carlo estimates (with oracle comparison when route=both)",
        "verify": "per-configuration inequality and positivity sweep",
        "analyze": "distance profiles, decay fits, structure factor, sum-rule report",
        "model-info": "spectrum, gap, and enumeration feasibility",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("config", help="path to the INI run configuration")
        p.add_argument(
            "-o", "--output", default=None,
            help="output directory (overrides [run] output_dir)",
        )
    args = parser.parse_args(argv)

    try:
        threads = _thread_count()
        cfg = load_config(args.config, output_override=args.output)
        os.makedirs(cfg.output_dir, exist_ok=True)
        return _DISPATCH[args.command](cfg, threads)
    except DephlabError as err:
        print(f"error: {err}", file=sys.stderr)
        return err.exit_code


if __name__ == "__main__":
    sys.exit(main())

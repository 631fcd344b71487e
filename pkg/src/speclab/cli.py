"""Batch experiment driver with reproducible JSON configs.

Subcommands:

    speclab run <config.json> --out DIR
    speclab validate <config.json>
    speclab schema <kind>

A config is a single JSON document {"kind": ..., "seed": ..., ...}; no
environment variables are consulted, so the manifest written next to the
artifacts fully determines a run. Reports are byte-deterministic for a
fixed config and seed; the manifest additionally records wall time.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from importlib import metadata
from pathlib import Path

import numpy as np
import jsonschema

KINDS = ("diophantine", "weights", "gauge-sweep", "embed", "kernel-sweep",
         "fit", "wave-vs-eig")

_POTENTIAL_SCHEMA = {
    "type": "object",
    "properties": {
        "kind": {"enum": ["zero", "bump", "cosine", "quasiperiodic"]},
        "amplitude": {"type": "number"},
        "width": {"type": "number", "exclusiveMinimum": 0},
        "center": {"type": "number"},
        "frequency": {"type": "number"},
        "frequencies": {"type": "array", "items": {"type": "number"},
                        "minItems": 1},
        "amplitudes": {"type": "array", "items": {"type": "number"},
                       "minItems": 1},
        "envelope_width": {"type": "number", "exclusiveMinimum": 0},
    },
    "required": ["kind"],
    "additionalProperties": False,
}

SCHEMAS = {
    "diophantine": {
        "type": "object",
        "properties": {
            "kind": {"const": "diophantine"},
            "seed": {"type": "integer"},
            "omega": {"type": "array", "items": {"type": "number"},
                      "minItems": 1},
            "n_max": {"type": "integer", "minimum": 1},
            "mu": {"type": "number", "minimum": 0},
        },
        "required": ["kind", "omega", "n_max", "mu"],
        "additionalProperties": False,
    },
    "weights": {
        "type": "object",
        "properties": {
            "kind": {"const": "weights"},
            "seed": {"type": "integer"},
            "frequencies": {"type": "array", "items": {"type": "number"},
                            "minItems": 1},
            "norms": {"type": "array", "items": {"type": "number",
                                                 "minimum": 0}},
            "k_max": {"type": "integer", "minimum": 1, "maximum": 4},
            "n_trials": {"type": "integer", "minimum": 0},
        },
        "required": ["kind", "frequencies", "norms", "k_max"],
        "additionalProperties": False,
    },
    "gauge-sweep": {
        "type": "object",
        "properties": {
            "kind": {"const": "gauge-sweep"},
            "seed": {"type": "integer"},
            "band": {"type": "array", "items": {"type": "number"},
                     "minItems": 2, "maxItems": 2},
            "h_values": {"type": "array",
                         "items": {"type": "number", "exclusiveMinimum": 0},
                         "minItems": 1},
            "theta": {"type": "number", "exclusiveMinimum": 0},
            "amplitude": {"type": "number"},
            "n_trunc": {"type": "integer", "minimum": 1},
            "box_multiple": {"type": "integer", "minimum": 1},
        },
        "required": ["kind", "band", "h_values"],
        "additionalProperties": False,
    },
    "embed": {
        "type": "object",
        "properties": {
            "kind": {"const": "embed"},
            "seed": {"type": "integer"},
            "kappas": {"type": "array",
                       "items": {"type": "number", "exclusiveMinimum": 0},
                       "minItems": 1},
            "m_max": {"type": "integer", "minimum": 1, "maximum": 3},
            "grid_length": {"type": "number", "exclusiveMinimum": 0},
            "eigencheck_n": {"type": "integer", "minimum": 64},
        },
        "required": ["kind", "kappas"],
        "additionalProperties": False,
    },
    "kernel-sweep": {
        "type": "object",
        "properties": {
            "kind": {"const": "kernel-sweep"},
            "seed": {"type": "integer"},
            "potential": _POTENTIAL_SCHEMA,
            "half_width": {"type": "number", "exclusiveMinimum": 0},
            "n_points": {"type": "integer", "minimum": 64},
            "lam": {
                "type": "object",
                "properties": {
                    "lo": {"type": "number", "exclusiveMinimum": 0},
                    "hi": {"type": "number", "exclusiveMinimum": 0},
                    "count": {"type": "integer", "minimum": 2},
                },
                "required": ["lo", "hi", "count"],
                "additionalProperties": False,
            },
            "pairs": {"type": "array",
                      "items": {"type": "array",
                                "items": {"type": "number"},
                                "minItems": 2, "maxItems": 2},
                      "minItems": 1},
        },
        "required": ["kind", "potential", "half_width", "n_points", "lam",
                     "pairs"],
        "additionalProperties": False,
    },
    "fit": {
        "type": "object",
        "properties": {
            "kind": {"const": "fit"},
            "seed": {"type": "integer"},
            "potential": _POTENTIAL_SCHEMA,
            "half_width": {"type": "number", "exclusiveMinimum": 0},
            "n_points": {"type": "integer", "minimum": 64},
            "lam": {
                "type": "object",
                "properties": {
                    "lo": {"type": "number", "exclusiveMinimum": 0},
                    "hi": {"type": "number", "exclusiveMinimum": 0},
                    "count": {"type": "integer", "minimum": 10},
                },
                "required": ["lo", "hi", "count"],
                "additionalProperties": False,
            },
            "pair": {"type": "array", "items": {"type": "number"},
                     "minItems": 2, "maxItems": 2},
            "model": {"enum": ["diagonal", "offdiagonal"]},
            "order": {"type": "integer", "minimum": 0, "maximum": 3},
        },
        "required": ["kind", "potential", "half_width", "n_points", "lam",
                     "pair", "model", "order"],
        "additionalProperties": False,
    },
    "wave-vs-eig": {
        "type": "object",
        "properties": {
            "kind": {"const": "wave-vs-eig"},
            "seed": {"type": "integer"},
            "potential": _POTENTIAL_SCHEMA,
            "half_width": {"type": "number", "exclusiveMinimum": 0},
            "n_points": {"type": "integer", "minimum": 64},
            "h": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
            "energy": {"type": "number"},
            "rho": {
                "type": "object",
                "properties": {
                    "t_flat": {"type": "number", "exclusiveMinimum": 0},
                    "t_support": {"type": "number", "exclusiveMinimum": 0},
                },
                "required": ["t_flat", "t_support"],
                "additionalProperties": False,
            },
            "psi": {
                "type": "object",
                "properties": {
                    "flat": {"type": "number", "exclusiveMinimum": 0},
                    "support": {"type": "number", "exclusiveMinimum": 0},
                },
                "required": ["flat", "support"],
                "additionalProperties": False,
            },
            "pairs": {"type": "array",
                      "items": {"type": "array", "items": {"type": "number"},
                                "minItems": 2, "maxItems": 2},
                      "minItems": 1},
        },
        "required": ["kind", "potential", "half_width", "n_points", "h",
                     "energy", "rho", "psi", "pairs"],
        "additionalProperties": False,
    },
}


def _json_text(doc) -> str:
    return json.dumps(doc, sort_keys=True, indent=1)


def _canonical_float(x):
    return float(format(float(x), ".17g"))


def make_potential(spec: dict):
    """Callable potential from the small config dialect."""
    kind = spec["kind"]
    if kind == "zero":
        return None
    if kind == "bump":
        amp = spec.get("amplitude", 1.0)
        width = spec.get("width", 1.0)
        center = spec.get("center", 0.0)
        return lambda x: amp * np.exp(-((x - center) / width) ** 2)
    if kind == "cosine":
        amp = spec.get("amplitude", 1.0)
        freq = spec.get("frequency", 1.0)
        return lambda x: amp * np.cos(freq * x)
    if kind == "quasiperiodic":
        freqs = np.asarray(spec["frequencies"], dtype=float)
        amps = np.asarray(spec.get("amplitudes", np.ones(freqs.size)),
                          dtype=float)
        width = spec.get("envelope_width")

        def qp(x):
            x = np.asarray(x, dtype=float)
            out = np.zeros_like(x)
            for a, f in zip(amps, freqs):
                out = out + a * np.cos(f * x)
            if width is not None:
                out = out * np.exp(-(x / width) ** 2)
            return out
        return qp
    raise ValueError(f"unknown potential kind {kind!r}")


def validate_config(config: dict) -> None:
    if not isinstance(config, dict) or "kind" not in config:
        raise jsonschema.ValidationError("config must carry a 'kind' field")
    kind = config["kind"]
    if kind not in SCHEMAS:
        raise jsonschema.ValidationError(
            f"unknown kind {kind!r}; choose from {', '.join(KINDS)}")
    jsonschema.validate(config, SCHEMAS[kind])
    if kind in ("kernel-sweep", "fit"):
        if config["lam"]["hi"] <= config["lam"]["lo"]:
            raise jsonschema.ValidationError("lam.hi must exceed lam.lo")
    if kind == "weights" and len(config["norms"]) != len(config["frequencies"]):
        raise jsonschema.ValidationError(
            "norms and frequencies must have equal length")
    if kind == "gauge-sweep":
        a, b = config["band"]
        if not 0 < a < b:
            raise jsonschema.ValidationError("band must satisfy 0 < a < b")


# ---------------------------------------------------------------------------
# experiment bodies (each returns {artifact_name: text_or_bytes})


def _run_diophantine(cfg, rng):
    from .freqsets import diophantine_constant

    c, witness = diophantine_constant(cfg["omega"], cfg["n_max"], cfg["mu"])
    report = {
        "constant": _canonical_float(c),
        "witness": list(witness),
        "omega": cfg["omega"],
        "n_max": cfg["n_max"],
        "mu": cfg["mu"],
        "norm_convention": "euclidean",
    }
    return {"report.json": _json_text(report)}


def _run_weights(cfg, rng):
    from .weights import (SeminormTable, partial_sum_table, check_basic_bound)

    table = SeminormTable(np.asarray(cfg["frequencies"], dtype=float),
                          np.asarray(cfg["norms"], dtype=float))
    report = partial_sum_table(table, cfg["k_max"])
    out = {"partial_sums.csv": report.to_csv()}
    n_trials = cfg.get("n_trials", 0)
    if n_trials:
        nz = table.thetas[np.abs(table.thetas) > 1e-12]
        tuples = [tuple(rng.choice(nz, size=rng.integers(1, cfg["k_max"] + 1)))
                  for _ in range(n_trials)]
        chk = check_basic_bound(tuples, table)
        out["basic_bound.json"] = _json_text({
            "passed": chk.passed,
            "n_instances": chk.n_instances,
            "c_by_k": {str(k): _canonical_float(v)
                       for k, v in sorted(chk.c_by_k.items())},
            "witness": [_canonical_float(t) for t in chk.witness],
        })
    return out


def _run_gauge_sweep(cfg, rng):
    from scipy import stats
    from .families import CoefficientFamily
    from .gauge import gauge_step, default_grid

    band = tuple(cfg["band"])
    theta = cfg.get("theta", 1.0)
    amp = cfg.get("amplitude", 1.0)
    rows = []
    for h in cfg["h_values"]:
        grid = default_grid(h, band, cfg.get("box_multiple", 6))
        xi = np.linspace(-1.6 * band[1], 1.6 * band[1], 161)
        fam = CoefficientFamily.from_x_profiles(
            {theta: lambda x: amp + 0.0 * x, -theta: lambda x: amp + 0.0 * x},
            grid.x, xi)
        step = gauge_step(fam, band, h, n_trunc=cfg.get("n_trunc", 3),
                          grid=grid)
        rows.append({
            "h": _canonical_float(h),
            "pre": _canonical_float(step.pre_offdiag_norm),
            "post": _canonical_float(step.residual_offdiag_norm),
            "total_post": _canonical_float(step.total_offdiag_norm),
            "n_points": step.meta["n_points"],
        })
    hs = [r["h"] for r in rows]
    posts = [r["post"] for r in rows]
    slope = float("nan")
    if len(rows) >= 2 and all(p > 0 for p in posts):
        slope = float(stats.linregress(np.log(hs), np.log(posts)).slope)
    doc = {"band": list(band), "theta": theta, "rows": rows,
           "post_slope": _canonical_float(slope)}
    csv_lines = ["h,pre_offdiag,residual_offdiag,total_offdiag"]
    for r in rows:
        csv_lines.append(f"{r['h']:.17g},{r['pre']:.17g},"
                         f"{r['post']:.17g},{r['total_post']:.17g}")
    return {"gauge_sweep.json": _json_text(doc),
            "gauge_sweep.csv": "\n".join(csv_lines) + "\n"}


def _run_embed(cfg, rng):
    from .embedded import build_embedded, verify_embedded, halfline_eigenpairs

    L = cfg.get("grid_length", 400.0)
    build = build_embedded(cfg["kappas"], m_max=cfg.get("m_max"),
                           grid_length=L)
    out = {"plan.json": build.plan.to_json(),
           "potential.csv": build.potential_csv()}
    xg = np.linspace(-0.25 * L, 0.25 * L, 2001)
    xig = np.linspace(-1.0, 1.0, 21)
    out["family.bin"] = build.family(xg, xig).to_bytes()
    checks = []
    n_eig = cfg.get("eigencheck_n", 8000)
    for lv, bval in zip(build.plan.levels, build.boundary_values):
        window = ((lv.kappa ** 2) * 0.9, (lv.kappa ** 2) * 1.1)
        energies, _, _ = halfline_eigenpairs(build.potential, L, n_eig, window)
        nearest = float(energies[np.argmin(np.abs(energies - lv.kappa ** 2))]) \
            if energies.size else float("nan")
        rep = verify_embedded(build.potential, lv.kappa, L, phase=lv.phase,
                              fit_window=(2.5 * lv.radius, 0.95 * L))
        checks.append({
            "kappa": _canonical_float(lv.kappa),
            "nearest_energy": _canonical_float(nearest),
            "energy_distance": _canonical_float(abs(nearest - lv.kappa ** 2)),
            "boundary_value": _canonical_float(bval),
            "envelope_exponent": _canonical_float(rep.envelope_exponent),
            "profile_distance_resonant":
                _canonical_float(rep.profile_distance_resonant),
        })
    out["verify.json"] = _json_text({"levels": checks})
    return out


def _operator_from_config(cfg):
    from .spectral import discretize

    W0 = make_potential(cfg["potential"])
    return discretize(W0, None, cfg["half_width"], cfg["n_points"])


def _run_kernel_sweep(cfg, rng):
    from .spectral import eigendecompose, projector_kernel

    op = _operator_from_config(cfg)
    lam = np.linspace(cfg["lam"]["lo"], cfg["lam"]["hi"], cfg["lam"]["count"])
    basis = eigendecompose(op, max_energy=float(lam[-1] ** 2) * 1.1)
    kernel = projector_kernel(basis, lam, [tuple(p) for p in cfg["pairs"]])
    meta = {"trust_ceiling": _canonical_float(op.trust_ceiling),
            "op_hash": op.content_hash(),
            "pairs_snapped": [[_canonical_float(a), _canonical_float(b)]
                              for a, b in kernel.pairs]}
    return {"kernel.csv": kernel.to_csv(), "meta.json": _json_text(meta)}


def _run_fit(cfg, rng):
    from .spectral import eigendecompose, projector_kernel
    from .asymptotics import fit_offdiagonal, fit_diagonal, remainder_order

    op = _operator_from_config(cfg)
    lam = np.linspace(cfg["lam"]["lo"], cfg["lam"]["hi"], cfg["lam"]["count"])
    basis = eigendecompose(op, max_energy=float(lam[-1] ** 2) * 1.1)
    kernel = projector_kernel(basis, lam, [tuple(cfg["pair"])])
    if cfg["model"] == "diagonal":
        fit = fit_diagonal(kernel, cfg["order"])
    else:
        fit = fit_offdiagonal(kernel, cfg["order"])
    rem = remainder_order(fit)
    doc = json.loads(fit.to_json())
    doc["remainder"] = {"slope": _canonical_float(rem.slope),
                        "saturated": rem.saturated}
    doc["trust_ceiling"] = _canonical_float(op.trust_ceiling)
    return {"fit.json": _json_text(doc)}


def _run_wave_vs_eig(cfg, rng):
    from .spectral import (eigendecompose, SmoothingSpec, BandSpec,
                           smoothed_projector_eigen, smoothed_projector_wave)

    op = _operator_from_config(cfg)
    basis = eigendecompose(op)
    rho = SmoothingSpec(cfg["rho"]["t_flat"], cfg["rho"]["t_support"])
    psi = BandSpec(cfg["psi"]["flat"], cfg["psi"]["support"])
    pairs = [tuple(p) for p in cfg["pairs"]]
    eig = smoothed_projector_eigen(basis, op, cfg["energy"], cfg["h"], rho,
                                   psi, pairs)
    wave = smoothed_projector_wave(op, cfg["energy"], cfg["h"], rho, psi,
                                   pairs)
    ev = np.real(eig.values[0])
    wv = np.real(wave.values[0])
    rel = np.abs(wv - ev) / np.maximum(np.abs(ev), 1e-300)
    doc = {
        "pairs": [[_canonical_float(a), _canonical_float(b)]
                  for a, b in eig.pairs],
        "eigen": [_canonical_float(v) for v in ev],
        "wave": [_canonical_float(v) for v in wv],
        "relative_difference": [_canonical_float(v) for v in rel],
        "h": cfg["h"], "energy": cfg["energy"],
    }
    return {"compare.json": _json_text(doc)}


_RUNNERS = {
    "diophantine": _run_diophantine,
    "weights": _run_weights,
    "gauge-sweep": _run_gauge_sweep,
    "embed": _run_embed,
    "kernel-sweep": _run_kernel_sweep,
    "fit": _run_fit,
    "wave-vs-eig": _run_wave_vs_eig,
}


def run(config: dict, out_dir) -> list[str]:
    """Validate, execute, write artifacts plus a manifest; returns the
    artifact names."""
    validate_config(config)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(config.get("seed", 0))
    started = time.monotonic()
    artifacts = _RUNNERS[config["kind"]](config, rng)
    for name, payload in artifacts.items():
        path = out / name
        if isinstance(payload, bytes):
            path.write_bytes(payload)
        else:
            path.write_text(payload)
    manifest = {
        "kind": config["kind"],
        "config_sha256": hashlib.sha256(
            json.dumps(config, sort_keys=True).encode()).hexdigest(),
        "artifacts": sorted(artifacts),
        "package": "speclab " + metadata.version("speclab"),
        "numpy": np.__version__,
        "wall_time_s": time.monotonic() - started,
    }
    (out / "manifest.json").write_text(_json_text(manifest))
    return sorted(artifacts)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="speclab", description="batch experiment driver")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config", type=Path)
    p_run.add_argument("--out", type=Path, default=Path("speclab-out"))
    p_val = sub.add_parser("validate", help="check a config against its schema")
    p_val.add_argument("config", type=Path)
    p_sch = sub.add_parser("schema", help="print the JSON schema of a kind")
    p_sch.add_argument("experiment_kind", choices=KINDS)
    args = parser.parse_args(argv)

    if args.command == "schema":
        print(_json_text(SCHEMAS[args.experiment_kind]))
        return 0

    try:
        config = json.loads(args.config.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": "unreadable config", "detail": str(exc)}))
        return 2

    if args.command == "validate":
        try:
            validate_config(config)
        except jsonschema.ValidationError as exc:
            print(json.dumps({"error": "invalid config",
                              "field": list(exc.absolute_path),
                              "detail": exc.message}))
            return 2
        print(json.dumps({"ok": True, "kind": config["kind"]}))
        return 0

    try:
        validate_config(config)
    except jsonschema.ValidationError as exc:
        print(json.dumps({"error": "invalid config",
                          "field": list(exc.absolute_path),
                          "detail": exc.message}))
        return 2
    names = run(config, args.out)
    print(json.dumps({"ok": True, "artifacts": names,
                      "out": str(args.out)}))
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: ``latqm <subcommand> [--key value ...]``.

Every run writes its data files plus ``manifest.json`` (resolved config,
result summary, per-phase wall-clock) into the output directory, taken from
``--output-dir``, then ``$LATQM_OUTPUT_DIR``, then ``./latqm-out``.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
import time
from contextlib import contextmanager
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from latqm import kernels, operators, scattering
from latqm._io import atomic_write_json, atomic_write_text, fmt, round_floats
from latqm.errors import InvalidArgument, NumericalInstability, ResourceLimit
from latqm.lattice import Lattice, gaussian_packet

EXIT_OK, EXIT_USAGE, EXIT_UNSTABLE, EXIT_IO = 0, 2, 3, 4
OUTPUT_ENV = "LATQM_OUTPUT_DIR"


class UsageError(Exception):
    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


def _bool(text):
    if isinstance(text, bool):
        return text
    lowered = str(text).strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(value):
    if isinstance(value, bool):
        raise ValueError("booleans are not integers")
    if isinstance(value, float) and not value.is_integer():
        raise ValueError(f"not an integer: {value!r}")
    return int(str(value)) if not isinstance(value, (int, float)) else int(value)


def _float(value):
    if isinstance(value, bool):
        raise ValueError("booleans are not numbers")
    return float(value)


def _optional_int(value):
    if value is None or str(value).lower() in ("none", "null", "auto"):
        return None
    return _int(value)


def _int_list(value):
    if isinstance(value, (list, tuple)):
        return [_int(v) for v in value]
    if isinstance(value, int) and not isinstance(value, bool):
        return [value]
    return [_int(v) for v in str(value).split(",") if v.strip()]


_SCATTER_TYPES = {
    "N": _int, "ell": _float, "k0": _float, "sigma_over_ell": _float, "E0_over_U": _float,
    "W_over_ell": _int, "dtau": _float, "kernel": str, "integrator": str,
    "barrier_left": _optional_int, "x0_over_ell": _float, "t_max": _float,
    "sample_interval": _float, "engine": str, "closed_barrier": _bool,
}

SCHEMAS = {
    "dispersion": {"kernel": (str, "central"), "N": (_int, 500), "ell": (_float, 1.0)},
    "scatter": {
        f.name: (_SCATTER_TYPES[f.name], f.default) for f in fields(scattering.ScatterParams)
    },
    "commutator": {"N": (_int_list, [8]), "sigma_fraction": (_float, 0.03)},
    "hop": {"N": (_int, 500), "dtau": (_float, 1e-3), "rows": (_int, 50)},
    "kernel-dump": {"kernel": (str, "exact-truncated"), "N": (_int, 500),
                    "ell": (_float, 1.0), "m_max": (_optional_int, None)},
    "derivative-check": {"N": (_int, 500), "sigma_over_ell": (_float, 15.0),
                         "k0": (_float, math.pi / 6), "m_max": (_optional_int, None)},
}


@dataclass
class RunConfig:
    subcommand: str
    parameters: dict
    output_dir: str
    seed: int = 0
    sources: dict = field(default_factory=dict)
    overrides: dict = field(default_factory=dict)
    config_file: str | None = None

    def resolved(self) -> dict:
        return {"subcommand": self.subcommand, "parameters": self.parameters,
                "seed": self.seed, "output_dir": self.output_dir}


def _load_file(path):
    try:
        with open(path) as fh:
            data = yaml.safe_load(fh) or {}
    except yaml.YAMLError as exc:
        raise UsageError(f"cannot parse config file {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise UsageError(f"config file {path} must hold a mapping of keys")
    if "config" in data and isinstance(data["config"], dict):  # a manifest
        data = data["config"]
    return data


def _split_flags(argv):
    """Turn ``--key value`` pairs into a dict, preserving the raw strings."""
    flags = {}
    it = iter(argv)
    for token in it:
        if not token.startswith("--"):
            raise UsageError(f"expected --key value, got {token!r}")
        key = token[2:].replace("-", "_")
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            try:
                value = next(it)
            except StopIteration:
                raise UsageError(f"flag --{key} needs a value", key) from None
        flags[key] = value
    return flags


def _coerce(subcommand, key, value):
    schema = SCHEMAS[subcommand]
    if key not in schema:
        raise UsageError(f"unknown key {key!r} for {subcommand}", key)
    convert = schema[key][0]
    try:
        return convert(value)
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad value for {key!r}: {value!r} ({exc})", key) from None


def _validate(subcommand, params):
    def check(key, fn):
        try:
            fn()
        except (InvalidArgument, ResourceLimit, ValueError) as exc:
            raise UsageError(f"invalid {key!r}: {exc}", key) from None

    if subcommand == "commutator":
        for n in params["N"]:
            check("N", lambda n=n: Lattice(n))
            if n > operators.MAX_IDENTITY_N:
                raise UsageError(f"invalid 'N': {n} exceeds {operators.MAX_IDENTITY_N}", "N")
        return
    check("N", lambda: Lattice(params["N"]))
    if "ell" in params:
        check("ell", lambda: Lattice(params["N"], params["ell"]))
    if "kernel" in params:
        check("kernel", lambda: kernels.Variant(params["kernel"]))
    if subcommand == "scatter":
        check("parameters", lambda: scattering.ScatterParams(**params).build())
    if subcommand == "hop" and not 0 < params["dtau"] <= 0.01:
        raise UsageError("invalid 'dtau': must lie in (0, 0.01]", "dtau")


def parse_config(argv, config_file=None, env=None) -> RunConfig:
    """Resolve defaults < config file < flags into a validated RunConfig."""
    env = os.environ if env is None else env
    if not argv:
        raise UsageError(f"missing subcommand; choose from {sorted(SCHEMAS)}")
    subcommand, rest = argv[0], list(argv[1:])
    if subcommand not in SCHEMAS:
        raise UsageError(f"unknown subcommand {subcommand!r}; choose from {sorted(SCHEMAS)}")
    flags = _split_flags(rest)
    config_file = flags.pop("config", config_file)

    meta = {"output_dir": env.get(OUTPUT_ENV, "latqm-out"), "seed": 0}
    params = {k: v[1] for k, v in SCHEMAS[subcommand].items()}
    sources = {k: "default" for k in params}
    overrides = {}

    file_values = {}
    if config_file is not None:
        data = dict(_load_file(config_file))
        file_sub = data.pop("subcommand", subcommand)
        if file_sub != subcommand:
            raise UsageError(f"config file is for {file_sub!r}, not {subcommand!r}", "subcommand")
        nested = data.pop("parameters", None)
        if isinstance(nested, dict):
            data.update(nested)
        for key in ("output_dir", "seed"):
            if key in data:
                meta[key] = data.pop(key)
        for key, value in data.items():
            file_values[key] = _coerce(subcommand, key, value)
            params[key] = file_values[key]
            sources[key] = "file"

    for key in ("output_dir", "seed"):
        if key in flags:
            meta[key] = flags.pop(key)
    for key, raw in flags.items():
        value = _coerce(subcommand, key, raw)
        if key in file_values:
            overrides[key] = {"file": file_values[key], "flag": value}
        params[key] = value
        sources[key] = "flag"

    try:
        seed = _int(meta["seed"])
    except (TypeError, ValueError):
        raise UsageError(f"bad value for 'seed': {meta['seed']!r}", "seed") from None
    _validate(subcommand, params)
    return RunConfig(subcommand, params, str(meta["output_dir"]), seed, sources,
                     overrides, None if config_file is None else str(config_file))


# --- subcommands ---------------------------------------------------------------

class Timer:
    def __init__(self):
        self.phases = {}

    @contextmanager
    def phase(self, name):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.phases[name] = self.phases.get(name, 0.0) + time.perf_counter() - start


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _run_dispersion(cfg, timer, out):
    p = cfg.parameters
    lat = Lattice(p["N"], p["ell"])
    kernel = kernels.build_kernel(p["kernel"], lat)
    with timer.phase("kernel_apply"):
        k = lat.k[lat.k >= 0]
        eps_kernel = kernels.dispersion(kernel, k)
        eps_exact = kernels.free_energy(lat, k)
        with np.errstate(invalid="ignore", divide="ignore"):
            rel = np.where(eps_exact > 0, np.abs(eps_kernel - eps_exact) / eps_exact, 0.0)
    rows = [[fmt(a), fmt(b), fmt(c), fmt(d)] for a, b, c, d in zip(k, eps_exact, eps_kernel, rel)]
    text = _csv(("k", "eps_exact", "eps_kernel", "rel_err"), rows)
    atomic_write_text(out / "dispersion.csv", text)
    above = k[rel > 0.01]
    threshold = float(above[0] * lat.ell) if above.size else None
    return text, {"first_k_ell_above_1pct": threshold}, "n/a"


def _run_scatter(cfg, timer, out):
    params = scattering.ScatterParams(**cfg.parameters)
    lat, kernel, barrier, packet, evo = params.build()
    with timer.phase("kernel_apply"):
        result = scattering.run_scattering(lat, kernel, barrier, packet, evo,
                                           t_max=params.t_max, with_theory=False)
    with timer.phase("theory"):
        result.theory = scattering.theory_transmission(packet, barrier, lat)
    summary = result.summary()
    atomic_write_json(out / "result.json", summary)
    scattering.emit_profile(result, out / "profile.csv")
    atomic_write_text(out / "samples.csv", scattering.samples_csv(result))
    text = json.dumps(round_floats(summary), indent=2, sort_keys=True) + "\n"
    summary = dict(summary, stop_reason=result.stop_reason)
    return text, summary, result.engine


def _run_commutator(cfg, timer, out):
    lines = ["N max_deviation_identity diag_norm smooth_residual"]
    results = []
    rng = np.random.default_rng(cfg.seed)
    for N in cfg.parameters["N"]:
        lat = Lattice(N)
        with timer.phase("kernel_apply"):
            report = operators.verify_commutator_identity(lat)
            sigma = max(cfg.parameters["sigma_fraction"] * N, 0.5)
            psi = gaussian_packet(lat, 0.0, 0.0, sigma)
            residual = operators.smooth_commutator_action(psi)
            # random-state check of anti-Hermiticity of [X, P]
            C = operators.commutator(operators.build_position(lat), operators.build_momentum(lat))
            v = rng.normal(size=N) + 1j * rng.normal(size=N)
            herm = abs(np.vdot(v, C.entries @ v).real) / np.vdot(v, v).real
        lines.append(f"{N} {fmt(report.max_deviation)} {fmt(report.diag_norm)} {fmt(residual)}")
        results.append({"N": N, "max_deviation_identity": report.max_deviation,
                        "diag_norm": report.diag_norm, "smooth_residual": residual,
                        "random_state_real_part": herm})
    text = "\n".join(lines) + "\n"
    atomic_write_text(out / "commutator.txt", text)
    return text, {"rows": results}, "dense"


def _run_hop(cfg, timer, out):
    p = cfg.parameters
    lat = Lattice(p["N"])
    with timer.phase("kernel_apply"):
        stats = scattering.hop_statistics(lat, p["dtau"])
        product = scattering.uncertainty_product(lat, p["dtau"])
    keep = (stats.m > 0) & (stats.m <= p["rows"])
    rows = [[int(m), fmt(a), fmt(b)] for m, a, b in
            zip(stats.m[keep], stats.measured[keep], stats.predicted[keep])]
    text = _csv(("m", "measured_prob", "predicted_prob"), rows)
    atomic_write_text(out / "hop.csv", text)
    summary = {
        "uncertainty_product": product,
        "pi_over_sqrt3": math.pi / math.sqrt(3),
        "exceeds_half_bound": product > 0.5,
        "mean_sq_raw": stats.mean_sq_raw,
        "mean_sq_conditional": stats.mean_sq_conditional,
        "mean_sq_infinite_lattice": stats.mean_sq_infinite_lattice,
    }
    return text, summary, "direct"


def _run_kernel_dump(cfg, timer, out):
    p = cfg.parameters
    lat = Lattice(p["N"], p["ell"])
    with timer.phase("kernel_apply"):
        kernel = kernels.build_kernel(p["kernel"], lat, p["m_max"])
        m, c = kernel.hops()
    text = _csv(("m", "c_m"), [[int(a), fmt(b)] for a, b in zip(m, c)])
    atomic_write_text(out / "kernel.csv", text)
    return text, {"variant": kernel.variant.value, "m_max": kernel.m_max}, "n/a"


def _run_derivative(cfg, timer, out):
    p = cfg.parameters
    lat = Lattice(p["N"])
    sigma = p["sigma_over_ell"] * lat.ell
    with timer.phase("kernel_apply"):
        psi = gaussian_packet(lat, 0.0, p["k0"], sigma)
        d = operators.discrete_derivative(psi, p["m_max"]).amplitudes
    x = lat.x
    exact = psi.amplitudes * (-x / (2 * sigma**2) + 1j * p["k0"])
    err = np.abs(d - exact) / np.max(np.abs(exact))
    near = np.abs(x) <= lat.L / 4
    summary = {"max_rel_error_near_packet": float(err[near].max()),
               "max_rel_error_full_ring": float(err.max())}
    atomic_write_json(out / "derivative.json", summary)
    return json.dumps(round_floats(summary), indent=2, sort_keys=True) + "\n", summary, "direct"


RUNNERS = {
    "dispersion": _run_dispersion,
    "scatter": _run_scatter,
    "commutator": _run_commutator,
    "hop": _run_hop,
    "kernel-dump": _run_kernel_dump,
    "derivative-check": _run_derivative,
}


def write_manifest(cfg: RunConfig, results: dict, timings: dict, engine: str = "n/a") -> Path:
    # the config keeps full precision so that rerunning from the manifest is exact
    manifest = {
        "config": cfg.resolved(),
        "sources": cfg.sources,
        "overrides": cfg.overrides,
        "config_file": cfg.config_file,
        "results": round_floats(results),
        "timings": round_floats(timings),
        "engine": engine,
    }
    text = json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    return atomic_write_text(Path(cfg.output_dir) / "manifest.json", text)


def dispatch(cfg: RunConfig, stdout=None) -> int:
    stdout = sys.stdout if stdout is None else stdout
    out = Path(cfg.output_dir)
    timer = Timer()
    with timer.phase("total"):
        text, results, engine = RUNNERS[cfg.subcommand](cfg, timer, out)
    write_manifest(cfg, results, timer.phases, engine)
    stdout.write(text)
    return EXIT_OK


def _fail(code, kind, message, stream, key=None):
    payload = {"error": kind, "message": str(message), "exit_code": code}
    if key is not None:
        payload["key"] = key
    stream.write(json.dumps(payload) + "\n")
    return code


def main(argv=None, stdout=None, stderr=None) -> int:
    stderr = sys.stderr if stderr is None else stderr
    argv = sys.argv[1:] if argv is None else list(argv)
    if argv and argv[0] in ("-h", "--help"):
        (stdout or sys.stdout).write(
            "usage: latqm {" + ",".join(SCHEMAS) + "} [--config FILE] [--key value ...]\n"
        )
        return EXIT_OK
    try:
        cfg = parse_config(argv)
        return dispatch(cfg, stdout)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", exc, stderr, exc.key)
    except InvalidArgument as exc:
        return _fail(EXIT_USAGE, "invalid-argument", exc, stderr)
    except NumericalInstability as exc:
        return _fail(EXIT_UNSTABLE, "numerical-instability", exc, stderr)
    except OSError as exc:
        return _fail(EXIT_IO, "io", exc, stderr)


if __name__ == "__main__":
    sys.exit(main())

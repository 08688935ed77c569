"""Command-line front end: configs, parameter sweeps, reference checks.

Config grammar
--------------
One ``key = value`` per line; blank lines and ``#`` comments (full-line
or trailing) are ignored; values may be quoted.  Frequencies are given
in MHz (converted to angular rad/us internally), durations in us.

Device keys
    omega_r_mhz, omega_ge_mhz, g_ef_mhz, j_mhz       (required)
    kappa_mhz                  symmetric coupling, sets kappa1 = kappa2
    kappa1_mhz, kappa2_mhz     asymmetric alternative to kappa_mhz
    g_ge_mhz                   optional, default g_ef/sqrt(2)
    n_res                      odd chain length, default 7
    gamma_res_mhz, tau_coh_us  loss/coherence figures, diagnostics only

Pulse and grid keys
    tau_p_us                   pulse duration (required)
    omega0_mhz                 carrier, default omega_r_mhz
    grid_halfwidth             spectral window in units of 1/tau_p, default 40
    grid_points                minimum grid size, default 4001
    (the window is always widened by the chain bandwidth 2J, and the
    point count raised if needed to keep the spacing below gamma_0/8)

Sweep keys
    sweep.axis1 = "kappa_mhz: 5, 50, 46"        name: start, stop, points
    sweep.axis2 = "..."                          optional second axis
    sweep.optimize_kappa = "15, 45, 25"          per-point argmax over
                                                 symmetric kappa (MHz)
    sweep.outputs = "C, upsilon"                 column subset, default all

Axis names: kappa_mhz, kappa1_mhz, kappa2_mhz, j_mhz, g_ef_mhz,
g_ge_mhz, tau_p_us, omega0_mhz, n_res, gamma_res_mhz.

Determinism
-----------
Identical config files produce byte-identical output: no timestamps
anywhere, rows in axis-major order, a fixed chunking policy for the
batched integrator that does not depend on ``--jobs``, and every point
evaluated in a worker process regardless of parallelism so the
numerical environment is the same for serial and parallel runs.

Exit codes: 0 success, 1 config error, 2 any per-point failure or
failed check.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import __version__
from .model import (DetuningTooSmall, DeviceParams, derive_operating_point,
                    from_mhz, passband_diagnostics, to_mhz, validity_summary)
from .observables import contrast_and_upsilon, scattering_batch
from .oracle import oracle_scattering
from .pulse import Pulse, SpectralGrid

__all__ = [
    "ConfigError",
    "SweepAxis",
    "SweepSpec",
    "parse_config",
    "resolve_point_config",
    "build_point",
    "run_sweep",
    "main",
]


class ConfigError(ValueError):
    """Malformed or inconsistent configuration input."""


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------

_DEVICE_KEYS = ("omega_r_mhz", "omega_ge_mhz", "g_ef_mhz", "g_ge_mhz",
                "j_mhz", "kappa_mhz", "kappa1_mhz", "kappa2_mhz",
                "n_res", "gamma_res_mhz", "tau_coh_us")
_PULSE_KEYS = ("tau_p_us", "omega0_mhz", "grid_halfwidth", "grid_points")
_SWEEP_KEYS = ("sweep.axis1", "sweep.axis2", "sweep.optimize_kappa",
               "sweep.outputs")
_KNOWN_KEYS = frozenset(_DEVICE_KEYS + _PULSE_KEYS + _SWEEP_KEYS)

_AXIS_NAMES = ("kappa_mhz", "kappa1_mhz", "kappa2_mhz", "j_mhz",
               "g_ef_mhz", "g_ge_mhz", "tau_p_us", "omega0_mhz",
               "n_res", "gamma_res_mhz")

_OUTPUT_COLUMNS = ("T_g", "T_e", "R_g", "R_e", "C",
                   "upsilon_g", "upsilon_e", "upsilon")

_MAX_GRID_POINTS = 1_000_000


def parse_config(text: str) -> dict[str, str]:
    """Parse ``key = value`` lines into a raw string mapping."""
    cfg: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.split("#", 1)[0].strip()
        if len(value) >= 2 and value[0] == value[-1] and value[0] in "\"'":
            value = value[1:-1].strip()
        if not key or not value:
            raise ConfigError(f"line {lineno}: empty key or value")
        if key not in _KNOWN_KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in cfg:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        cfg[key] = value
    return cfg


def _as_float(cfg: dict[str, str], key: str) -> float:
    try:
        v = float(cfg[key])
    except ValueError:
        raise ConfigError(f"{key}: not a number: {cfg[key]!r}") from None
    if not math.isfinite(v):
        raise ConfigError(f"{key}: must be finite")
    return v


def _as_int(cfg: dict[str, str], key: str) -> int:
    v = _as_float(cfg, key)
    if v != int(v):
        raise ConfigError(f"{key}: must be an integer, got {cfg[key]!r}")
    return int(v)


def resolve_point_config(cfg: dict[str, str]) -> dict:
    """Validate scalar keys and fill defaults; returns the point config.

    The result is a flat dict in config-key space (frequencies still
    in MHz) that :func:`build_point` or a sweep override can consume.
    """
    for key in ("omega_r_mhz", "omega_ge_mhz", "g_ef_mhz", "j_mhz", "tau_p_us"):
        if key not in cfg:
            raise ConfigError(f"missing required key {key}")
    if "kappa_mhz" in cfg:
        if "kappa1_mhz" in cfg or "kappa2_mhz" in cfg:
            raise ConfigError(
                "give kappa_mhz or kappa1_mhz/kappa2_mhz, not both")
        kappa = _as_float(cfg, "kappa_mhz")
        k1, k2 = kappa, kappa
    elif "kappa1_mhz" in cfg and "kappa2_mhz" in cfg:
        k1 = _as_float(cfg, "kappa1_mhz")
        k2 = _as_float(cfg, "kappa2_mhz")
    else:
        raise ConfigError("missing kappa_mhz (or kappa1_mhz and kappa2_mhz)")

    point = {
        "omega_r_mhz": _as_float(cfg, "omega_r_mhz"),
        "omega_ge_mhz": _as_float(cfg, "omega_ge_mhz"),
        "g_ef_mhz": _as_float(cfg, "g_ef_mhz"),
        "g_ge_mhz": _as_float(cfg, "g_ge_mhz") if "g_ge_mhz" in cfg else None,
        "j_mhz": _as_float(cfg, "j_mhz"),
        "kappa1_mhz": k1,
        "kappa2_mhz": k2,
        "n_res": _as_int(cfg, "n_res") if "n_res" in cfg else 7,
        "gamma_res_mhz": _as_float(cfg, "gamma_res_mhz")
        if "gamma_res_mhz" in cfg else 0.0,
        "tau_coh_us": _as_float(cfg, "tau_coh_us")
        if "tau_coh_us" in cfg else math.inf,
        "tau_p_us": _as_float(cfg, "tau_p_us"),
        "omega0_mhz": _as_float(cfg, "omega0_mhz")
        if "omega0_mhz" in cfg else _as_float(cfg, "omega_r_mhz"),
        "grid_halfwidth": _as_float(cfg, "grid_halfwidth")
        if "grid_halfwidth" in cfg else 40.0,
        "grid_points": _as_int(cfg, "grid_points")
        if "grid_points" in cfg else 4001,
    }
    return point


def build_point(point: dict, overrides: dict | None = None
                ) -> tuple[DeviceParams, Pulse, SpectralGrid]:
    """Construct the device, pulse, and spectral grid for one point.

    ``overrides`` uses the same config-key space as the point dict;
    ``kappa_mhz`` sets both couplings.  Raises ValueError (from the
    domain types) or ConfigError on bad values.
    """
    merged = dict(point)
    for key, value in (overrides or {}).items():
        if key == "kappa_mhz":
            merged["kappa1_mhz"] = value
            merged["kappa2_mhz"] = value
        else:
            merged[key] = value
    p = DeviceParams(
        omega_r=from_mhz(merged["omega_r_mhz"]),
        omega_ge=from_mhz(merged["omega_ge_mhz"]),
        g_ef=from_mhz(merged["g_ef_mhz"]),
        J=from_mhz(merged["j_mhz"]),
        kappa_1=from_mhz(merged["kappa1_mhz"]),
        kappa_2=from_mhz(merged["kappa2_mhz"]),
        n_res=int(merged["n_res"]),
        g_ge=None if merged["g_ge_mhz"] is None else from_mhz(merged["g_ge_mhz"]),
        gamma_res=from_mhz(merged["gamma_res_mhz"]),
        tau_coh=merged["tau_coh_us"],
    )
    pulse = Pulse(omega_0=from_mhz(merged["omega0_mhz"]),
                  tau_p=merged["tau_p_us"])
    grid = SpectralGrid.standard(
        pulse,
        halfwidth=merged["grid_halfwidth"],
        points=int(merged["grid_points"]),
        extra_halfwidth=2.0 * p.J,
    )
    return p, pulse, grid


# ---------------------------------------------------------------------------
# sweep specification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepAxis:
    """One swept parameter: a named, ordered value list."""

    name: str
    values: tuple


def _parse_axis(text: str, which: str) -> SweepAxis:
    name, colon, rest = text.partition(":")
    name = name.strip()
    if not colon:
        raise ConfigError(f"{which}: expected 'name: start, stop, points'")
    if name not in _AXIS_NAMES:
        raise ConfigError(
            f"{which}: {name!r} is not sweepable "
            f"(choose from {', '.join(_AXIS_NAMES)})")
    parts = [s.strip() for s in rest.split(",")]
    if len(parts) != 3:
        raise ConfigError(f"{which}: expected 'name: start, stop, points'")
    try:
        start, stop, points = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise ConfigError(f"{which}: bad numbers in {rest!r}") from None
    if not (math.isfinite(start) and math.isfinite(stop)):
        raise ConfigError(f"{which}: range must be finite")
    if start <= 0 or stop <= 0:
        raise ConfigError(f"{which}: range must be positive")
    if points < 1:
        raise ConfigError(f"{which}: points must be >= 1")
    values = np.linspace(start, stop, points)
    if name == "n_res":
        rounded = np.rint(values)
        if np.max(np.abs(values - rounded)) > 1e-9:
            raise ConfigError(
                f"{which}: n_res axis must produce integers "
                "(use e.g. '5, 17, 7')")
        return SweepAxis(name, tuple(int(v) for v in rounded))
    return SweepAxis(name, tuple(float(v) for v in values))


@dataclass(frozen=True)
class SweepSpec:
    """Full sweep description: base point, axes, optional kappa optimizer."""

    point: dict                      # base scalar config
    axes: tuple                      # 0-2 SweepAxis entries
    optimize_kappa: tuple | None     # symmetric-kappa scan values (MHz)
    outputs: tuple = _OUTPUT_COLUMNS

    @classmethod
    def from_config(cls, cfg: dict[str, str]) -> "SweepSpec":
        point = resolve_point_config(cfg)
        axes = []
        if "sweep.axis2" in cfg and "sweep.axis1" not in cfg:
            raise ConfigError("sweep.axis2 given without sweep.axis1")
        for which in ("sweep.axis1", "sweep.axis2"):
            if which in cfg:
                axes.append(_parse_axis(cfg[which], which))
        if len(axes) == 2 and axes[0].name == axes[1].name:
            raise ConfigError("the two sweep axes name the same parameter")

        optimize = None
        if "sweep.optimize_kappa" in cfg:
            for ax in axes:
                if ax.name.startswith("kappa"):
                    raise ConfigError(
                        "sweep.optimize_kappa owns kappa; remove the kappa axis")
            parts = [s.strip() for s in cfg["sweep.optimize_kappa"].split(",")]
            if len(parts) != 3:
                raise ConfigError(
                    "sweep.optimize_kappa: expected 'start, stop, points'")
            try:
                start, stop, points = float(parts[0]), float(parts[1]), int(parts[2])
            except ValueError:
                raise ConfigError("sweep.optimize_kappa: bad numbers") from None
            if start <= 0 or stop <= 0 or points < 1:
                raise ConfigError(
                    "sweep.optimize_kappa: range must be positive, points >= 1")
            optimize = tuple(float(v) for v in np.linspace(start, stop, points))

        outputs = _OUTPUT_COLUMNS
        if "sweep.outputs" in cfg:
            requested = tuple(s.strip() for s in cfg["sweep.outputs"].split(","))
            bad = [c for c in requested if c not in _OUTPUT_COLUMNS]
            if bad:
                raise ConfigError(
                    f"sweep.outputs: unknown column(s) {', '.join(bad)} "
                    f"(choose from {', '.join(_OUTPUT_COLUMNS)})")
            outputs = requested

        total = 1
        for ax in axes:
            total *= len(ax.values)
        if total * (len(optimize) if optimize else 1) > _MAX_GRID_POINTS:
            raise ConfigError(
                f"sweep evaluates {total} grid points; the limit is "
                f"{_MAX_GRID_POINTS}")
        return cls(point=point, axes=tuple(axes), optimize_kappa=optimize,
                   outputs=outputs)

    def grid(self) -> list[dict]:
        """Axis-major list of override dicts, one per grid point."""
        if not self.axes:
            return [{}]
        if len(self.axes) == 1:
            ax = self.axes[0]
            return [{ax.name: v} for v in ax.values]
        a1, a2 = self.axes
        return [{a1.name: v1, a2.name: v2}
                for v1 in a1.values for v2 in a2.values]


# ---------------------------------------------------------------------------
# sweep engine
# ---------------------------------------------------------------------------

# Points are batched into the lock-step integrator in fixed-size chunks.
# The policy is part of the output contract: chunk membership must not
# depend on --jobs, so the chunking is computed up front from the grid
# alone and chunks are the unit of work handed to the pool.
_CHUNK_TRAJECTORIES = 100    # ~50 points x 2 qubit branches


def _chunk_grid(spec: SweepSpec) -> list[list[tuple[int, dict]]]:
    """Split grid points into deterministic batchable chunks.

    Points are grouped by (n_res, tau_p) — members of a batch must
    share the state dimension and the time span — preserving axis-major
    order within each group, then cut into fixed-size chunks.
    """
    per_point = 2 * (len(spec.optimize_kappa) if spec.optimize_kappa else 1)
    chunk_points = max(1, _CHUNK_TRAJECTORIES // per_point)
    groups: dict[tuple, list[tuple[int, dict]]] = {}
    for idx, overrides in enumerate(spec.grid()):
        key = (overrides.get("n_res", spec.point["n_res"]),
               overrides.get("tau_p_us", spec.point["tau_p_us"]))
        groups.setdefault(key, []).append((idx, overrides))
    chunks = []
    for group in groups.values():
        for i in range(0, len(group), chunk_points):
            chunks.append(group[i:i + chunk_points])
    return chunks


def _result_fields(res) -> dict:
    return {
        "T_g": res.T_g, "T_e": res.T_e, "R_g": res.R_g, "R_e": res.R_e,
        "C": res.contrast, "upsilon_g": res.upsilon_g,
        "upsilon_e": res.upsilon_e, "upsilon": res.upsilon,
    }


def _error_text(exc: BaseException) -> str:
    return f"{type(exc).__name__}: {exc}"


def _eval_chunk(payload: tuple) -> list[tuple[int, dict]]:
    """Worker: evaluate one chunk of grid points; never raises per-point."""
    base, chunk, optimize = payload
    rows: dict[int, dict] = {}
    live: list[tuple[int, DeviceParams, Pulse, SpectralGrid]] = []
    for idx, overrides in chunk:
        try:
            p, pulse, grid = build_point(base, overrides)
            derive_operating_point(p)   # fail fast, before batching
        except Exception as exc:
            rows[idx] = {"error": _error_text(exc)}
            continue
        live.append((idx, p, pulse, grid))

    if optimize:
        for idx, p, pulse, grid in live:
            try:
                kappas = [from_mhz(v) for v in optimize]
                pairs = [(replace(p, kappa_1=k, kappa_2=k), pulse)
                         for k in kappas]
                results = scattering_batch(pairs, grids=[grid] * len(pairs))
                best = max(range(len(results)),
                           key=lambda j: results[j].contrast)
                fields = _result_fields(results[best])
                fields["kappa_opt_mhz"] = optimize[best]
                rows[idx] = fields
            except Exception as exc:
                rows[idx] = {"error": _error_text(exc)}
        return sorted(rows.items())

    if live:
        try:
            results = scattering_batch(
                [(p, pulse) for _, p, pulse, _ in live],
                grids=[grid for *_, grid in live])
            for (idx, *_), res in zip(live, results):
                rows[idx] = _result_fields(res)
        except Exception:
            # one member spoiled the batch; isolate it by going point-wise
            for idx, p, pulse, grid in live:
                try:
                    res = scattering_batch([(p, pulse)], grids=[grid])[0]
                    rows[idx] = _result_fields(res)
                except Exception as exc:
                    rows[idx] = {"error": _error_text(exc)}
    return sorted(rows.items())


def run_sweep(spec: SweepSpec, jobs: int = 1,
              annotate_argmax: bool = False) -> tuple[list[str], list[dict]]:
    """Evaluate the sweep grid; returns (columns, rows) in axis-major order.

    Every chunk runs in a worker process even for ``jobs=1`` so that
    serial and parallel sweeps share an identical numerical
    environment and produce identical bytes.  Failed points carry
    their message in the ``error`` field and leave the output columns
    empty; the sweep continues.
    """
    chunks = _chunk_grid(spec)
    payloads = [(spec.point, chunk, spec.optimize_kappa) for chunk in chunks]
    fields_by_idx: dict[int, dict] = {}
    with ProcessPoolExecutor(max_workers=max(1, jobs)) as pool:
        try:
            for chunk_result in pool.map(_eval_chunk, payloads):
                for idx, fields in chunk_result:
                    fields_by_idx[idx] = fields
        except KeyboardInterrupt:
            pool.shutdown(wait=False, cancel_futures=True)
            raise

    columns = [ax.name for ax in spec.axes]
    if spec.optimize_kappa:
        columns.append("kappa_opt_mhz")
    columns += list(spec.outputs)
    if annotate_argmax:
        columns.append("row_max")
    columns.append("error")

    rows = []
    for idx, overrides in enumerate(spec.grid()):
        fields = fields_by_idx.get(idx, {"error": "missing result"})
        row = {ax.name: overrides[ax.name] for ax in spec.axes}
        for col in columns[len(spec.axes):]:
            if col == "error":
                row[col] = fields.get("error", "")
            elif col == "row_max":
                row[col] = 0
            else:
                row[col] = fields.get(col)
        rows.append(row)

    if annotate_argmax and rows:
        # mark the argmax of C within each axis1 block (global for 1 axis)
        block = len(spec.axes[1].values) if len(spec.axes) == 2 else len(rows)
        for start in range(0, len(rows), block):
            best, best_c = None, -math.inf
            for row in rows[start:start + block]:
                c = row.get("C")
                if not row["error"] and c is not None and c > best_c:
                    best, best_c = row, c
            if best is not None:
                best["row_max"] = 1
    return columns, rows


# ---------------------------------------------------------------------------
# output emission
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".12g")


def _meta_lines(command: str, config_sha: str | None) -> list[str]:
    lines = [f"# craswitch {__version__}", f"# command: {command}"]
    if config_sha is not None:
        lines.append(f"# config sha256: {config_sha}")
    return lines


def _emit_csv(stream, meta: list[str], columns: list[str], rows: list[dict]):
    for line in meta:
        stream.write(line + "\n")
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([row[c] if c == "error" else _fmt(row[c])
                         for c in columns])


def _emit_json(stream, meta_obj: dict, columns: list[str], rows: list[dict]):
    doc = {"meta": meta_obj, "columns": columns, "points": rows}
    json.dump(doc, stream, indent=2, allow_nan=True)
    stream.write("\n")


def _open_out(path: str | None):
    if path is None or path == "-":
        return sys.stdout, False
    return open(path, "w", encoding="utf-8", newline=""), True


def _write_table(args, command: str, config_sha: str | None,
                 columns: list[str], rows: list[dict]) -> None:
    stream, close = _open_out(args.out)
    try:
        if args.format == "json":
            meta = {"tool": "craswitch", "version": __version__,
                    "command": command}
            if config_sha is not None:
                meta["config_sha256"] = config_sha
            _emit_json(stream, meta, columns, rows)
        else:
            _emit_csv(stream, _meta_lines(command, config_sha), columns, rows)
    finally:
        if close:
            stream.close()


def _emit_gnuplot(out_path: str, spec: SweepSpec, columns: list[str]) -> str:
    """Write a heatmap script next to a 2-axis sweep CSV."""
    a1, a2 = spec.axes
    c_col = columns.index("C") + 1
    script_path = out_path + ".gp"
    png_path = out_path + ".png"
    lines = [
        f"# craswitch {__version__} heatmap for {out_path}",
        "set datafile separator ','",
        "set key autotitle columnhead",
        f"set dgrid3d {len(a2.values)},{len(a1.values)}",
        "set pm3d map",
        f"set xlabel '{a1.name}'",
        f"set ylabel '{a2.name}'",
        "set cblabel 'C'",
        "set terminal pngcairo size 900,700",
        f"set output '{png_path}'",
        f"splot '{out_path}' using 1:2:{c_col} with pm3d notitle",
        "",
    ]
    with open(script_path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines))
    return script_path


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def _load_config(args) -> tuple[dict[str, str], str]:
    if not args.config:
        raise ConfigError(f"{args.command} requires --config PATH")
    try:
        with open(args.config, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    sha = hashlib.sha256(text.encode("utf-8")).hexdigest()
    return parse_config(text), sha


def _echo_params(p: DeviceParams, pulse: Pulse) -> dict:
    op = derive_operating_point(p)
    return {
        "omega_r_mhz": to_mhz(p.omega_r),
        "omega_ge_mhz": to_mhz(p.omega_ge),
        "g_ef_mhz": to_mhz(p.g_ef),
        "g_ge_mhz": to_mhz(p.g_ge),
        "j_mhz": to_mhz(p.J),
        "kappa1_mhz": to_mhz(p.kappa_1),
        "kappa2_mhz": to_mhz(p.kappa_2),
        "n_res": p.n_res,
        "gamma_res_mhz": to_mhz(p.gamma_res),
        "tau_coh_us": p.tau_coh,
        "omega0_mhz": to_mhz(pulse.omega_0),
        "tau_p_us": pulse.tau_p,
        "omega_c_mhz": to_mhz(op.omega_c),
        "omega_ef_mhz": to_mhz(op.omega_ef),
        "chi_mhz": to_mhz(op.chi),
        "alpha_mhz": to_mhz(op.omega_ef - p.omega_ge),
        "lambda": op.lam,
    }


def _cmd_run(args) -> int:
    cfg, sha = _load_config(args)
    for key in _SWEEP_KEYS:
        if key in cfg:
            raise ConfigError(f"{key} is a sweep key; use the sweep subcommand")
    point = resolve_point_config(cfg)
    try:
        p, pulse, grid = build_point(point)
        result = contrast_and_upsilon(
            p, pulse, grid=grid, check_convergence=args.check_convergence)
    except (ValueError, DetuningTooSmall) as exc:
        raise ConfigError(str(exc)) from exc

    if args.format == "csv":
        fields = _result_fields(result)
        columns = list(fields)
        _write_table(args, "run", sha, columns, [fields])
        return 0
    payload = {"params": _echo_params(p, pulse), **result.to_dict()}
    stream, close = _open_out(args.out)
    try:
        json.dump(payload, stream, indent=2, allow_nan=True)
        stream.write("\n")
    finally:
        if close:
            stream.close()
    return 0


def _cmd_sweep(args) -> int:
    cfg, sha = _load_config(args)
    spec = SweepSpec.from_config(cfg)
    if args.emit_plot:
        if len(spec.axes) != 2:
            raise ConfigError("--emit-plot needs a sweep with two axes")
        if not args.out or args.out == "-":
            raise ConfigError("--emit-plot needs --out PATH (the script "
                              "references the CSV by name)")
        if args.format != "csv":
            raise ConfigError("--emit-plot needs --format csv")
    columns, rows = run_sweep(spec, jobs=args.jobs,
                              annotate_argmax=args.annotate_argmax)
    _write_table(args, "sweep", sha, columns, rows)
    if args.emit_plot:
        script = _emit_gnuplot(args.out, spec, columns)
        print(f"wrote {script}", file=sys.stderr)
    return 2 if any(row["error"] for row in rows) else 0


# The three reference operating points shipped with the tool; frequencies
# in MHz, durations in us.  C and upsilon targets carry the tolerances
# used by the pass/fail report.
TABLE1_BASE = {"omega_r_mhz": 7000.0, "omega_ge_mhz": 7360.0, "n_res": 7}
TABLE1_ROWS = (
    {"j_mhz": 20.0, "kappa_mhz": 45.0, "g_ef_mhz": 50.0, "tau_p_us": 0.06,
     "omega_c_mhz": 7004.0, "omega_ef_mhz": 7011.0, "alpha_mhz": -349.48,
     "C": 0.952, "upsilon": 0.0118},
    {"j_mhz": 12.0, "kappa_mhz": 28.0, "g_ef_mhz": 40.0, "tau_p_us": 0.30,
     "omega_c_mhz": 7002.0, "omega_ef_mhz": 7007.0, "alpha_mhz": -353.29,
     "C": 0.985, "upsilon": 0.0044},
    {"j_mhz": 10.5, "kappa_mhz": 24.0, "g_ef_mhz": 30.0, "tau_p_us": 0.60,
     "omega_c_mhz": 7001.0, "omega_ef_mhz": 7004.0, "alpha_mhz": -356.24,
     "C": 0.991, "upsilon": 0.0036},
)
# reference frequencies are rounded to 1 MHz (alpha to 0.01 MHz), so a
# computed value agrees when within half that rounding step
TABLE1_TOL = {"omega_c_mhz": 0.5, "omega_ef_mhz": 0.5, "alpha_mhz": 0.005,
              "C": 0.01, "upsilon": 0.002}


def table1_config(row: dict) -> dict[str, str]:
    """Raw config mapping for one bundled reference row."""
    cfg = {k: str(v) for k, v in TABLE1_BASE.items()}
    for key in ("j_mhz", "kappa_mhz", "g_ef_mhz", "tau_p_us"):
        cfg[key] = str(row[key])
    return cfg


def _cmd_table1(args) -> int:
    columns = ["row", "j_mhz", "kappa_mhz", "g_ef_mhz", "tau_p_us",
               "quantity", "computed", "reference", "tolerance", "status"]
    rows = []
    all_pass = True
    for number, ref in enumerate(TABLE1_ROWS, start=1):
        point = resolve_point_config(table1_config(ref))
        p, pulse, grid = build_point(point)
        echo = _echo_params(p, pulse)
        result = contrast_and_upsilon(p, pulse, grid=grid)
        computed = {
            "omega_c_mhz": echo["omega_c_mhz"],
            "omega_ef_mhz": echo["omega_ef_mhz"],
            "alpha_mhz": echo["alpha_mhz"],
            "C": result.contrast,
            "upsilon": result.upsilon,
        }
        for quantity, value in computed.items():
            tol = TABLE1_TOL[quantity]
            ok = abs(value - ref[quantity]) <= tol + 1e-12
            all_pass &= ok
            rows.append({
                "row": number,
                "j_mhz": ref["j_mhz"], "kappa_mhz": ref["kappa_mhz"],
                "g_ef_mhz": ref["g_ef_mhz"], "tau_p_us": ref["tau_p_us"],
                "quantity": quantity, "computed": value,
                "reference": ref[quantity], "tolerance": tol,
                "status": "pass" if ok else "FAIL",
            })

    stream, close = _open_out(args.out)
    try:
        if args.format == "json":
            meta = {"tool": "craswitch", "version": __version__,
                    "command": "table1"}
            points = [{c: row[c] for c in columns} for row in rows]
            _emit_json(stream, meta, columns, points)
        else:
            for line in _meta_lines("table1", None):
                stream.write(line + "\n")
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([
                    row[c] if isinstance(row[c], str) else _fmt(row[c])
                    for c in columns])
    finally:
        if close:
            stream.close()
    return 0 if all_pass else 2


def _cmd_oracle_check(args) -> int:
    cfg, sha = _load_config(args)
    point = resolve_point_config(cfg)
    try:
        p, pulse, grid = build_point(point)
        op = derive_operating_point(p)
    except (ValueError, DetuningTooSmall) as exc:
        raise ConfigError(str(exc)) from exc
    timedomain = contrast_and_upsilon(p, pulse, grid=grid)
    frequency = oracle_scattering(p, op, pulse, grid=grid)

    checks = (
        ("T_g", timedomain.T_g, frequency["T_g"], 1e-3),
        ("T_e", timedomain.T_e, frequency["T_e"], 1e-3),
        ("C", timedomain.contrast, frequency["C"], 2e-3),
    )
    columns = ["quantity", "timedomain", "frequencydomain",
               "abs_diff", "tolerance", "status"]
    rows = []
    all_pass = True
    for name, td, fd, tol in checks:
        diff = abs(td - fd)
        ok = diff <= tol
        all_pass &= ok
        rows.append({"quantity": name, "timedomain": td,
                     "frequencydomain": fd, "abs_diff": diff,
                     "tolerance": tol, "status": "pass" if ok else "FAIL"})

    stream, close = _open_out(args.out)
    try:
        if args.format == "json":
            meta = {"tool": "craswitch", "version": __version__,
                    "command": "oracle-check", "config_sha256": sha}
            _emit_json(stream, meta, columns, rows)
        else:
            for line in _meta_lines("oracle-check", sha):
                stream.write(line + "\n")
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([
                    row[c] if isinstance(row[c], str) else _fmt(row[c])
                    for c in columns])
    finally:
        if close:
            stream.close()
    return 0 if all_pass else 2


def _cmd_diagnose(args) -> int:
    cfg, sha = _load_config(args)
    point = resolve_point_config(cfg)
    try:
        p, pulse, _ = build_point(point)
        op = derive_operating_point(p)
    except (ValueError, DetuningTooSmall) as exc:
        raise ConfigError(str(exc)) from exc
    summary = validity_summary(p, op, pulse.tau_p)
    band = passband_diagnostics(p, op)
    report = dict(summary)
    report["band_modes_mhz"] = [to_mhz(m) for m in band.mode_frequencies]

    stream, close = _open_out(args.out)
    try:
        if args.format == "json":
            doc = {"meta": {"tool": "craswitch", "version": __version__,
                            "command": "diagnose", "config_sha256": sha},
                   "diagnostics": report}
            json.dump(doc, stream, indent=2, allow_nan=True)
            stream.write("\n")
        else:
            for line in _meta_lines("diagnose", sha):
                stream.write(line + "\n")
            writer = csv.writer(stream, lineterminator="\n")
            writer.writerow(["key", "value"])
            for key, value in report.items():
                if isinstance(value, list):
                    value = " ".join(_fmt(v) for v in value)
                elif isinstance(value, float):
                    value = _fmt(value)
                writer.writerow([key, value])
    finally:
        if close:
            stream.close()
    return 0


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="craswitch",
        description="Single-photon switching in a qutrit-controlled "
                    "coupled-resonator array: transport figures of merit, "
                    "parameter sweeps, and frequency-domain cross-checks.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(sp, default_format):
        sp.add_argument("--config", help="path to a key = value config file")
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--format", choices=("csv", "json"),
                        default=default_format)
        sp.add_argument("--jobs", type=int, default=1,
                        help="worker processes for sweeps")

    sp = sub.add_parser("run", help="evaluate a single parameter point")
    common(sp, "json")
    sp.add_argument("--check-convergence", action="store_true",
                    help="repeat at twice the horizon and warn on drift")
    sp.set_defaults(func=_cmd_run)

    sp = sub.add_parser("sweep", help="evaluate a parameter grid")
    common(sp, "csv")
    sp.add_argument("--emit-plot", action="store_true",
                    help="also write a gnuplot heatmap script "
                         "(2-axis sweeps, csv, --out required)")
    sp.add_argument("--annotate-argmax", action="store_true",
                    help="add a row_max column marking the per-block "
                         "contrast maximum")
    sp.set_defaults(func=_cmd_sweep)

    sp = sub.add_parser("table1",
                        help="check the bundled reference operating points")
    common(sp, "csv")
    sp.set_defaults(func=_cmd_table1)

    sp = sub.add_parser("oracle-check",
                        help="compare time-domain transmissions against the "
                             "stationary-scattering prediction")
    common(sp, "csv")
    sp.set_defaults(func=_cmd_oracle_check)

    sp = sub.add_parser("diagnose",
                        help="report model-validity flags for a config")
    common(sp, "csv")
    sp.set_defaults(func=_cmd_diagnose)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

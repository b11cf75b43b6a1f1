"""Command-line interface.

Subcommands: field, eigs, windings, evolve, dilate, pulses, fit, scan,
phase-diagram.  Reports are written as CSV/JSON under --out, with matplotlib
figures rendered next to the delimited output unless --no-figures is given.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import plots
from .bloch import ModelParams, bloch_angles, bloch_field, eigenstate_texture, eigensystem
from .dilation import auto_eta0, compile_pulses, dilated_schedule, export_pulse_program
from .errors import ConfigError, NhtopoError
from .evolution import StateVec, state_from_coefficients, texture_series
from .fitting import FitConfig, fit_series
from .pipeline import (
    ScenarioConfig,
    phase_diagram,
    run_scan,
    simulate_dilated_series,
    write_scan_csv,
    write_series_csv,
    write_summary_json,
)
from .winding import KGrid, winding_report


def _fmt(x) -> str:
    return format(x, ".12g")


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="scenario config JSON")
    p.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    p.add_argument("--seed", type=int, help="RNG seed")
    p.add_argument("--grid", type=int, help="k-grid size")
    p.add_argument("--mode", choices=("exact", "dilated", "noisy", "fit"))
    p.add_argument("--noise", type=float, help="pulse noise level")
    p.add_argument("--figures", dest="figures", action="store_true", default=True)
    p.add_argument("--no-figures", dest="figures", action="store_false")
    for name in ("j0", "j1", "j2", "delta", "hz"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--k", type=float, help="quasimomentum in units of pi")
    p.add_argument("--eta0", type=float)
    p.add_argument("--slices", type=int)
    p.add_argument("--tmax", type=float)
    p.add_argument("--ntimes", type=int)
    p.add_argument("--coupling", type=float, help="J coupling in Hz")
    p.add_argument("--jobs", type=int)


def _build_config(args) -> ScenarioConfig:
    if args.config is not None:
        cfg = ScenarioConfig.from_json(args.config)
    else:
        cfg = ScenarioConfig(model=ModelParams(J0=1.0, J1=1.0, J2=0.0,
                                               delta=0.3, hz=0.5))
    model = cfg.model
    updates = {}
    for cli_name, field_name in (("j0", "J0"), ("j1", "J1"), ("j2", "J2"),
                                 ("delta", "delta"), ("hz", "hz")):
        v = getattr(args, cli_name)
        if v is not None:
            updates[field_name] = v
    if updates:
        model = replace(model, **updates)
    overrides = {"model": model}
    for cli_name, field_name in (("seed", "seed"), ("grid", "k_count"),
                                 ("mode", "mode"), ("noise", "noise_level"),
                                 ("eta0", "eta0"), ("slices", "n_slices"),
                                 ("tmax", "t_max"), ("ntimes", "n_times"),
                                 ("coupling", "coupling_J"), ("jobs", "jobs")):
        v = getattr(args, cli_name)
        if v is not None:
            overrides[field_name] = v
    try:
        return replace(cfg, **overrides)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _outdir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _k_value(args) -> float:
    if args.k is None:
        return -0.448 * math.pi
    return args.k * math.pi


def cmd_field(args) -> int:
    cfg = _build_config(args)
    out = _outdir(args)
    grid = cfg.grid
    lines = ["k,re_hx,im_hx,re_hy,im_hy,re_hz,im_hz"]
    for k in grid.points():
        h = bloch_field(cfg.model, float(k))
        lines.append(",".join(_fmt(v) for v in (
            k, h.hx.real, h.hx.imag, h.hy.real, h.hy.imag, h.hz.real, h.hz.imag)))
    (out / "field.csv").write_text("\n".join(lines) + "\n")
    print(f"wrote {out / 'field.csv'} ({grid.n} rows)")
    return 0


def cmd_eigs(args) -> int:
    cfg = _build_config(args)
    out = _outdir(args)
    grid = cfg.grid
    lines = ["k,reE,imE,tex_x_plus,tex_y_plus,tex_z_plus,"
             "tex_x_minus,tex_y_minus,tex_z_minus,re_phi_yx,im_phi_yx"]
    energies = []
    for k in grid.points():
        h = bloch_field(cfg.model, float(k))
        es = eigensystem(h)
        ang = bloch_angles(h)
        energies.append(es.E_plus)
        vals = [k, es.E_plus.real, es.E_plus.imag]
        vals += [eigenstate_texture(es, +1, ax) for ax in "xyz"]
        vals += [eigenstate_texture(es, -1, ax) for ax in "xyz"]
        vals += [ang.phi_yx.real, ang.phi_yx.imag]
        lines.append(",".join(_fmt(v) for v in vals))
    (out / "eigs.csv").write_text("\n".join(lines) + "\n")
    if args.figures:
        plots.plot_energy_loop(energies, out / "energy_loop.png")
    print(f"wrote {out / 'eigs.csv'} ({grid.n} rows)")
    return 0


def cmd_windings(args) -> int:
    cfg = _build_config(args)
    out = _outdir(args)
    grid = KGrid(n=cfg.k_count or 721)
    rep = winding_report(cfg.model, grid)
    payload = {
        "w_plus": rep.w_plus,
        "w_minus": rep.w_minus,
        "w_t": {"value": rep.w_t.value, "raw": rep.w_t.raw,
                "residual": rep.w_t.residual, "quantized": rep.w_t.quantized},
        "nu_E": {"value": rep.nu_E.value, "raw": rep.nu_E.raw,
                 "residual": rep.nu_E.residual, "quantized": rep.nu_E.quantized},
        "grid_n": grid.n,
        "model": cfg.echo()["model"],
    }
    (out / "windings.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    if args.figures:
        es = [eigensystem(bloch_field(cfg.model, float(k))).E_plus
              for k in grid.points()]
        plots.plot_energy_loop(es, out / "energy_loop.png")
    print(f"w_+ = {rep.w_plus:.6f}  w_- = {rep.w_minus:.6f}")
    print(f"w_t = {rep.w_t.value} (residual {rep.w_t.residual:+.2e})")
    print(f"nu_E = {rep.nu_E.value} (residual {rep.nu_E.residual:+.2e})")
    return 0


def cmd_evolve(args) -> int:
    cfg = _build_config(args)
    out = _outdir(args)
    k = _k_value(args)
    h = bloch_field(cfg.model, k)
    es = eigensystem(h)
    psi0 = state_from_coefficients(es, cfg.c_plus, cfg.c_minus)
    amps = psi0.amplitudes / np.linalg.norm(psi0.amplitudes)
    times = np.linspace(0.0, cfg.t_max, cfg.n_times)
    series = texture_series(h, StateVec(amps), times, k=k)
    write_series_csv(series, out / "evolve.csv")
    if args.figures:
        plots.plot_texture_series(series, out / "evolve.png",
                                  labels=["exact"], title=f"k = {k / math.pi:.3f} pi")
    print(f"wrote {out / 'evolve.csv'} ({len(times)} samples)")
    return 0


def cmd_dilate(args) -> int:
    cfg = _build_config(args)
    out = _outdir(args)
    k = _k_value(args)
    h = bloch_field(cfg.model, k)
    eta0 = cfg.eta0 if cfg.eta0 is not None else auto_eta0(h, cfg.t_max)
    tau = cfg.t_max / cfg.n_slices
    schedule = dilated_schedule(h, eta0, tau, cfg.n_slices, k=k)
    lines = ["t_mid," + ",".join(f"lam{a}" for a in range(4))
             + "," + ",".join(f"gam{a}" for a in range(4))]
    t_mid = (np.arange(cfg.n_slices) + 0.5) * tau
    for m in range(cfg.n_slices):
        vals = [t_mid[m], *schedule.lam[m], *schedule.gam[m]]
        lines.append(",".join(_fmt(v) for v in vals))
    (out / "schedule.csv").write_text("\n".join(lines) + "\n")

    dilated = simulate_dilated_series(replace(cfg, eta0=eta0), k)
    es = eigensystem(h)
    psi0 = state_from_coefficients(es, cfg.c_plus, cfg.c_minus)
    amps = psi0.amplitudes / np.linalg.norm(psi0.amplitudes)
    exact = texture_series(h, StateVec(amps), dilated.times, k=k)
    write_series_csv(dilated, out / "dilated_series.csv")
    write_series_csv(exact, out / "exact_series.csv")
    if args.figures:
        plots.plot_schedule(schedule, out / "schedule.png",
                            title=f"k = {k / math.pi:.3f} pi, eta0 = {eta0}")
        plots.plot_texture_series([dilated, exact], out / "dilate.png",
                                  labels=["dilated", "exact"])
    dev = max(np.abs(np.array(dilated.sx) - np.array(exact.sx)).max(),
              np.abs(np.array(dilated.sy) - np.array(exact.sy)).max())
    print(f"eta0 = {eta0}, max texture deviation vs exact: {dev:.3e}")
    return 0


def cmd_pulses(args) -> int:
    cfg = _build_config(args)
    out = _outdir(args)
    k = _k_value(args)
    h = bloch_field(cfg.model, k)
    eta0 = cfg.eta0 if cfg.eta0 is not None else auto_eta0(h, cfg.t_max)
    tau = cfg.t_max / cfg.n_slices
    schedule = dilated_schedule(h, eta0, tau, cfg.n_slices, k=k)
    pulses = compile_pulses(schedule, cfg.coupling_J)
    path = out / ("pulses_hw.txt" if args.hardware else "pulses.txt")
    export_pulse_program(pulses, path, hardware=args.hardware)
    print(f"wrote {path} ({len(pulses)} slices)")
    return 0


def cmd_fit(args) -> int:
    cfg = _build_config(args)
    out = _outdir(args)
    k = _k_value(args)
    if cfg.mode == "exact" or cfg.mode == "fit" and args.mode is None:
        cfg = replace(cfg, mode="fit")
    series = simulate_dilated_series(cfg, k, noisy=(cfg.mode == "noisy"))
    es = eigensystem(bloch_field(cfg.model, k))
    fit = fit_series(series, series, FitConfig(
        seed=cfg.seed or 0,
        seed_vectors=(cfg.c_plus * es.right_plus, cfg.c_minus * es.right_minus)))
    payload = {
        "k": k,
        "reE": fit.model.E.real, "imE": fit.model.E.imag,
        "reE_exact": es.E_plus.real, "imE_exact": es.E_plus.imag,
        "tex_x_plus": fit.tex_x_plus, "tex_y_plus": fit.tex_y_plus,
        "tex_x_minus": fit.tex_x_minus, "tex_y_minus": fit.tex_y_minus,
        "phi_pp": fit.phi_pp, "phi_mm": fit.phi_mm,
        "residual_rms": fit.residual_rms,
        "restarts_used": fit.restarts_used,
    }
    (out / "fit.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    write_series_csv(series, out / "fit_series.csv")
    if args.figures:
        plots.plot_texture_series(series, out / "fit_series.png",
                                  labels=[series.meta])
    print(f"fitted E = {fit.model.E:.6f} (exact {es.E_plus:.6f}), "
          f"rms {fit.residual_rms:.2e}")
    return 0


def cmd_scan(args) -> int:
    cfg = _build_config(args)
    out = _outdir(args)
    result = run_scan(cfg)
    write_scan_csv(result.rows, out / "scan.csv")
    write_summary_json(result, out / "scan_summary.json")
    for s in result.series:
        write_series_csv(s, out / f"series_k{s.k / math.pi:+.4f}pi.csv")
    if args.figures:
        plots.plot_scan_angles(result.rows, out / "scan_angles.png",
                               title=f"mode = {cfg.mode}")
        plots.plot_scan_energies(result.rows, out / "scan_energies.png")
    if result.failures:
        print(f"{len(result.failures)} of {len(result.rows)} k-points failed")
    if result.w_t is not None:
        print(f"w_t = {result.w_t.value} (residual {result.w_t.residual:+.2e})")
    if result.nu_E is not None:
        print(f"nu_E = {result.nu_E.value} (residual {result.nu_E.residual:+.2e})")
    return 0


def cmd_phase_diagram(args) -> int:
    cfg = _build_config(args)
    out = _outdir(args)

    def _parse_range(spec, fallback):
        if spec is None:
            return fallback
        lo, hi, n = spec.split(":")
        return np.linspace(float(lo), float(hi), int(n))

    j0s = _parse_range(args.j0_range, np.linspace(0.05, 2.0, 40))
    deltas = _parse_range(args.delta_range, np.linspace(0.0, 1.0, 21))
    grid = KGrid(n=cfg.k_count or 721)
    records = phase_diagram(cfg.model, j0s, deltas, grid)
    lines = ["J0,delta,w_t,w_t_residual,nu_E,nu_E_residual,status"]
    for r in records:
        lines.append(",".join([
            _fmt(r["J0"]), _fmt(r["delta"]), _fmt(r["w_t"]), _fmt(r["w_t_residual"]),
            _fmt(r["nu_E"]), _fmt(r["nu_E_residual"]), r["status"]]))
    (out / "phase_diagram.csv").write_text("\n".join(lines) + "\n")
    if args.figures:
        plots.plot_phase_diagram(records, out / "phase_diagram.png")
    n_fail = sum(1 for r in records if r["status"] != "ok")
    print(f"wrote {out / 'phase_diagram.csv'} ({len(records)} points, {n_fail} failed)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nhtopo",
        description="Topological invariants of 1D non-Hermitian two-band models "
                    "from simulated spin-texture measurements.")
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "field": cmd_field,
        "eigs": cmd_eigs,
        "windings": cmd_windings,
        "evolve": cmd_evolve,
        "dilate": cmd_dilate,
        "pulses": cmd_pulses,
        "fit": cmd_fit,
        "scan": cmd_scan,
        "phase-diagram": cmd_phase_diagram,
    }
    for name, fn in commands.items():
        p = sub.add_parser(name)
        _add_common(p)
        if name == "pulses":
            p.add_argument("--hardware", action="store_true",
                           help="positive durations + sandwich phase columns")
        if name == "phase-diagram":
            p.add_argument("--j0-range", help="lo:hi:n")
            p.add_argument("--delta-range", help="lo:hi:n")
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NhtopoError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

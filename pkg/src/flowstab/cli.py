"""Command-line pipeline around the stabilization machinery.

Five stages, each writing hash-chained artifacts into the output directory:

  steady      solve for the forced equilibrium
  spectrum    shift, linearize, decompose the unstable part
  synthesize  pick window actuators and place the unstable spectrum
  simulate    march the closed (or open) loop and record norm traces
  report      tabulate fitted decay rates against their targets

Exit codes: 0 success (a flagged blow-up still counts as a completed run),
2 bad input or mismatched artifacts, 3 ambiguous spectral splitting,
4 synthesis failure, 5 nothing to synthesize (no unstable modes).
"""

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from types import SimpleNamespace

import numpy as np

from . import artifacts as art
from .config import RunConfig
from .control import ActuatorSet, FeedbackLaw, choose_actuators, place_poles
from .errors import (
    ArtifactError,
    BiorthogonalityError,
    ConfigError,
    PlacementError,
    SpectralAmbiguityError,
    SteadyStateError,
    SynthesisError,
)
from .grid import Field
from .helmholtz import SolenoidalBasis, stokes_matrix
from .sim import SimConfig, fit_decay, simulate
from .spectral import JordanCluster, OseenOperator, SpectralData
from .steady import make_forcing, solve_steady

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_AMBIGUOUS = 3
EXIT_SYNTHESIS = 4
EXIT_NOTHING = 5

_STAGE_FILES = {
    "steady": "steady.json",
    "spectrum": "spectrum.json",
    "synthesis": "synthesis.json",
    "simulate": "simulate.json",
    "sweep": "sweep.json",
}


def _out_dir(args, cfg):
    out = args.out or cfg["output.dir"]
    if out is None:
        raise ConfigError("no output directory: pass --out or set output.dir")
    os.makedirs(out, exist_ok=True)
    return out


def _stage_path(out, stage):
    return os.path.join(out, _STAGE_FILES[stage])


def _config_echo(cfg):
    return {
        "grid": cfg.grid_echo(),
        "nu": cfg["physics.nu"],
        "forcing": {
            "family": cfg["physics.forcing"],
            "amplitude": cfg["physics.amplitude"],
            "k": cfg["physics.k"],
        },
    }


def _check_echo(manifest, cfg, stage):
    if manifest.get("config") != art.jsonable(_config_echo(cfg)):
        raise ArtifactError(
            f"{stage} artifacts were produced with a different configuration; "
            "rerun the pipeline from the steady stage"
        )


def _load_steady(cfg, out):
    manifest = art.load_json(_stage_path(out, "steady"))
    _check_echo(manifest, cfg, "steady")
    grid = cfg.make_grid()
    basis = SolenoidalBasis.build(grid)
    y = art.load_array(out, manifest, "y")
    forcing = Field.unpack(grid, art.load_array(out, manifest, "forcing"))
    return SimpleNamespace(
        manifest=manifest, grid=grid, basis=basis, coords=y, forcing=forcing,
    )


def _load_spectrum(cfg, out, st):
    manifest = art.load_json(_stage_path(out, "spectrum"))
    art.check_upstream(manifest, _stage_path(out, "steady"), "spectrum")
    matrix = art.load_array(out, manifest, "matrix")
    phi = art.load_array(out, manifest, "phi")
    psi = art.load_array(out, manifest, "psi")
    jordan = art.load_array(out, manifest, "jordan")
    n = matrix.shape[0]
    n_unstable = int(manifest["n_unstable"])
    clusters = [
        JordanCluster(
            complex(c["eigenvalue"][0], c["eigenvalue"][1]),
            int(c["size"]),
            [int(l) for l in c["chain_lengths"]],
            int(c["start"]),
            None if c["conj_partner"] is None else int(c["conj_partner"]),
        )
        for c in manifest["clusters"]
    ]
    projector = (
        np.real(phi @ psi.conj().T) if n_unstable else np.zeros((n, n))
    )
    data = SpectralData(
        matrix=matrix,
        eigenvalues=art.pairs_to_complex(manifest["eigenvalues"]),
        n_unstable=n_unstable,
        phi=phi,
        psi=psi,
        jordan=jordan,
        clusters=clusters,
        projector=projector,
        gamma0=float(manifest["gamma0"]),
        tau_eig=float(manifest["tau_eig"]),
        defect_residual=float(manifest["defect_residual"]),
    )
    base_flow = st.basis.from_coords(st.coords)
    op = OseenOperator(
        st.grid, st.basis, base_flow, cfg["physics.nu"],
        sigma=float(manifest["sigma"]), stokes=stokes_matrix(st.grid, st.basis),
    )
    if not np.allclose(op.matrix, matrix, rtol=1e-12, atol=1e-12):
        raise ArtifactError(
            "stored linearization disagrees with the one rebuilt from the "
            "configuration; rerun the spectrum stage"
        )
    op.matrix = matrix
    return manifest, data, op


def _load_law(cfg, out, st, data):
    manifest = art.load_json(_stage_path(out, "synthesis"))
    art.check_upstream(manifest, _stage_path(out, "spectrum"), "synthesis")
    mask = cfg.omega_mask(st.grid)
    fields = [
        Field.unpack(st.grid, row)
        for row in art.load_array(out, manifest, "act_fields")
    ]
    actuators = ActuatorSet(
        fields,
        mask,
        art.load_array(out, manifest, "injections"),
        art.load_array(out, manifest, "influence"),
        art.load_array(out, manifest, "margins"),
    )
    p_coeffs = art.load_array(out, manifest, "p_coeffs")
    p_fields = [
        st.basis.from_coords(data.psi @ p_coeffs[k])
        for k in range(p_coeffs.shape[0])
    ]
    law = FeedbackLaw(
        actuators,
        art.load_array(out, manifest, "gains_modal"),
        art.load_array(out, manifest, "gains_real"),
        art.load_array(out, manifest, "targets"),
        p_coeffs,
        p_fields,
        data,
        st.basis,
    )
    return manifest, law


def cmd_steady(args):
    cfg = RunConfig.parse(args.config)
    out = _out_dir(args, cfg)
    grid = cfg.make_grid()
    basis = SolenoidalBasis.build(grid)
    forcing, known_v, _ = make_forcing(
        grid,
        cfg["physics.forcing"],
        nu=cfg["physics.nu"],
        amplitude=cfg["physics.amplitude"],
        k=cfg["physics.k"],
    )
    initial = basis.to_coords(known_v) if known_v is not None else None
    stokes = stokes_matrix(grid, basis)
    steady = solve_steady(
        grid, basis, forcing, cfg["physics.nu"],
        initial=initial, stokes=stokes,
    )
    files = art.save_arrays(out, {
        "y": steady.coords,
        "pressure": steady.pressure.p,
        "forcing": forcing.pack(),
    })
    art.save_json(_stage_path(out, "steady"), {
        "kind": "steady",
        "config": _config_echo(cfg),
        "n_dof": basis.n_dof,
        "residual": steady.residuals[-1],
        "momentum_residual": steady.momentum_residual,
        "method": steady.method,
        "files": files,
    })
    print(
        f"steady: residual {steady.residuals[-1]:.3e}, momentum "
        f"{steady.momentum_residual:.3e} -> {_stage_path(out, 'steady')}"
    )
    return EXIT_OK


def cmd_spectrum(args):
    cfg = RunConfig.parse(args.config)
    out = _out_dir(args, cfg)
    st = _load_steady(cfg, out)
    base_flow = st.basis.from_coords(st.coords)
    stokes = stokes_matrix(st.grid, st.basis)
    unshifted = OseenOperator(
        st.grid, st.basis, base_flow, cfg["physics.nu"], sigma=0.0,
        stokes=stokes,
    )
    if cfg["physics.sigma_margin"] is not None:
        max_real = float(np.linalg.eigvals(unshifted.matrix).real.max())
    else:
        max_real = 0.0
    sigma = cfg.resolve_sigma(max_real)
    op = OseenOperator(
        st.grid, st.basis, base_flow, cfg["physics.nu"], sigma=sigma,
        stokes=stokes,
    )
    data = op.spectrum(cfg["spectrum.tau_eig"])
    files = art.save_arrays(out, {
        "matrix": op.matrix,
        "phi": data.phi,
        "psi": data.psi,
        "jordan": data.jordan,
    })
    clusters = [
        {
            "eigenvalue": [c.eigenvalue.real, c.eigenvalue.imag],
            "size": c.size,
            "chain_lengths": list(c.chain_lengths),
            "start": c.start,
            "conj_partner": c.conj_partner,
        }
        for c in data.clusters
    ]
    art.save_json(_stage_path(out, "spectrum"), {
        "kind": "spectrum",
        "upstream_sha256": art.file_hash(_stage_path(out, "steady")),
        "config": _config_echo(cfg),
        "sigma": sigma,
        "tau_eig": data.tau_eig,
        "n_unstable": data.n_unstable,
        "n_clusters": len(data.clusters),
        "cluster_sizes": [c.size for c in data.clusters],
        "chain_counts": [len(c.chain_lengths) for c in data.clusters],
        "gamma0": data.gamma0,
        "defect_residual": data.defect_residual,
        "clusters": clusters,
        "eigenvalues": art.complex_pairs(sorted(
            data.eigenvalues,
            key=lambda z: (-z.real, abs(z.imag), z.imag < 0),
        )),
        "files": files,
    })
    structure = ", ".join(
        f"{c.eigenvalue:.6g}: chains {list(c.chain_lengths)}"
        for c in data.clusters
    )
    print(
        f"spectrum: N={data.n_unstable} in {len(data.clusters)} cluster(s) "
        f"[{structure}], gamma0={data.gamma0:.6g} "
        f"-> {_stage_path(out, 'spectrum')}"
    )
    return EXIT_OK


def _resolve_gamma(cfg, data):
    gamma = cfg["control.gamma"]
    if gamma == "auto":
        gamma = data.gamma0 - cfg["control.epsilon"]
        if gamma <= 0:
            raise ConfigError(
                f"auto decay target is not positive: gamma0={data.gamma0:.6g}"
                f" minus epsilon={cfg['control.epsilon']:.6g}"
            )
    return float(gamma)


def cmd_synthesize(args):
    cfg = RunConfig.parse(args.config)
    out = _out_dir(args, cfg)
    st = _load_steady(cfg, out)
    _, data, op = _load_spectrum(cfg, out, st)
    if data.n_unstable == 0:
        print("synthesize: no unstable modes, nothing to do")
        return EXIT_NOTHING
    seed = args.seed if args.seed is not None else cfg["control.seed"]
    mask = cfg.omega_mask(st.grid)
    actuators = choose_actuators(
        st.grid, st.basis, data, mask,
        n_actuators=cfg["control.n_actuators"],
        n_trials=cfg["control.trials"],
        seed=seed,
        tau_rank=cfg["control.tau_rank"],
    )
    gamma = _resolve_gamma(cfg, data)
    law = place_poles(
        data, st.basis, actuators, gamma,
        delta_sep=cfg["control.delta_sep"],
        tau_rank=cfg["control.tau_rank"],
        seed=seed,
    )
    closed = np.linalg.eigvals(law.closed_loop(op.matrix))
    max_real = float(closed.real.max())
    bound = -gamma + 1e-6
    if max_real > bound:
        raise SynthesisError(
            f"closed-loop spectrum reaches {max_real:.6g}, above the "
            f"certified bound {bound:.6g}"
        )
    files = art.save_arrays(out, {
        "act_fields": np.array([f.pack() for f in law.actuators.fields]),
        "injections": law.actuators.injections,
        "influence": law.actuators.influence,
        "margins": np.asarray(law.actuators.margins, float),
        "gains_modal": law.gains_modal,
        "gains_real": law.gains_real,
        "p_coeffs": law.p_coeffs,
        "targets": np.asarray(law.targets),
    })
    art.save_json(_stage_path(out, "synthesis"), {
        "kind": "synthesis",
        "upstream_sha256": art.file_hash(_stage_path(out, "spectrum")),
        "config": _config_echo(cfg),
        "n_actuators": law.n_actuators,
        "gamma": gamma,
        "delta_sep": cfg["control.delta_sep"],
        "epsilon": cfg["control.epsilon"],
        "seed": seed,
        "rank_margins": [float(m) for m in law.actuators.margins],
        "targets": art.complex_pairs(law.targets),
        "closed_loop_max_real": max_real,
        "certificate_bound": bound,
        "window": {
            "x0": cfg["omega.x0"], "x1": cfg["omega.x1"],
            "y0": cfg["omega.y0"], "y1": cfg["omega.y1"],
        },
        "files": files,
    })
    margins = np.round(law.actuators.margins, 6).tolist()
    print(
        f"synthesize: K={law.n_actuators} rank margins {margins}, placed "
        f"max Re = {max_real:.8g} <= {bound:.8g} "
        f"-> {_stage_path(out, 'synthesis')}"
    )
    return EXIT_OK


def _prepare_run(cfg, out, mode, seed, amplitude=None):
    st = _load_steady(cfg, out)
    _, data, op = _load_spectrum(cfg, out, st)
    law = None
    gamma = None
    if mode == "open":
        upstream = _stage_path(out, "spectrum")
        sim_mode = "linear"
    else:
        manifest, law = _load_law(cfg, out, st, data)
        gamma = manifest["gamma"]
        upstream = _stage_path(out, "synthesis")
        sim_mode = mode
    scfg = SimConfig(
        dt=cfg["sim.dt"],
        t_final=cfg["sim.t_final"],
        mode=sim_mode,
        record_every=cfg["sim.record_every"],
        ic=cfg["sim.ic"],
        amplitude=cfg["sim.amplitude"] if amplitude is None else amplitude,
        seed=seed,
    )
    return SimpleNamespace(
        st=st, data=data, op=op, law=law, scfg=scfg,
        upstream=upstream, gamma=gamma,
    )


def _run_once(cfg, out, mode, seed, amplitude=None, trace_name="trace.csv"):
    run = _prepare_run(cfg, out, mode, seed, amplitude)
    trace = simulate(
        run.op, run.scfg,
        law=run.law,
        data=run.data,
        params=cfg.norm_params(),
        steady=run.st,
        forcing=run.st.forcing,
    )
    trace_path = os.path.join(out, trace_name)
    trace.to_csv(trace_path)
    summary = {
        "mode": mode,
        "seed": seed,
        "ic": run.scfg.ic,
        "amplitude": run.scfg.amplitude,
        "dt": run.scfg.dt,
        "t_final": run.scfg.t_final,
        "record_every": run.scfg.record_every,
        "gamma_target": run.gamma,
        "blown_up": trace.blown_up,
        "fitted_rate": trace.fitted_rate,
        "fit_residual": trace.fit_residual,
        "lp_time": trace.lp_time,
        "n_samples": trace.n_samples,
        "trace": {"file": trace_name, "sha256": art.file_hash(trace_path)},
    }
    return run, trace, summary


def _sweep_worker(task):
    config_path, out, mode, seed, amplitude, index = task
    cfg = RunConfig.parse(config_path)
    _, trace, summary = _run_once(
        cfg, out, mode, seed, amplitude,
        trace_name=f"trace_sweep_{index}.csv",
    )
    denom = amplitude * (amplitude + 1.0)
    summary["ratio_chi"] = (
        trace.lp_time["chi"] / denom if denom > 0 else float("nan")
    )
    return summary


def cmd_simulate(args):
    cfg = RunConfig.parse(args.config)
    out = _out_dir(args, cfg)
    mode = args.mode or cfg["sim.mode"]
    seed = args.seed if args.seed is not None else cfg["sim.seed"]

    if args.sweep:
        if args.sweep < 2:
            raise ConfigError("--sweep needs at least 2 amplitudes")
        base = cfg["sim.amplitude"]
        if base <= 0:
            raise ConfigError("sweeping needs a positive sim.amplitude")
        amplitudes = base * np.logspace(-1.0, 0.0, args.sweep)
        tasks = [
            (args.config, out, mode, seed, float(a), i)
            for i, a in enumerate(amplitudes)
        ]
        workers = min(args.sweep, os.cpu_count() or 1)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            entries = list(pool.map(_sweep_worker, tasks))
        upstream = (
            _stage_path(out, "spectrum") if mode == "open"
            else _stage_path(out, "synthesis")
        )
        ratios = [e["ratio_chi"] for e in entries]
        art.save_json(_stage_path(out, "sweep"), {
            "kind": "sweep",
            "upstream_sha256": art.file_hash(upstream),
            "config": _config_echo(cfg),
            "mode": mode,
            "seed": seed,
            "amplitudes": [float(a) for a in amplitudes],
            "entries": entries,
            "ratio_spread": (
                max(ratios) / min(ratios)
                if all(np.isfinite(r) and r > 0 for r in ratios) else "nan"
            ),
        })
        print(
            f"simulate[{mode}]: swept {args.sweep} amplitudes "
            f"{amplitudes[0]:.3g}..{amplitudes[-1]:.3g} "
            f"-> {_stage_path(out, 'sweep')}"
        )
        return EXIT_OK

    run, trace, summary = _run_once(cfg, out, mode, seed)
    payload = {
        "kind": "simulate",
        "upstream_sha256": art.file_hash(run.upstream),
        "config": _config_echo(cfg),
        "files": {"trace": summary.pop("trace")},
    }
    payload.update(summary)
    art.save_json(_stage_path(out, "simulate"), payload)
    rate = trace.fitted_rate
    rate_text = f"{rate:.4g}" if np.isfinite(rate) else "n/a"
    print(
        f"simulate[{mode}]: {trace.n_samples} samples, fitted rate "
        f"{rate_text}, blown_up={trace.blown_up} "
        f"-> {os.path.join(out, 'trace.csv')}"
    )
    if trace.blown_up:
        print("simulate: state left the trust region (1e6 x initial); "
              "trace truncated and flagged")
    return EXIT_OK


def _read_trace_csv(path):
    """Parse a trace, skipping corrupt rows with a warning; returns columns."""
    rows = []
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "t,lq,w1q,w2q,besov,control,chi":
        raise ArtifactError(f"{path}: not a trace file")
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        parts = line.split(",")
        try:
            if len(parts) != 7:
                raise ValueError("wrong column count")
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            print(
                f"warning: {path}:{lineno}: skipping corrupt row ({exc})",
                file=sys.stderr,
            )
    if not rows:
        raise ArtifactError(f"{path}: no usable rows")
    return np.array(rows)


def cmd_report(args):
    out = args.out
    if out is None and args.config:
        out = RunConfig.parse(args.config)["output.dir"]
    if out is None or not os.path.isdir(out):
        raise ConfigError("report needs an existing --out directory")

    runs, sweeps = [], []
    for base, _, names in sorted(os.walk(out)):
        if _STAGE_FILES["simulate"] in names:
            manifest = art.load_json(os.path.join(base, "simulate.json"))
            entry = {
                "dir": os.path.relpath(base, out),
                "mode": manifest["mode"],
                "amplitude": manifest["amplitude"],
                "gamma_target": manifest.get("gamma_target"),
                "fitted_rate": manifest["fitted_rate"],
                "blown_up": manifest["blown_up"],
            }
            trace_file = manifest["files"]["trace"]["file"]
            try:
                cols = _read_trace_csv(os.path.join(base, trace_file))
                refit, _ = fit_decay(cols[:, 0], cols[:, 1])
                entry["n_rows"] = int(cols.shape[0])
                entry["refit_rate"] = refit
            except ArtifactError as exc:
                print(f"warning: {exc}", file=sys.stderr)
                entry["n_rows"] = 0
                entry["refit_rate"] = float("nan")
            runs.append(entry)
        if _STAGE_FILES["sweep"] in names:
            manifest = art.load_json(os.path.join(base, "sweep.json"))
            sweeps.append({
                "dir": os.path.relpath(base, out),
                "mode": manifest["mode"],
                "amplitudes": manifest["amplitudes"],
                "ratios": [e["ratio_chi"] for e in manifest["entries"]],
                "ratio_spread": manifest["ratio_spread"],
            })
    if not runs and not sweeps:
        raise ConfigError(f"no simulation artifacts under {out}")

    def fmt(v):
        if v is None:
            return "-"
        if isinstance(v, str):
            return v
        if isinstance(v, bool):
            return "yes" if v else "no"
        if isinstance(v, float) and not np.isfinite(v):
            return "n/a"
        return f"{v:.6g}" if isinstance(v, float) else str(v)

    lines = ["# stabilization runs", ""]
    if runs:
        lines += [
            "| run | mode | amplitude | target rate | fitted rate | refit | blown up |",
            "| --- | --- | --- | --- | --- | --- | --- |",
        ]
        for r in runs:
            lines.append(
                "| {dir} | {mode} | {amp} | {tgt} | {fit} | {refit} | {blown} |".format(
                    dir=r["dir"], mode=r["mode"], amp=fmt(r["amplitude"]),
                    tgt=fmt(r["gamma_target"]),
                    fit=fmt(_as_float(r["fitted_rate"])),
                    refit=fmt(_as_float(r["refit_rate"])),
                    blown=fmt(r["blown_up"]),
                )
            )
        lines.append("")
        targeted = [
            r for r in runs
            if r["gamma_target"] is not None
            and np.isfinite(_as_float(r["fitted_rate"]))
        ]
        if len(targeted) >= 2:
            targeted.sort(key=lambda r: r["gamma_target"])
            rates = [_as_float(r["fitted_rate"]) for r in targeted]
            lines += ["## achieved decay vs. requested decay", ""]
            lines += ["| requested | achieved |", "| --- | --- |"]
            lines += [
                f"| {fmt(r['gamma_target'])} | {fmt(v)} |"
                for r, v in zip(targeted, rates)
            ]
            mono = all(b > a for a, b in zip(rates, rates[1:]))
            lines += ["", f"achieved rates strictly increasing: {fmt(mono)}", ""]
    if sweeps:
        lines += ["## amplitude sweeps", ""]
        for s in sweeps:
            lines += [
                f"sweep in {s['dir']} ({s['mode']}), chi-to-size ratios:", "",
                "| amplitude | ratio |", "| --- | --- |",
            ]
            lines += [
                f"| {fmt(float(a))} | {fmt(_as_float(r))} |"
                for a, r in zip(s["amplitudes"], s["ratios"])
            ]
            lines += ["", f"largest/smallest ratio: {fmt(_as_float(s['ratio_spread']))}", ""]

    report_path = os.path.join(out, "report.md")
    with open(report_path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    art.save_json(os.path.join(out, "report.json"),
                  {"kind": "report", "runs": runs, "sweeps": sweeps})
    print(f"report: {len(runs)} run(s), {len(sweeps)} sweep(s) -> {report_path}")
    return EXIT_OK


def _as_float(v):
    if v is None:
        return float("nan")
    if isinstance(v, str):
        return float(v)
    return float(v)


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="flowstab",
        description="feedback stabilization pipeline for a wall-bounded "
                    "incompressible flow",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        p.add_argument("--config", required=config_required,
                       help="flat key=value configuration file")
        p.add_argument("--out", default=None, help="artifact directory")

    p = sub.add_parser("steady", help="solve the forced equilibrium")
    common(p)
    p.set_defaults(func=cmd_steady)

    p = sub.add_parser("spectrum", help="decompose the shifted linearization")
    common(p)
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("synthesize", help="choose actuators and place poles")
    common(p)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("simulate", help="march the dynamics, record norms")
    common(p)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--mode", default=None,
                   choices=("open", "linear", "nonlinear", "original"))
    p.add_argument("--sweep", type=int, default=None,
                   help="run this many amplitudes over one decade in parallel")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="tabulate decay rates from artifacts")
    common(p, config_required=False)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except SpectralAmbiguityError as exc:
        print(f"flowstab {args.command}: ambiguous spectrum: {exc}",
              file=sys.stderr)
        if getattr(exc, "suggested_tau", None):
            print(
                f"flowstab {args.command}: retry with spectrum.tau_eig = "
                f"{exc.suggested_tau:.3e}",
                file=sys.stderr,
            )
        return EXIT_AMBIGUOUS
    except BiorthogonalityError as exc:
        print(f"flowstab {args.command}: {exc}", file=sys.stderr)
        return EXIT_AMBIGUOUS
    except (SynthesisError, PlacementError) as exc:
        print(f"flowstab {args.command}: {exc}", file=sys.stderr)
        return EXIT_SYNTHESIS
    except (ConfigError, ArtifactError, SteadyStateError) as exc:
        print(f"flowstab {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

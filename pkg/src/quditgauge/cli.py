"""Batch front door: run configurations in, deterministic CSV/JSON out.

Exit codes: 0 success, 2 configuration error, 3 numerical failure,
4 dense-dimension cap exceeded.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__, fixtures, measure, model, oracle, varsim
from .config import ConfigError, RunConfig, config_hash, load_config
from .model import CapError

EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_CAP = 4


def _fmt(x: float, precision: int = 17) -> str:
    return format(float(x), f".{precision}g")


def _write_csv(path: Path, header: list[str], rows: list[list[float]], cfg_hash: str, precision: int):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# quditgauge {__version__} config={cfg_hash}\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x, precision) for x in row) + "\n")


def _write_json(path: Path, payload: dict):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _out_dir(cfg: RunConfig, override: str | None) -> Path:
    path = Path(override) if override else Path(cfg.output.directory)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _site_headers(count: int, prefix: str = "n") -> list[str]:
    return [f"{prefix}_{s}" for s in range(count)]


def cmd_ground(cfg: RunConfig, out_override: str | None) -> int:
    if cfg.evolution.mode != "vite":
        raise ConfigError("the ground command requires evolution.mode = 'vite'")
    records, ctx = varsim.run_ground_search(cfg)
    cfg_hash = config_hash(cfg)
    out = _out_dir(cfg, out_override)
    nsites = records[0].site_numbers.size
    header = ["step", "tau", "energy", "fidelity", "entropy"] + _site_headers(nsites) + [
        "grad_norm",
        "m_cond",
    ]
    rows = [
        [r.step, r.time, r.energy, r.fidelity, r.entropy, *r.site_numbers, r.grad_norm, r.m_cond]
        for r in records
    ]
    _write_csv(out / "trajectory.csv", header, rows, cfg_hash, cfg.output.precision)
    final = records[-1]
    _write_json(
        out / "final.json",
        {
            "version": __version__,
            "config_hash": cfg_hash,
            "steps_run": final.step,
            "tau": final.time,
            "energy": final.energy,
            "fidelity": final.fidelity,
            "entropy": final.entropy,
            "grad_norm": final.grad_norm,
            "ground_energy": ctx.spectrum.ground_energy,
            "theta": [float(x) for x in final.theta],
        },
    )
    return 0


def cmd_quench(cfg: RunConfig, out_override: str | None) -> int:
    if cfg.evolution.mode != "vrte":
        raise ConfigError("the quench command requires evolution.mode = 'vrte'")
    records, exact_rows, ctx = varsim.run_quench(cfg)
    cfg_hash = config_hash(cfg)
    out = _out_dir(cfg, out_override)
    nsites = records[0].site_numbers.size
    header = (
        ["step", "t", "energy", "fidelity", "entropy"]
        + _site_headers(nsites)
        + _site_headers(nsites, "exact_n")
        + ["exact_entropy", "grad_norm", "m_cond"]
    )
    rows = []
    for rec, ex in zip(records, exact_rows):
        rows.append(
            [
                rec.step,
                rec.time,
                rec.energy,
                rec.fidelity,
                rec.entropy,
                *rec.site_numbers,
                *ex["numbers"],
                ex["entropy"],
                rec.grad_norm,
                rec.m_cond,
            ]
        )
    _write_csv(out / "trajectory.csv", header, rows, cfg_hash, cfg.output.precision)
    final = records[-1]
    _write_json(
        out / "final.json",
        {
            "version": __version__,
            "config_hash": cfg_hash,
            "steps_run": final.step,
            "t": final.time,
            "energy": final.energy,
            "fidelity": final.fidelity,
            "entropy": final.entropy,
            "designated_site": varsim.designated_site(cfg),
            "theta": [float(x) for x in final.theta],
        },
    )
    return 0


def cmd_exact(cfg: RunConfig, out_override: str | None) -> int:
    ctx = varsim.RunContext.from_config(cfg)
    cfg_hash = config_hash(cfg)
    out = _out_dir(cfg, out_override)
    spec = ctx.spectrum
    _write_json(
        out / "spectrum.json",
        {
            "version": __version__,
            "config_hash": cfg_hash,
            "dimension": int(spec.eigenvalues.size),
            "ground_energy": spec.ground_energy,
            "ground_multiplicity": spec.ground_multiplicity(),
            "lowest_eigenvalues": [float(w) for w in spec.eigenvalues[:10]],
        },
    )
    ev = cfg.evolution
    nsites = ctx.n_diags.shape[0]
    header = ["step", "t", "energy"] + _site_headers(nsites) + ["entropy"]
    rows = []
    from .core import QuditRegister, entanglement_entropy

    energy0 = float(np.vdot(ctx.psi0.amplitudes, ctx.ham @ ctx.psi0.amplitudes).real)
    for k in range(ev.steps + 1):
        t = k * ev.dt
        psi = oracle.evolve_real(spec, ctx.psi0.amplitudes, t)
        probs = np.abs(psi) ** 2
        ent = entanglement_entropy(
            QuditRegister(ctx.psi0.num_qudits, ctx.psi0.local_dim, psi), ctx.cut
        )
        rows.append([k, t, energy0, *(ctx.n_diags @ probs), ent])
    _write_csv(out / "exact.csv", header, rows, cfg_hash, cfg.output.precision)
    return 0


def cmd_measure_check(cfg: RunConfig, out_override: str | None) -> int:
    ctx = varsim.RunContext.from_config(cfg)
    if ctx.psi0.dim > 243:
        raise ConfigError("measure-check is meant for small models (L=3 or the plaquette)")
    cfg_hash = config_hash(cfg)
    out = _out_dir(cfg, out_override)
    circuit, psi0 = ctx.circuit, ctx.psi0
    from .ansatz import random_initial_params

    theta = random_initial_params(circuit, cfg.ansatz.init_seed, cfg.ansatz.init_range)
    pieces = model.hamiltonian_unitary_pieces(ctx.ham_spec)
    shots = cfg.estimator.shots or 10_000
    seed = cfg.estimator.seed

    exact = varsim.exact_eom(circuit, theta, ctx.ham, psi0, "imag")
    v_real = varsim.real_time_vector(circuit, theta, ctx.ham, psi0)
    npar = circuit.num_params
    header = [
        "kind",
        "mu",
        "nu",
        "exact",
        "shift",
        "hadamard",
        "shift_shots",
        "hadamard_shots",
        "hadamard_tests",
    ]
    rows: list[list[float]] = []
    max_dev = {"shift": 0.0, "hadamard": 0.0}

    def track(route: str, dev: float):
        max_dev[route] = max(max_dev[route], dev)

    for mu in range(npar):
        for nu in range(mu, npar):
            ex = exact.m[mu, nu]
            sh = measure.metric_from_shifts(circuit, theta, mu, nu, psi0)
            ha = measure.element_from_hadamard("M", circuit, theta, mu, nu, None, psi0)
            sh_s = measure.metric_from_shifts(circuit, theta, mu, nu, psi0, shots, seed)
            ha_s = measure.element_from_hadamard("M", circuit, theta, mu, nu, None, psi0, shots, seed)
            ntests = len(measure.slot_unitary_pieces(circuit, mu)) * len(
                measure.slot_unitary_pieces(circuit, nu)
            )
            rows.append([0, mu, nu, ex, sh, ha, sh_s, ha_s, ntests])
            track("shift", abs(sh - ex))
            track("hadamard", abs(ha - ex))
    for mu in range(npar):
        ex = exact.v[mu]
        sh = measure.gradient_from_shifts(circuit, theta, mu, ctx.spectrum, psi0)
        ha = measure.element_from_hadamard("VI", circuit, theta, mu, None, pieces, psi0)
        sh_s = measure.gradient_from_shifts(circuit, theta, mu, ctx.spectrum, psi0, shots, seed)
        ha_s = measure.element_from_hadamard("VI", circuit, theta, mu, None, pieces, psi0, shots, seed)
        ntests = len(measure.slot_unitary_pieces(circuit, mu)) * len(pieces)
        rows.append([1, mu, -1, ex, sh, ha, sh_s, ha_s, ntests])
        track("shift", abs(sh - ex))
        track("hadamard", abs(ha - ex))
    for mu in range(npar):
        ex = v_real[mu]
        ha = measure.element_from_hadamard("VR", circuit, theta, mu, None, pieces, psi0)
        ha_s = measure.element_from_hadamard("VR", circuit, theta, mu, None, pieces, psi0, shots, seed)
        ntests = len(measure.slot_unitary_pieces(circuit, mu)) * len(pieces)
        rows.append([2, mu, -1, ex, float("nan"), ha, float("nan"), ha_s, ntests])
        track("hadamard", abs(ha - ex))
    _write_csv(out / "measure_check.csv", header, rows, cfg_hash, cfg.output.precision)
    _write_json(
        out / "measure_summary.json",
        {
            "version": __version__,
            "config_hash": cfg_hash,
            "max_abs_dev_shift": max_dev["shift"],
            "max_abs_dev_hadamard": max_dev["hadamard"],
            "shots": shots,
            "kinds": {"0": "M", "1": "VI", "2": "VR"},
        },
    )
    return 0


def cmd_info(cfg: RunConfig) -> int:
    ctx = varsim.RunContext.from_config(cfg)
    print(ctx.circuit.describe())
    census: dict[int, int] = {}
    for _, op in ctx.ham_spec.terms:
        census[len(op.targets)] = census.get(len(op.targets), 0) + 1
    print(f"hamiltonian terms by support size: {dict(sorted(census.items()))}")
    print(f"parameters: {ctx.circuit.num_params}")
    print(f"entangling gates: {ctx.circuit.entangling_count()}")
    print(f"config hash: {config_hash(cfg)}")
    return 0


def cmd_bootstrap(write: bool) -> int:
    if write:
        path = fixtures.write_fixtures()
        print(f"wrote {path}")
        return 0
    drifted = fixtures.verify_fixtures()
    if drifted:
        for line in drifted:
            print(f"DRIFT {line}")
        return EXIT_NUMERICAL
    print("fixtures verified")
    return 0


def _apply_overrides(cfg: RunConfig, seed: int | None) -> RunConfig:
    if seed is None:
        return cfg
    return dataclasses.replace(
        cfg,
        ansatz=dataclasses.replace(cfg.ansatz, init_seed=seed),
        estimator=dataclasses.replace(cfg.estimator, seed=seed),
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="quditgauge", description=__doc__)
    parser.add_argument(
        "command",
        choices=["ground", "quench", "exact", "measure-check", "info", "bootstrap-fixtures"],
    )
    parser.add_argument("--config", help="path to the JSON run configuration")
    parser.add_argument("--out", help="output directory override")
    parser.add_argument("--seed", type=int, help="override the ansatz and estimator seeds")
    parser.add_argument("--write", action="store_true", help="bootstrap: rewrite the fixture file")
    args = parser.parse_args(argv)

    try:
        if args.command == "bootstrap-fixtures":
            return cmd_bootstrap(args.write)
        if not args.config:
            raise ConfigError("--config is required for this command")
        cfg = _apply_overrides(load_config(args.config), args.seed)
        if args.command == "ground":
            return cmd_ground(cfg, args.out)
        if args.command == "quench":
            return cmd_quench(cfg, args.out)
        if args.command == "exact":
            return cmd_exact(cfg, args.out)
        if args.command == "measure-check":
            return cmd_measure_check(cfg, args.out)
        return cmd_info(cfg)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapError as exc:
        print(f"dimension cap: {exc}", file=sys.stderr)
        return EXIT_CAP
    except (np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())

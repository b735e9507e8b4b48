"""Reproduction driver: one subcommand per experiment, config in, CSV + manifest out.

Every experiment writes a manifest.json (resolved config, tool version, gate
counts, wall time) plus one or more CSV files whose bodies are byte-identical
across re-runs of the same config and seed. Passing a previously written
manifest as --config re-runs it. The QEDVQE_WORKERS environment variable
sizes the worker pool for sweep points; output ordering is canonical
regardless of scheduling.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import csv
import functools
import json
import os
import sys
import time
import zlib
from pathlib import Path

import numpy as np

from . import __version__
from . import analysis, builders, estimate, noise, postselect, qcore, sim

CSV_SCHEMA_VERSION = 1

EXPERIMENTS = (
    "scan",
    "sweep-depol",
    "table2",
    "fidelity-sweep",
    "logical-error",
    "stateprep",
    "red-pipeline",
    "budget",
    "hqc",
    "coeffs",
)

EXIT_OK = 0
EXIT_BAD_CONFIG = 2
EXIT_EMPTY_SELECTION = 3


class ConfigError(ValueError):
    pass


def _require(cfg: dict, key: str, default=None):
    if key in cfg:
        return cfg[key]
    if default is not None:
        return default
    raise ConfigError(f"missing required config key {key!r}")


def _sub_seed(master: int, tag: str) -> int:
    """Deterministic per-run stream id mixed from the master seed and a label."""
    return (int(master) ^ (zlib.crc32(tag.encode()) << 20)) % (2**63)


def _worker_count() -> int:
    try:
        return max(1, int(os.environ.get("QEDVQE_WORKERS", "1")))
    except ValueError:
        return 1


def _pmap(fn, items):
    if _worker_count() <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with concurrent.futures.ProcessPoolExecutor(max_workers=_worker_count()) as pool:
        return list(pool.map(fn, items))


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _parse_noise(cfg: dict):
    spec = cfg.get("noise", {"kind": "depolarizing", "p2": 0.0})
    kind = spec.get("kind", "depolarizing")
    if kind == "depolarizing":
        return noise.DepolarizingParams(
            p2=float(spec.get("p2", 0.0)),
            p1=None if spec.get("p1") is None else float(spec["p1"]),
        )
    if kind == "device":
        params = dict(noise.H11E_PARAMS)
        params.update({k: v for k, v in spec.items() if k != "kind"})
        return noise.device_model_from_config(params)
    raise ConfigError(f"unknown noise kind {kind!r}")


def _ham(cfg: dict) -> estimate.H2Hamiltonian:
    g = cfg.get("hamiltonian")
    if g is None:
        return estimate.default_h2()
    return estimate.H2Hamiltonian(*(float(g[k]) for k in ("g0", "g1", "g2", "g3", "g4")))


# ---------------------------------------------------------------------------
# shared pipelines
# ---------------------------------------------------------------------------

ENERGY_HEADER = (
    "label", "energy_mHa", "sem_mHa", "variance_Ha2",
    "eta_Z", "eta_X", "sigma_eta_Z", "sigma_eta_X", "n_Z", "n_X", "seed",
)


def _sample_both_bases(build, model, shots, seed, tag, max_qubits=20):
    tables = {}
    for basis in ("Z", "X"):
        circ = build(basis)
        nc = noise.attach_noise(circ, model)
        run_seed = _sub_seed(seed, f"{tag}/{basis}")
        table = sim.sample_shots_batched(nc, sim.TrajectoryConfig(shots, run_seed, max_qubits))
        table.basis = basis
        tables[basis] = table
    return tables


def _unencoded_row(ham, model, shots, seed, theta, tag="unencoded", red=False):
    def build(basis):
        circ = builders.build_unencoded_ansatz(theta, basis)
        return builders.wrap_with_red(circ)[0] if red else circ

    tables = _sample_both_bases(build, model, shots, seed, tag)
    etas, stats = {}, {}
    if red:
        layout = builders.wrap_with_red(builders.build_unencoded_ansatz(theta, "Z"))[1]
        for b in "ZX":
            tables[b], stats[b] = postselect.red_vote(tables[b], layout)
            etas[b] = stats[b].eta
    else:
        for b in "ZX":
            etas[b] = 1.0
            stats[b] = postselect.SurvivalStats.of(tables[b].n_shots, tables[b].n_shots)
    est = estimate.energy_from_shots(tables["Z"], tables["X"], ham, mode="unencoded", eta=etas)
    return (
        "unencoded" + ("+red" if red else ""), est.mean * 1e3, est.sem * 1e3, est.variance,
        etas["Z"], etas["X"], stats["Z"].sigma_eta, stats["X"].sigma_eta,
        est.n_used["Z"], est.n_used["X"], seed,
    ), est


def _encoded_rows(ham, model, shots, seed, theta, strategies, red=False, tag="encoded"):
    def build(basis):
        circ = builders.build_encoded_ansatz(theta, basis)
        return builders.wrap_with_red(circ)[0] if red else circ

    tables = _sample_both_bases(build, model, shots, seed, tag + ("+red" if red else ""))
    red_eta = {"Z": 1.0, "X": 1.0}
    if red:
        layout = builders.wrap_with_red(builders.build_encoded_ansatz(theta, "Z"))[1]
        for b in "ZX":
            tables[b], st = postselect.red_vote(tables[b], layout)
            red_eta[b] = st.eta
    branch = {b: postselect.select_a2_branch(tables[b], 0) for b in "ZX"}
    rows, ests = [], {}
    for kind in strategies:
        strat = postselect.Strategy(kind)
        sel, stats = {}, {}
        for b in "ZX":
            sel[b], stats[b] = postselect.apply_strategy(branch[b], strat)
        etas = {b: stats[b].eta for b in "ZX"}
        est = estimate.energy_from_shots(sel["Z"], sel["X"], ham, mode="encoded", eta=etas)
        name = "encoded" + ("+red" if red else "") + "/" + kind
        rows.append((
            name, est.mean * 1e3, est.sem * 1e3, est.variance,
            etas["Z"], etas["X"], stats["Z"].sigma_eta, stats["X"].sigma_eta,
            est.n_used["Z"], est.n_used["X"], seed,
        ))
        ests[kind] = (est, red_eta)
    return rows, ests


def _density_strategy_energy(ham, model, theta, kind):
    """Infinite-shot energy of a projected encoded state (Z-basis circuit)."""
    circ = builders.build_encoded_ansatz(theta, "Z")
    rho = sim.evolve_density(noise.attach_noise(circ, model))
    if kind == "NONE":
        rho_sel = analysis.project_qubit(rho, 5, 0)
    else:
        rho_sel = analysis.project_state(rho, {"PSA": "PI_A", "PSP": "PI_P", "PSAP": "PI_AP"}[kind])
    return qcore.expectation(rho_sel, ham.logical_matrix())


def shot_limit_estimates(ham, model, theta, strategies=("NONE", "PSA", "PSP", "PSAP")):
    """Infinite-shot limit of the shot pipeline: exact outcome distributions
    pushed through the same selection rules and parity estimators.

    Unlike the projected-density energies, this keeps the measurement's
    phase collapse, so it is the converged value of the sampled estimators.
    Returns {label: (EnergyEstimate, eta_by_basis)} including 'unencoded'.
    """
    out = {}
    lay2 = sim.MeasurementLayout.of(builders.build_unencoded_ansatz(theta, "Z"))
    dists = {
        b: sim.born_distribution(
            sim.evolve_density(noise.attach_noise(builders.build_unencoded_ansatz(theta, b), model)),
            getattr(model, "readout", noise.ReadoutParams()),
        )
        for b in "ZX"
    }
    out["unencoded"] = (
        estimate.energy_from_distributions(dists["Z"], dists["X"], lay2, ham, "unencoded"),
        {"Z": 1.0, "X": 1.0},
    )
    lay6 = sim.MeasurementLayout.of(builders.build_encoded_ansatz(theta, "Z"))
    branch = {}
    for b in "ZX":
        probs = sim.born_distribution(
            sim.evolve_density(noise.attach_noise(builders.build_encoded_ansatz(theta, b), model)),
            getattr(model, "readout", noise.ReadoutParams()),
        )
        branch[b], _ = postselect.select_a2_probs(probs, lay6, 0)
    for kind in strategies:
        sel, etas = {}, {}
        for b in "ZX":
            sel[b], etas[b] = postselect.apply_strategy_probs(branch[b], lay6, postselect.Strategy(kind))
        est = estimate.energy_from_distributions(sel["Z"], sel["X"], lay6, ham, "encoded", eta=etas)
        out[f"encoded/{kind}"] = (est, etas)
    return out


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------


def exp_scan(cfg: dict):
    ham = _ham(cfg)
    model = _parse_noise(cfg)
    n_points = int(cfg.get("points", 150))
    seed = int(cfg.get("seed", 0))
    encoded = bool(cfg.get("encoded", False))

    def runner(theta: float) -> estimate.EnergyEstimate:
        if encoded:
            circ = builders.build_encoded_ansatz(theta, "Z")
            rho = sim.evolve_density(noise.attach_noise(circ, model))
            rho = analysis.project_qubit(rho, 5, 0)
            obs = ham.logical_matrix()
            words = ("IZZIII", "IZIZII", "IIZZII", "IIXXII")
        else:
            circ = builders.build_unencoded_ansatz(theta, "Z")
            rho = sim.evolve_density(noise.attach_noise(circ, model))
            obs = ham.matrix()
            words = ("ZI", "IZ", "ZZ", "XX")
        mean = qcore.expectation(rho, obs)
        gs = (ham.g1, ham.g2, ham.g3, ham.g4)
        var = sum(
            g * g * max(0.0, 1.0 - qcore.expectation(rho, qcore.pauli_word(w)) ** 2)
            for g, w in zip(gs, words)
        )
        return estimate.EnergyEstimate(mean, var, 0.0, {"Z": 0, "X": 0})

    theta_min, curve = estimate.scan_theta(runner, n_points)
    rows = [
        (theta, est.mean, est.sem, est.variance, est.eta["Z"], est.eta["X"], seed)
        for theta, est in curve
    ]
    header = ("theta_rad", "mean_Ha", "sem_Ha", "variance_Ha2", "eta_Z", "eta_X", "seed")
    summary = f"theta_min = {theta_min!r}  E(theta_min) = {min(e.mean for _, e in curve)!r} Ha"
    return {"scan.csv": (header, rows)}, {"theta_min": theta_min}, summary


def exp_table2(cfg: dict):
    ham = _ham(cfg)
    # the comparison table is defined at the chemical-accuracy threshold noise
    model = _parse_noise(cfg) if "noise" in cfg else noise.DepolarizingParams(p2=0.0009)
    shots = int(cfg.get("shots", 200000))
    seed = int(cfg.get("seed", 0))
    theta = float(cfg.get("theta", estimate.THETA_STAR))
    strategies = list(cfg.get("strategies", ["NONE", "PSA", "PSP", "PSAP"]))

    rows = []
    row, _ = _unencoded_row(ham, model, shots, seed, theta)
    rows.append(row)
    enc_rows, _ = _encoded_rows(ham, model, shots, seed, theta, strategies)
    rows.extend(enc_rows)
    density = [
        ("density/unencoded", 1e3 * qcore.expectation(
            sim.evolve_density(noise.attach_noise(builders.build_unencoded_ansatz(theta, "Z"), model)),
            ham.matrix(),
        ), seed)
    ]
    density += [
        (f"density/{kind}", 1e3 * _density_strategy_energy(ham, model, theta, kind), seed)
        for kind in strategies
    ]
    summary = "\n".join(f"{r[0]:20s} {r[1]:9.2f} mHa  eta_Z={100 * r[4]:.3f}%" for r in rows)
    return {
        "table2.csv": (ENERGY_HEADER, rows),
        "table2_density.csv": (("label", "energy_mHa", "seed"), density),
    }, {}, summary


def exp_sweep_depol(cfg: dict):
    ham = _ham(cfg)
    shots = int(cfg.get("shots", 20000))
    seed = int(cfg.get("seed", 0))
    theta = float(cfg.get("theta", estimate.THETA_STAR))
    grid = [float(p) for p in cfg.get("p2_grid", (0.0005, 0.001, 0.002, 0.005, 0.01))]
    strategies = list(cfg.get("strategies", ["NONE", "PSA", "PSP", "PSAP"]))

    point = functools.partial(
        _sweep_point, ham=ham, shots=shots, seed=seed, theta=theta, strategies=strategies
    )
    blocks = _pmap(point, grid)
    rows = [row for block in blocks for row in block]
    header = ("p2",) + ENERGY_HEADER
    return {"sweep_depol.csv": (header, rows)}, {}, f"{len(grid)} noise points x {1 + len(strategies)} rows"


def _sweep_point(p2, ham, shots, seed, theta, strategies):
    model = noise.DepolarizingParams(p2=p2)
    out = []
    row, _ = _unencoded_row(ham, model, shots, seed, theta, tag=f"p2={p2!r}/unenc")
    out.append((p2,) + row)
    enc, _ = _encoded_rows(ham, model, shots, seed, theta, strategies, tag=f"p2={p2!r}/enc")
    out.extend((p2,) + r for r in enc)
    return out


ANALYSIS_HEADER = (
    "p2", "F_unenc", "F_enc", "F_A", "F_P", "F_AP",
    "p_eps_all", "p_eps_NL", "p_eps_L", "p_eps_A", "seed",
)


def _analysis_point(p2, theta, seed):
    model = noise.DepolarizingParams(p2=p2)
    rho_u = sim.evolve_density(noise.attach_noise(builders.build_unencoded_ansatz(theta, "Z"), model))
    rho_e = sim.evolve_density(noise.attach_noise(builders.build_encoded_ansatz(theta, "Z"), model))
    ideal_u = builders.unencoded_target_state(theta).outer()
    ideal_full = builders.encoded_target_state(theta).outer()
    ideal_branch = builders.encoded_branch_state(theta, 0).outer()
    f_unenc = analysis.fidelity(ideal_u, rho_u)
    f_enc = analysis.fidelity(ideal_full, rho_e)
    f_proj = {
        kind: analysis.fidelity(ideal_branch, analysis.project_state(rho_e, kind))
        for kind in ("PI_A", "PI_P", "PI_AP")
    }
    report = analysis.logical_error_report(analysis.project_qubit(rho_e, 5, 0), ideal_branch)
    return (
        p2, f_unenc, f_enc, f_proj["PI_A"], f_proj["PI_P"], f_proj["PI_AP"],
        report.p_eps_all, report.p_eps_NL, report.p_eps_L, report.p_eps_A, seed,
    )


def _analysis_rows(cfg: dict):
    theta = float(cfg.get("theta", estimate.THETA_STAR))
    seed = int(cfg.get("seed", 0))
    grid = [float(p) for p in cfg.get("p2_grid", (0.001, 0.005, 0.01, 0.02, 0.05, 0.10))]
    point = functools.partial(_analysis_point, theta=theta, seed=seed)
    return _pmap(point, grid)


def exp_fidelity_sweep(cfg: dict):
    rows = _analysis_rows(cfg)
    return {"fidelity_sweep.csv": (ANALYSIS_HEADER, rows)}, {}, f"{len(rows)} noise points"


def exp_logical_error(cfg: dict):
    rows = _analysis_rows(cfg)
    return {"logical_error.csv": (ANALYSIS_HEADER, rows)}, {}, f"{len(rows)} noise points"


def exp_stateprep(cfg: dict):
    seed = int(cfg.get("seed", 0))
    grid = [float(p) for p in cfg.get("p2_grid", (0.001, 0.005, 0.01, 0.02, 0.05, 0.10))]
    rows = []
    ideal = builders.prep_target_state().outer()
    for p2 in grid:
        model = noise.DepolarizingParams(p2=p2)
        rho = sim.evolve_density(noise.attach_noise(builders.build_state_prep_422(True), model))
        f_raw = analysis.fidelity(ideal, rho)
        f = {
            kind: analysis.fidelity(ideal, analysis.project_state(rho, kind))
            for kind in ("S_A", "S_P", "S_AP")
        }
        rows.append((p2, f_raw, f["S_A"], f["S_P"], f["S_AP"], seed))
    header = ("p2", "F_prep", "F_S_A", "F_S_P", "F_S_AP", "seed")
    return {"stateprep.csv": (header, rows)}, {}, f"{len(rows)} noise points"


def exp_red_pipeline(cfg: dict):
    """Device-model comparison of the four study rows, with and without RED."""
    ham = _ham(cfg)
    model = _parse_noise({"noise": cfg.get("noise", {"kind": "device"})})
    if not isinstance(model, noise.DeviceModel):
        raise ConfigError("red-pipeline expects a device noise model")
    shots = int(cfg.get("shots", 20000))
    seed = int(cfg.get("seed", 0))
    theta = float(cfg.get("theta", estimate.THETA_STAR))
    exact = -1.13712

    rows = []
    for red in (False, True):
        row, est = _unencoded_row(ham, model, shots, seed, theta, tag=f"unenc/red={red}", red=red)
        rows.append(row + (1e3 * abs(est.mean - exact), row[4]))
        enc, ests = _encoded_rows(ham, model, shots, seed, theta, ["PSAP"], red=red)
        est, red_eta = ests["PSAP"]
        a2_frac = 0.5  # reported survival is relative to the raw total
        overall = red_eta["Z"] * a2_frac * est.eta["Z"]
        rows.append(enc[0] + (1e3 * abs(est.mean - exact), overall))
    header = ENERGY_HEADER + ("delta_mHa", "eta_overall_Z")
    summary = "\n".join(f"{r[0]:22s} {r[1]:9.2f} mHa  delta={r[-2]:.2f}  eta={100 * r[-1]:.1f}%" for r in rows)
    return {"red_pipeline.csv": (header, rows)}, {}, summary


def exp_budget(cfg: dict):
    variance = float(cfg.get("variance", 0.04700))
    target = float(cfg.get("target_sem", 0.0005))
    shots = estimate.shot_budget(variance, target)
    header = ("variance_Ha2", "target_sem_Ha", "shots")
    return {"budget.csv": (header, [(variance, target, shots)])}, {"shots": shots}, str(shots)


def exp_hqc(cfg: dict):
    """Device-credit costs for the study circuits; counts are this package's

    constructions, not the published post-transpilation table, and are never
    asserted against it."""
    shots = int(cfg.get("shots", 188000))
    theta = float(cfg.get("theta", estimate.THETA_STAR))
    circuits = {
        "unencoded/Z": builders.build_unencoded_ansatz(theta, "Z"),
        "unencoded/X": builders.build_unencoded_ansatz(theta, "X"),
        "encoded/Z": builders.build_encoded_ansatz(theta, "Z"),
        "encoded/X": builders.build_encoded_ansatz(theta, "X"),
        "unencoded+red/Z": builders.wrap_with_red(builders.build_unencoded_ansatz(theta, "Z"))[0],
        "encoded+red/Z": builders.wrap_with_red(builders.build_encoded_ansatz(theta, "Z"))[0],
    }
    rows = []
    for label, circ in circuits.items():
        rc = estimate.ResourceCount.of_circuit(circ, shots)
        rows.append((label, rc.n_1q, rc.n_2q, rc.n_meas, shots, estimate.hqc_cost(rc)))
    header = ("circuit", "n_1q", "n_2q", "n_meas", "shots", "hqc_credits")
    return {"hqc.csv": (header, rows)}, {}, f"{len(rows)} circuits at {shots} shots"


def exp_coeffs(cfg: dict):
    ints_cfg = _require(cfg, "integrals")
    ints = estimate.Integrals(**{k: float(v) for k, v in ints_cfg.items()})
    g = estimate.integrals_to_coeffs(ints)
    header = ("g0", "g1", "g2", "g3", "g4")
    return {"coeffs.csv": (header, [g])}, {"coeffs": list(g)}, " ".join(repr(v) for v in g)


RUNNERS = {
    "scan": exp_scan,
    "sweep-depol": exp_sweep_depol,
    "table2": exp_table2,
    "fidelity-sweep": exp_fidelity_sweep,
    "logical-error": exp_logical_error,
    "stateprep": exp_stateprep,
    "red-pipeline": exp_red_pipeline,
    "budget": exp_budget,
    "hqc": exp_hqc,
    "coeffs": exp_coeffs,
}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------


def _gate_counts(theta: float):
    out = {}
    for label, circ in (
        ("unencoded/Z", builders.build_unencoded_ansatz(theta, "Z")),
        ("unencoded/X", builders.build_unencoded_ansatz(theta, "X")),
        ("encoded/Z", builders.build_encoded_ansatz(theta, "Z")),
        ("encoded/X", builders.build_encoded_ansatz(theta, "X")),
        ("encoded+red/Z", builders.wrap_with_red(builders.build_encoded_ansatz(theta, "Z"))[0]),
    ):
        n1, n2, nm = circ.gate_counts()
        out[label] = {"n_1q": n1, "n_2q": n2, "n_meas": nm}
    return out


def run(config: dict, out_dir) -> int:
    """Run one experiment; writes manifest + CSVs, returns a process exit code."""
    out = Path(out_dir)
    experiment = config.get("experiment")
    if experiment not in RUNNERS:
        print(f"error: unknown or missing experiment {experiment!r}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    config.setdefault("seed", 0)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    try:
        tables, extra, summary = RUNNERS[experiment](config)
    except (ConfigError, KeyError, TypeError, ValueError) as exc:
        print(f"error: invalid config: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except postselect.EmptySelectionError as exc:
        print(f"error: empty post-selection: {exc}", file=sys.stderr)
        write_csv(out / "empty_selection.csv", ("experiment", "eta", "seed"),
                  [(experiment, 0.0, config["seed"])])
        return EXIT_EMPTY_SELECTION
    for name, (header, rows) in tables.items():
        write_csv(out / name, header, rows)
    manifest = {
        "tool": "qedvqe",
        "version": __version__,
        "experiment": experiment,
        "config": config,
        "seed": config["seed"],
        "csv_schema_version": CSV_SCHEMA_VERSION,
        "outputs": sorted(tables.keys()),
        "gate_counts": _gate_counts(float(config.get("theta", estimate.THETA_STAR))),
        "wall_time_s": round(time.time() - started, 3),
    }
    manifest.update(extra)
    with open(out / "manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(summary)
    print(f"wrote {', '.join(sorted(tables))} and manifest.json to {out}")
    return EXIT_OK


def load_config(path) -> dict:
    with open(path) as fh:
        raw = json.load(fh)
    # a manifest is itself a valid config carrier
    if "tool" in raw and isinstance(raw.get("config"), dict):
        return raw["config"]
    return raw


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qedvqe",
        description="Noisy error-detected VQE simulations for molecular hydrogen",
    )
    parser.add_argument("experiment", choices=EXPERIMENTS)
    parser.add_argument("--config", help="JSON config (or a previously written manifest)")
    parser.add_argument("--seed", type=int, help="master RNG seed (overrides config)")
    parser.add_argument("--shots", type=int, help="shot count (overrides config)")
    parser.add_argument("--out", default="out", help="output directory")
    args = parser.parse_args(argv)

    config = load_config(args.config) if args.config else {}
    config["experiment"] = args.experiment
    if args.seed is not None:
        config["seed"] = args.seed
    if args.shots is not None:
        config["shots"] = args.shots
    return run(config, args.out)


if __name__ == "__main__":
    sys.exit(main())

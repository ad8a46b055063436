"""Command-line interface.

Subcommands
-----------
gain       write the amplifier gain curve over the configured detuning grid
simulate   synthesize states and write the full trace acquisition per detuning
fit        reconstruct a covariance matrix from a trace manifest
witness    evaluate entanglement witnesses on a stored covariance
sweep      emit witness/imbalance curves versus detuning (plot-ready CSVs)

All results go to files under ``--out``; stdout carries no data (progress and
diagnostics are logged to stderr, so commands compose in pipelines).

Exit codes
----------
0  success
2  bad command line (argparse)
3  fit was underdetermined (traces do not constrain all 36 entries)
4  fit hit the iteration limit before converging
5  input file missing or unparsable (message names file and line)
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import io as tsio
from .cavity import CavityParams, default_grid, simulate_traces
from .fwm import FwmParams, TabulatedGainProfile, reference_fwm_params
from .fwm import synthesize_state
from .gaussian import vacuum_covariance
from .reconstruction import FitConfig, fit_covariance, pack_entries
from .witnesses import emulate_homodyne, witness_records

log = logging.getLogger("twinspec")

EXIT_OK = 0
EXIT_UNDERDETERMINED = 3
EXIT_MAX_ITERATIONS = 4
EXIT_PARSE_ERROR = 5

_SCENARIOS = ("resonator", "homodyne_emulated")


@dataclass
class RunConfig:
    """Resolved run configuration (file values + command-line overrides)."""

    fwm: FwmParams
    cavity: CavityParams
    delta_grid_hz: np.ndarray
    trace_grid: np.ndarray
    scenarios: tuple[str, ...] = _SCENARIOS
    noise_sigma: float = 0.0
    seed: int | None = None
    out_dir: Path = Path(".")
    gain_table: TabulatedGainProfile | None = None

    @property
    def profile(self):
        """Gain profile used for synthesis: table when given, else Lorentzian."""
        return self.gain_table if self.gain_table is not None else self.fwm


def _parse_grid(obj, default: np.ndarray) -> np.ndarray:
    if obj is None:
        return default
    if isinstance(obj, dict):
        start = obj.get("start_hz", obj.get("start"))
        stop = obj.get("stop_hz", obj.get("stop"))
        return np.linspace(float(start), float(stop), int(obj["num"]))
    grid = np.asarray(obj, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be non-empty")
    return grid


def load_run_config(path=None) -> RunConfig:
    payload = {}
    if path is not None:
        payload = json.loads(Path(path).read_text())
    fwm = (
        FwmParams(**payload["fwm"]) if "fwm" in payload else reference_fwm_params()
    )
    cavity = CavityParams(**payload.get("cavity", {}))
    table = None
    if "gain_table" in payload:
        table = TabulatedGainProfile(
            delta_hz=np.asarray(payload["gain_table"]["delta_hz"], float),
            gains=np.asarray(payload["gain_table"]["gains"], float),
        )
    scenarios = tuple(payload.get("scenarios", _SCENARIOS))
    unknown = set(scenarios) - set(_SCENARIOS)
    if unknown:
        raise ValueError(f"unknown scenarios in config: {sorted(unknown)}")
    return RunConfig(
        fwm=fwm,
        cavity=cavity,
        delta_grid_hz=_parse_grid(
            payload.get("delta_grid_hz"), np.linspace(50e6, 75e6, 26)
        ),
        trace_grid=_parse_grid(payload.get("trace_grid"), default_grid()),
        scenarios=scenarios,
        noise_sigma=float(payload.get("noise_sigma", 0.0)),
        seed=payload.get("seed"),
        out_dir=Path(payload.get("out_dir", ".")),
        gain_table=table,
    )


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def cmd_gain(config: RunConfig, out_dir: Path) -> int:
    grid = config.delta_grid_hz
    gains = np.asarray(config.profile.gain(grid), dtype=float)
    tsio.save_gain_csv(grid, gains, gains - 1.0, out_dir / "gain.csv")
    log.info("wrote %s (%d points)", out_dir / "gain.csv", grid.size)
    return EXIT_OK


def _delta_dir(out_dir: Path, delta_hz: float, multi: bool) -> Path:
    if not multi:
        return out_dir
    sub = out_dir / f"delta_{delta_hz / 1e6:g}MHz"
    sub.mkdir(parents=True, exist_ok=True)
    return sub


def cmd_simulate(config: RunConfig, out_dir: Path, vacuum: bool = False) -> int:
    rng = np.random.default_rng(config.seed)
    deltas = config.delta_grid_hz
    multi = deltas.size > 1
    for delta in deltas:
        if vacuum:
            cov = vacuum_covariance(4)
        else:
            cov = synthesize_state(
                config.profile, omega_hz=config.cavity.omega_hz, delta_hz=float(delta)
            )
        target = _delta_dir(out_dir, float(delta), multi)
        traces = simulate_traces(
            cov, config.cavity, grid=config.trace_grid,
            noise_sigma=config.noise_sigma, rng=rng,
        )
        singles = [t for t in traces if t.kind == "single"]
        crosses = [t for t in traces if t.kind == "cross"]
        tsio.save_traces_csv(singles, target / "singles.csv")
        tsio.save_traces_csv(crosses, target / "cross.csv")
        tsio.save_covariance(cov, target / "truth_covariance.json")
        tsio.save_manifest(
            config.cavity,
            [
                {"path": "singles.csv", "kind": "single"},
                {"path": "cross.csv", "kind": "cross"},
            ],
            target / "manifest.json",
            truth="truth_covariance.json",
        )
        log.info("simulated delta=%.6g Hz -> %s", delta, target)
    return EXIT_OK


def cmd_fit(
    config: RunConfig,
    out_dir: Path,
    manifest_path: Path,
    physicality: str,
    truth_path: Path | None,
) -> int:
    cavity, traces, manifest_truth = tsio.load_manifest(manifest_path)
    result = fit_covariance(traces, cavity, FitConfig(physicality=physicality))
    cov_path = out_dir / "fit_covariance.json"
    tsio.save_covariance(result.covariance, cov_path)

    report = {
        "status": result.status,
        "rank": result.rank,
        "condition_estimate": result.condition_estimate,
        "residual_norm": result.residual_norm,
        "physicality_adjustment": result.physicality_adjustment,
        "n_iterations": result.n_iterations,
        "physical": result.covariance.meta.get("physical"),
        "covariance_path": cov_path.name,
        "max_abs_error_vs_truth": None,
    }
    truth = truth_path if truth_path is not None else manifest_truth
    if truth is not None:
        truth_cov = tsio.load_covariance(truth)
        err = float(
            np.abs(pack_entries(truth_cov.matrix) - result.theta).max()
        )
        report["max_abs_error_vs_truth"] = err
        log.info("max entry error vs truth: %.3e", err)
    (out_dir / "fit_result.json").write_text(json.dumps(report, indent=2) + "\n")
    log.info("fit status: %s (rank %d)", result.status, result.rank)
    if result.status == "underdetermined":
        return EXIT_UNDERDETERMINED
    if result.status == "max_iterations":
        return EXIT_MAX_ITERATIONS
    return EXIT_OK


def cmd_witness(
    config: RunConfig,
    out_dir: Path,
    cov_path: Path,
    emulate: bool,
    bipartition: str,
    criterion: str,
) -> int:
    cov = tsio.load_covariance(cov_path)
    if emulate:
        records = witness_records(emulate_homodyne(cov), "homodyne_emulated")
    else:
        records = witness_records(cov, "resonator")
    if bipartition != "all":
        records = [r for r in records if r.bipartition == bipartition]
    tsio.save_witness_records(records, out_dir / "witness_report.json")
    tsio.witness_records_to_csv(records, out_dir / "witness_report.csv")
    for r in records:
        if criterion in ("both", "dgcz"):
            log.info("%s dgcz=%.6g", r.bipartition, r.dgcz)
        if criterion in ("both", "ppt"):
            log.info("%s ppt_nu_min=%.6g", r.bipartition, r.ppt_nu_min)
    return EXIT_OK


def _sweep_point(profile, omega_hz, delta, scenarios):
    state = synthesize_state(profile, omega_hz=omega_hz, delta_hz=float(delta))
    rows = []
    if "resonator" in scenarios:
        rows.extend(witness_records(state, "resonator"))
    if "homodyne_emulated" in scenarios:
        rows.extend(witness_records(emulate_homodyne(state), "homodyne_emulated"))
    return rows


def cmd_sweep(config: RunConfig, out_dir: Path) -> int:
    deltas = config.delta_grid_hz
    with ThreadPoolExecutor(max_workers=min(8, max(1, deltas.size))) as pool:
        per_point = list(
            pool.map(
                lambda d: _sweep_point(
                    config.profile, config.cavity.omega_hz, d, config.scenarios
                ),
                deltas,
            )
        )
    records = [r for rows in per_point for r in rows]

    def select(scenario, bipartition, attr):
        return [
            getattr(r, attr)
            for r in records
            if r.scenario == scenario and r.bipartition == bipartition
        ]

    def write(name, columns):
        with open(out_dir / name, "w", newline="") as fh:
            fh.write(",".join(columns) + "\n")
            series = [deltas if c == "delta_hz" else columns[c] for c in columns]
            for k in range(deltas.size):
                fh.write(",".join(_fmt(s[k]) for s in series) + "\n")

    if "resonator" in config.scenarios:
        write(
            "fig4_dE.csv",
            {
                "delta_hz": None,
                "dE_probe": select("resonator", "sym", "dE_probe"),
                "dE_conj": select("resonator", "sym", "dE_conj"),
            },
        )
        write(
            "fig5_ppt_sa.csv",
            {
                "delta_hz": None,
                "ppt_nu_min": select("resonator", "sym", "ppt_nu_min"),
            },
        )
        write(
            "fig5_ppt_sideband.csv",
            {
                "delta_hz": None,
                "ppt_pair1": select("resonator", "pair1", "ppt_nu_min"),
                "ppt_pair2": select("resonator", "pair2", "ppt_nu_min"),
            },
        )
        write(
            "fig6_dgcz_sa.csv",
            {"delta_hz": None, "dgcz": select("resonator", "sym", "dgcz")},
        )
        write(
            "fig6_dgcz_sideband.csv",
            {
                "delta_hz": None,
                "dgcz_pair1": select("resonator", "pair1", "dgcz"),
                "dgcz_pair2": select("resonator", "pair2", "dgcz"),
            },
        )
    if "homodyne_emulated" in config.scenarios:
        write(
            "fig5_ppt_sideband_dE0.csv",
            {
                "delta_hz": None,
                "ppt_pair1": select("homodyne_emulated", "pair1", "ppt_nu_min"),
                "ppt_pair2": select("homodyne_emulated", "pair2", "ppt_nu_min"),
            },
        )
    log.info("wrote sweep CSVs for %d detunings to %s", deltas.size, out_dir)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="twinspec",
        description="Twin-beam sideband covariance: simulate, reconstruct, witness.",
        epilog="Exit codes: 0 ok, 2 usage, 3 underdetermined fit, "
        "4 iteration limit, 5 unparsable input.",
    )
    parser.add_argument("--config", type=Path, help="JSON run configuration")
    parser.add_argument("--out", type=Path, help="output directory (default from config)")
    parser.add_argument("--seed", type=int, help="random seed for noisy simulation")
    parser.add_argument("--quiet", action="store_true", help="suppress progress logs")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("gain", help="write amplifier gain curve CSV")

    p_sim = sub.add_parser("simulate", help="write trace CSVs + truth covariance")
    p_sim.add_argument("--delta", type=float, help="single pump detuning in Hz")
    p_sim.add_argument(
        "--vacuum", action="store_true", help="replace the source by vacuum"
    )
    p_sim.add_argument("--noise-sigma", type=float, help="white noise level (SQL units)")

    p_fit = sub.add_parser("fit", help="reconstruct covariance from a manifest")
    p_fit.add_argument("--manifest", type=Path, required=True)
    p_fit.add_argument(
        "--physicality",
        choices=("penalty", "project_after", "none"),
        default="penalty",
    )
    p_fit.add_argument("--truth", type=Path, help="covariance JSON to compare against")

    p_wit = sub.add_parser("witness", help="evaluate witnesses on a stored state")
    p_wit.add_argument("--cov", type=Path, required=True)
    p_wit.add_argument("--emulate-homodyne", action="store_true")
    p_wit.add_argument(
        "--bipartition", choices=("all", "sym", "pair1", "pair2"), default="all"
    )
    p_wit.add_argument("--criterion", choices=("both", "dgcz", "ppt"), default="both")

    sub.add_parser("sweep", help="write witness/imbalance curves vs detuning")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.WARNING if args.quiet else logging.INFO,
        format="%(levelname)s %(message)s",
    )
    try:
        config = load_run_config(args.config)
    except (OSError, ValueError, KeyError, TypeError) as exc:
        log.error("could not load config: %s", exc)
        return EXIT_PARSE_ERROR
    if args.seed is not None:
        config.seed = args.seed
    if getattr(args, "noise_sigma", None) is not None:
        config.noise_sigma = args.noise_sigma
    if getattr(args, "delta", None) is not None:
        config.delta_grid_hz = np.array([args.delta])
    out_dir = args.out if args.out is not None else config.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    try:
        if args.command == "gain":
            return cmd_gain(config, out_dir)
        if args.command == "simulate":
            return cmd_simulate(config, out_dir, vacuum=args.vacuum)
        if args.command == "fit":
            return cmd_fit(config, out_dir, args.manifest, args.physicality, args.truth)
        if args.command == "witness":
            return cmd_witness(
                config,
                out_dir,
                args.cov,
                args.emulate_homodyne,
                args.bipartition,
                args.criterion,
            )
        if args.command == "sweep":
            return cmd_sweep(config, out_dir)
    except tsio.TraceParseError as exc:
        log.error("%s", exc)
        return EXIT_PARSE_ERROR
    except (FileNotFoundError, json.JSONDecodeError) as exc:
        log.error("%s", exc)
        return EXIT_PARSE_ERROR
    raise AssertionError("unreachable")  # pragma: no cover


if __name__ == "__main__":  # pragma: no cover
    raise SystemExit(main())

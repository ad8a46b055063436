"""File formats: covariance/parameter JSON, trace CSV, manifests, reports.

All CSV floats are written with 17 significant digits and JSON numbers with
Python's shortest round-trip repr, so every emitted file reloads to exactly
the same float64 values and rewriting a loaded file reproduces it byte for
byte.  Parsers raise :class:`TraceParseError` (with the offending line
number) instead of propagating bare conversion errors.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .cavity import CavityParams, CrossTrace, SpectrumTrace
from .fwm import FwmParams
from .gaussian import CovarianceMatrix
from .modes import ModeLabel
from .witnesses import WitnessRecord

__all__ = [
    "TraceParseError",
    "save_covariance",
    "load_covariance",
    "save_fwm_params",
    "load_fwm_params",
    "cavity_to_dict",
    "cavity_from_dict",
    "save_traces_csv",
    "load_traces_csv",
    "save_manifest",
    "load_manifest",
    "save_witness_records",
    "load_witness_records",
    "witness_records_to_csv",
    "load_witness_csv",
    "save_gain_csv",
    "read_csv_columns",
]


class TraceParseError(ValueError):
    """A data file could not be parsed; carries the 1-based line number."""

    def __init__(self, path, line_number: int, message: str):
        super().__init__(f"{path}:{line_number}: {message}")
        self.path = str(path)
        self.line_number = line_number


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ---------------------------------------------------------------- JSON objects


def save_covariance(cov: CovarianceMatrix, path) -> None:
    payload = {
        "basis": cov.basis,
        "mode_order": [m.token for m in cov.mode_order],
        "omega_hz": cov.omega_hz,
        "delta_hz": cov.delta_hz,
        "matrix": [float(x) for x in cov.matrix.ravel()],
        "meta": _jsonable(cov.meta),
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_covariance(path) -> CovarianceMatrix:
    payload = json.loads(Path(path).read_text())
    flat = np.asarray(payload["matrix"], dtype=float)
    n = int(round(np.sqrt(flat.size)))
    if n * n != flat.size:
        raise TraceParseError(path, 1, f"matrix has {flat.size} entries, not square")
    return CovarianceMatrix(
        flat.reshape(n, n),
        basis=payload["basis"],
        mode_order=tuple(ModeLabel.parse(t) for t in payload["mode_order"]),
        omega_hz=payload.get("omega_hz"),
        delta_hz=payload.get("delta_hz"),
        meta=payload.get("meta") or {},
    )


def save_fwm_params(params: FwmParams, path) -> None:
    Path(path).write_text(json.dumps(asdict(params), indent=2) + "\n")


def load_fwm_params(path) -> FwmParams:
    payload = json.loads(Path(path).read_text())
    return FwmParams(**payload)


def cavity_to_dict(cavity: CavityParams) -> dict:
    return asdict(cavity)


def cavity_from_dict(payload: dict) -> CavityParams:
    return CavityParams(**payload)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    return obj


# ---------------------------------------------------------------- trace CSVs

_SINGLE_HEADER = ["delta_norm", "value", "demod_phase_rad", "beam"]
_CROSS_HEADER = [
    "delta_pr_norm",
    "delta_cj_norm",
    "value",
    "demod_phase_pr_rad",
    "demod_phase_cj_rad",
]


def save_traces_csv(traces, path) -> None:
    """Write traces of one kind (all single-beam or all cross) to one CSV.

    Each trace occupies a contiguous block of rows, so loading the file
    gives back the same list of traces.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("no traces to write")
    kinds = {tr.kind for tr in traces}
    if len(kinds) != 1:
        raise ValueError("cannot mix single and cross traces in one file")
    kind = kinds.pop()
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if kind == "single":
            writer.writerow(_SINGLE_HEADER)
            for tr in traces:
                for d, v in zip(tr.delta_norm, tr.values):
                    writer.writerow([_fmt(d), _fmt(v), _fmt(tr.demod_phase_rad), tr.beam])
        else:
            writer.writerow(_CROSS_HEADER)
            for tr in traces:
                for dp, dc, v in zip(tr.delta_pr_norm, tr.delta_cj_norm, tr.values):
                    writer.writerow(
                        [
                            _fmt(dp),
                            _fmt(dc),
                            _fmt(v),
                            _fmt(tr.demod_phase_pr_rad),
                            _fmt(tr.demod_phase_cj_rad),
                        ]
                    )


def _parse_float(path, lineno: int, field: str, text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise TraceParseError(path, lineno, f"bad {field} value {text!r}") from None


def load_traces_csv(path) -> list:
    """Load a trace CSV written by :func:`save_traces_csv`.

    A new trace starts whenever the (beam, phase) combination changes
    between consecutive rows.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TraceParseError(path, 1, "empty file") from None
        if header == _SINGLE_HEADER:
            kind = "single"
        elif header == _CROSS_HEADER:
            kind = "cross"
        else:
            raise TraceParseError(path, 1, f"unrecognized header {header}")
        traces = []
        current_key = None
        block: list[list[float]] = []

        def flush():
            if not block:
                return
            cols = list(zip(*block))
            if kind == "single":
                traces.append(
                    SpectrumTrace(
                        beam=current_key[0],
                        delta_norm=np.array(cols[0]),
                        values=np.array(cols[1]),
                        demod_phase_rad=current_key[1],
                    )
                )
            else:
                traces.append(
                    CrossTrace(
                        delta_pr_norm=np.array(cols[0]),
                        delta_cj_norm=np.array(cols[1]),
                        values=np.array(cols[2]),
                        demod_phase_pr_rad=current_key[0],
                        demod_phase_cj_rad=current_key[1],
                    )
                )

        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise TraceParseError(
                    path, lineno, f"expected {len(header)} fields, got {len(row)}"
                )
            if kind == "single":
                d = _parse_float(path, lineno, "delta_norm", row[0])
                v = _parse_float(path, lineno, "value", row[1])
                ph = _parse_float(path, lineno, "demod_phase_rad", row[2])
                beam = row[3]
                if beam not in ("probe", "conjugate"):
                    raise TraceParseError(path, lineno, f"unknown beam {beam!r}")
                key = (beam, ph)
                data = [d, v]
            else:
                dp = _parse_float(path, lineno, "delta_pr_norm", row[0])
                dc = _parse_float(path, lineno, "delta_cj_norm", row[1])
                v = _parse_float(path, lineno, "value", row[2])
                php = _parse_float(path, lineno, "demod_phase_pr_rad", row[3])
                phc = _parse_float(path, lineno, "demod_phase_cj_rad", row[4])
                key = (php, phc)
                data = [dp, dc, v]
            if key != current_key:
                flush()
                current_key = key
                block = []
            block.append(data)
        flush()
    return traces


# ---------------------------------------------------------------- manifests


def save_manifest(cavity: CavityParams, trace_files: list[dict], path, truth=None) -> None:
    """Write an acquisition manifest next to its trace files.

    ``trace_files`` entries are dicts with at least ``path`` and ``kind``;
    paths are stored relative to the manifest location.
    """
    payload = {"cavity": cavity_to_dict(cavity), "traces": trace_files}
    if truth is not None:
        payload["truth"] = str(truth)
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_manifest(path):
    """Load a manifest: returns (cavity, traces, truth_path_or_None)."""
    path = Path(path)
    payload = json.loads(path.read_text())
    cavity = cavity_from_dict(payload["cavity"])
    traces = []
    for entry in payload["traces"]:
        traces.extend(load_traces_csv(path.parent / entry["path"]))
    truth = payload.get("truth")
    if truth is not None:
        truth = path.parent / truth
    return cavity, traces, truth


# ---------------------------------------------------------------- reports

_WITNESS_HEADER = [
    "delta_hz",
    "bipartition",
    "basis",
    "scenario",
    "dgcz",
    "ppt_nu_min",
    "dE_probe",
    "dE_conj",
]


def save_witness_records(records, path) -> None:
    payload = {"records": [r.to_dict() for r in records]}
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def load_witness_records(path) -> list[WitnessRecord]:
    payload = json.loads(Path(path).read_text())
    return [WitnessRecord(**entry) for entry in payload["records"]]


def witness_records_to_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(_WITNESS_HEADER)
        for r in records:
            writer.writerow(
                [
                    _fmt(r.delta_hz) if r.delta_hz is not None else "nan",
                    r.bipartition,
                    r.basis,
                    r.scenario,
                    _fmt(r.dgcz),
                    _fmt(r.ppt_nu_min),
                    _fmt(r.dE_probe),
                    _fmt(r.dE_conj),
                ]
            )


def load_witness_csv(path) -> list[dict]:
    rows = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != _WITNESS_HEADER:
            raise TraceParseError(path, 1, f"unrecognized header {header}")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(_WITNESS_HEADER):
                raise TraceParseError(
                    path, lineno, f"expected {len(_WITNESS_HEADER)} fields, got {len(row)}"
                )
            rows.append(
                {
                    "delta_hz": _parse_float(path, lineno, "delta_hz", row[0]),
                    "bipartition": row[1],
                    "basis": row[2],
                    "scenario": row[3],
                    "dgcz": _parse_float(path, lineno, "dgcz", row[4]),
                    "ppt_nu_min": _parse_float(path, lineno, "ppt_nu_min", row[5]),
                    "dE_probe": _parse_float(path, lineno, "dE_probe", row[6]),
                    "dE_conj": _parse_float(path, lineno, "dE_conj", row[7]),
                }
            )
    return rows


def save_gain_csv(deltas_hz, gain_probe, gain_conjugate, path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["delta_hz", "gain_probe", "gain_conjugate"])
        for d, gp, gc in zip(deltas_hz, gain_probe, gain_conjugate):
            writer.writerow([_fmt(d), _fmt(gp), _fmt(gc)])


def read_csv_columns(path) -> dict[str, np.ndarray]:
    """Generic loader for the simple numeric CSVs written by this package."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise TraceParseError(path, 1, "empty file")
        columns: dict[str, list] = {name: [] for name in header}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise TraceParseError(
                    path, lineno, f"expected {len(header)} fields, got {len(row)}"
                )
            for name, text in zip(header, row):
                columns[name].append(text)
    out: dict[str, np.ndarray] = {}
    for name, texts in columns.items():
        try:
            out[name] = np.array([float(t) for t in texts])
        except ValueError:
            out[name] = np.array(texts)
    return out

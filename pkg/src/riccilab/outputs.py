"""Run artifacts: monitors.csv, summary.json, and binary field snapshots.

The CSV column order is fixed (t, dt, sup_R, min_R, vol, then the monitor
labels in registration order) and floats are written as their shortest
round-trip decimals, so two runs of the same scenario produce byte-identical
files.  Snapshots are raw little-endian float64 arrays described by a JSON
header (row-major x-then-theta, form components ordered phi_x then phi_theta).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .flows import FlowState, Trajectory
from .functionals import (MonitorRecord, closedness_report, gauge_report,
                          l1_monotonicity_report, l2_monotonicity_report,
                          length_bound_report, max_principle_report,
                          pairing_invariance_report)
from .geometry import (CONFORMAL, WARPED, Grid2D, MetricField, OneFormField,
                       ScalarField, conformal_metric, general_metric,
                       warped_metric)

BASE_COLUMNS = ("t", "dt", "sup_R", "min_R", "vol")


def _fmt(x: float) -> str:
    return repr(float(x))


def monitors_csv_text(traj: Trajectory) -> str:
    labels = traj.monitor_labels
    lines = [",".join(BASE_COLUMNS + tuple(labels))]
    for rec in traj.records:
        row = [_fmt(rec.t), _fmt(rec.dt), _fmt(rec.sup_R), _fmt(rec.min_R),
               _fmt(rec.vol)]
        row.extend(_fmt(rec.values[label]) for label in labels)
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def summarize_trajectory(traj: Trajectory, problem=None) -> dict:
    """Per-statement verdicts with worst margins, for summary.json."""
    verdicts = {}
    form_labels = sorted({k[: -len("_l2")] for r in traj.records[:1]
                          for k in r.values if k.endswith("_l2")})
    for label in form_labels:
        verdicts[f"{label}.l2_monotone"] = l2_monotonicity_report(traj, label).to_json()
        verdicts[f"{label}.sup_monotone"] = max_principle_report(traj, label).to_json()
        verdicts[f"{label}.closedness"] = closedness_report(traj, label).to_json()
        if traj.records and f"{label}_pairing" in traj.records[0].values:
            verdicts[f"{label}.pairing_invariance"] = \
                pairing_invariance_report(traj, label).to_json()
    if traj.records and "u_mass" in traj.records[0].values:
        verdicts["subsolution.mass_inequality"] = l1_monotonicity_report(traj).to_json()
    if traj.records and "gauge_gap" in traj.records[0].values:
        evolving = problem.evolve_metric if problem is not None else True
        verdicts["gauge.equivalence"] = gauge_report(traj, evolving).to_json()
    if problem is not None:
        for label, probe in problem.probes.items():
            if traj.records and "L_alpha" in traj.records[0].values:
                verdicts[f"{label}.length_bound"] = \
                    length_bound_report(probe, traj).to_json()
    return verdicts


def write_outputs(traj: Trajectory, destination, verdicts: dict | None = None,
                  problem=None, snapshots: bool = True) -> dict:
    """Write monitors.csv, summary.json and (optionally) snapshots under
    `destination`; returns the summary dict."""
    dest = Path(destination)
    dest.mkdir(parents=True, exist_ok=True)
    (dest / "monitors.csv").write_text(monitors_csv_text(traj))

    if verdicts is None:
        verdicts = summarize_trajectory(traj, problem) if traj.records else {}
    summary = {
        "scenario": traj.scenario_name,
        "scenario_hash": traj.scenario_hash,
        "grid_hash": traj.grid_hash,
        "status": traj.status,
        "t_end": traj.t_end,
        "n_steps": traj.n_steps,
        "n_records": len(traj.records),
        "monitor_labels": list(traj.monitor_labels),
        "verdicts": verdicts,
        "all_pass": all(v.get("pass", True) for v in verdicts.values()),
    }
    (dest / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True)
                                       + "\n")
    if snapshots and traj.snapshots:
        write_snapshots(traj, dest / "snapshots")
    return summary


# ------------------------------------------------------------------- snapshots
def _grid_header(grid: Grid2D) -> dict:
    return {"nx": grid.nx, "ny": grid.ny, "lx": grid.lx, "ly": grid.ly,
            "topology_x": grid.topology_x, "topology_y": grid.topology_y,
            "origin": list(grid.origin)}


def write_snapshots(traj: Trajectory, directory) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for idx, snap in enumerate(traj.snapshots):
        arrays = []
        header_fields = []
        g = snap.metric
        if g.tag == CONFORMAL:
            arrays.append(("metric.u", g.u))
        elif g.tag == WARPED:
            arrays.append(("metric.h", g.h))
            arrays.append(("metric.f", g.f))
        else:
            arrays.extend([("metric.gxx", g.gxx), ("metric.gxt", g.gxt),
                           ("metric.gtt", g.gtt)])
        for label, phi in snap.forms.items():
            arrays.append((f"form.{label}.phi_x", phi.x))
            arrays.append((f"form.{label}.phi_theta", phi.theta))
        if snap.gauge is not None:
            arrays.append(("gauge.F", snap.gauge.values))
        if snap.subsolution is not None:
            arrays.append(("sub.u", snap.subsolution.values))

        offset = 0
        blob = bytearray()
        for name, arr in arrays:
            data = np.ascontiguousarray(arr, dtype="<f8").tobytes()
            header_fields.append({"name": name, "dtype": "<f8",
                                  "shape": list(arr.shape), "offset": offset})
            blob.extend(data)
            offset += len(data)
        header = {
            "t": snap.t, "step": snap.step, "metric_tag": g.tag,
            "axis_order": "row-major x-then-theta",
            "component_order": ["phi_x", "phi_theta"],
            "grid": _grid_header(traj.grid),
            "fields": header_fields,
        }
        stem = directory / f"snap_{idx:05d}"
        stem.with_suffix(".json").write_text(json.dumps(header, indent=1) + "\n")
        stem.with_suffix(".bin").write_bytes(bytes(blob))


def load_snapshots(directory) -> list[FlowState]:
    directory = Path(directory)
    states = []
    for header_path in sorted(directory.glob("snap_*.json")):
        header = json.loads(header_path.read_text())
        blob = header_path.with_suffix(".bin").read_bytes()
        gh = header["grid"]
        grid = Grid2D(gh["nx"], gh["ny"], gh["lx"], gh["ly"],
                      gh["topology_x"], gh["topology_y"], tuple(gh["origin"]))
        raw = {}
        for f in header["fields"]:
            count = int(np.prod(f["shape"]))
            arr = np.frombuffer(blob, dtype=f["dtype"], count=count,
                                offset=f["offset"]).reshape(f["shape"]).copy()
            raw[f["name"]] = arr
        tag = header["metric_tag"]
        if tag == CONFORMAL:
            metric = conformal_metric(grid, raw["metric.u"])
        elif tag == WARPED:
            metric = warped_metric(grid, raw["metric.h"], raw["metric.f"])
        else:
            metric = general_metric(raw["metric.gxx"], raw["metric.gxt"],
                                    raw["metric.gtt"])
        forms = {}
        for name in raw:
            if name.startswith("form.") and name.endswith(".phi_x"):
                label = name[len("form."):-len(".phi_x")]
                forms[label] = OneFormField(raw[name], raw[f"form.{label}.phi_theta"])
        gauge = ScalarField(raw["gauge.F"], "gauge") if "gauge.F" in raw else None
        sub = ScalarField(raw["sub.u"], "subsolution") if "sub.u" in raw else None
        states.append(FlowState(header["t"], grid, metric, forms, gauge, sub,
                                header["step"]))
    return states


@dataclass
class LoadedRun:
    summary: dict
    records: list
    snapshots: list


def load_run(directory) -> LoadedRun:
    directory = Path(directory)
    summary_path = directory / "summary.json"
    if not summary_path.exists():
        raise FileNotFoundError(f"{summary_path} not found")
    summary = json.loads(summary_path.read_text())
    records = []
    csv_path = directory / "monitors.csv"
    if csv_path.exists():
        lines = csv_path.read_text().strip().splitlines()
        header = lines[0].split(",")
        for line in lines[1:]:
            vals = [float(v) for v in line.split(",")]
            row = dict(zip(header, vals))
            records.append(MonitorRecord(
                t=row.pop("t"), dt=row.pop("dt"), step=0,
                sup_R=row.pop("sup_R"), min_R=row.pop("min_R"),
                vol=row.pop("vol"), values=row,
                grid_hash=summary.get("grid_hash", "")))
    snap_dir = directory / "snapshots"
    snapshots = load_snapshots(snap_dir) if snap_dir.exists() else []
    return LoadedRun(summary, records, snapshots)

"""File formats: channels, constraint families, trajectories and reports.

Complex matrices are encoded as nested arrays of ``[re, im]`` pairs.  All
documents are JSON; floats survive a dump/load round trip bit-exactly
(Python renders them with shortest-repr).  Report documents keep a stable
key order so identical inputs produce identical bytes.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np

from .certify import CertificationReport, RatioStats
from .mixture import MixtureFamily, TauSolution
from .qab_core import Trajectory
from .quantum import ChoiMatrix

__all__ = [
    "complex_matrix_to_pairs",
    "load_channel",
    "load_constraints",
    "load_trajectory",
    "pairs_to_complex_matrix",
    "report_to_dict",
    "save_channel",
    "save_constraints",
    "save_report",
    "save_trajectory",
]

CHOI_NORMALIZATION_TAG = "trace-dim-a"


def complex_matrix_to_pairs(m: np.ndarray) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(x.real), float(x.imag)] for x in row] for row in m]


def pairs_to_complex_matrix(rows: list) -> np.ndarray:
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def _channel_doc(choi: ChoiMatrix, kraus=None) -> dict:
    doc = {
        "format": "choi" if kraus is None else "kraus",
        "dim_a": choi.dim_a,
        "dim_b": choi.dim_b,
        "normalization": CHOI_NORMALIZATION_TAG,
    }
    if kraus is None:
        doc["choi"] = complex_matrix_to_pairs(choi.mat)
    else:
        doc["kraus"] = [complex_matrix_to_pairs(k) for k in kraus]
    return doc


def save_channel(path, choi: ChoiMatrix) -> None:
    Path(path).write_text(json.dumps(_channel_doc(choi), indent=1))


def load_channel(path) -> ChoiMatrix:
    doc = json.loads(Path(path).read_text())
    dim_a, dim_b = int(doc["dim_a"]), int(doc["dim_b"])
    if doc.get("normalization", CHOI_NORMALIZATION_TAG) != CHOI_NORMALIZATION_TAG:
        raise ValueError(f"unsupported normalization tag {doc.get('normalization')!r}")
    if doc["format"] == "choi":
        mat = pairs_to_complex_matrix(doc["choi"])
        return ChoiMatrix(mat=mat, dim_a=dim_a, dim_b=dim_b)
    if doc["format"] == "kraus":
        from .quantum import choi_from_kraus

        ops = [pairs_to_complex_matrix(k) for k in doc["kraus"]]
        return choi_from_kraus(ops)
    raise ValueError(f"unknown channel format {doc['format']!r}")


def save_constraints(path, fam: MixtureFamily) -> None:
    doc = {
        "constraints": [
            {"matrix": complex_matrix_to_pairs(h), "target": float(c)}
            for h, c in zip(fam.observables, fam.targets)
        ]
    }
    Path(path).write_text(json.dumps(doc, indent=1))


def load_constraints(path) -> MixtureFamily:
    doc = json.loads(Path(path).read_text())
    obs, targets = [], []
    for entry in doc["constraints"]:
        obs.append(pairs_to_complex_matrix(entry["matrix"]))
        targets.append(float(entry["target"]))
    return MixtureFamily(observables=tuple(obs), targets=tuple(targets))


def trajectory_to_dict(traj: Trajectory, include_states: bool = True) -> dict:
    doc = {
        "values": [float(v) for v in traj.values],
        "step_kl": [float(v) for v in traj.step_kl],
        "step_domega": [float(v) for v in traj.step_domega],
        "tau_history": [
            {
                "tau": [float(t) for t in sol.tau],
                "gradient_norm": float(sol.gradient_norm),
                "iterations": int(sol.iterations),
            }
            for sol in traj.tau_history
        ],
    }
    if include_states:
        doc["states"] = [complex_matrix_to_pairs(s) for s in traj.states]
    return doc


def trajectory_from_dict(doc: dict) -> Trajectory:
    traj = Trajectory(
        states=[pairs_to_complex_matrix(s) for s in doc.get("states", [])],
        values=[float(v) for v in doc["values"]],
        step_kl=[float(v) for v in doc["step_kl"]],
        step_domega=[float(v) for v in doc["step_domega"]],
        tau_history=[
            TauSolution(
                tau=np.array(entry["tau"], dtype=float),
                gradient_norm=float(entry["gradient_norm"]),
                iterations=int(entry["iterations"]),
            )
            for entry in doc.get("tau_history", [])
        ],
    )
    if traj.states:
        traj.check_consistent()
    return traj


def save_trajectory(path, traj: Trajectory, include_states: bool = True) -> None:
    Path(path).write_text(json.dumps(trajectory_to_dict(traj, include_states)))


def load_trajectory(path) -> Trajectory:
    return trajectory_from_dict(json.loads(Path(path).read_text()))


def _ratio_stats_dict(stats: RatioStats) -> dict:
    return {
        "min": stats.min,
        "max": stats.max,
        "count": stats.count,
        "arg_min": stats.arg_min,
        "arg_max": stats.arg_max,
        "skipped": stats.skipped,
    }


def report_to_dict(report: CertificationReport) -> dict:
    """Stable-key-order dict of a report, including every threshold and seed."""
    return {
        "gamma": report.gamma,
        "samples": report.samples,
        "seed": report.seed,
        "eps_max": report.eps_max,
        "divergence_skip_tol": 1e-14,
        "a1": _ratio_stats_dict(report.a1),
        "a1_pass": report.a1_pass,
        "a1_margin": report.a1_margin,
        "a2": _ratio_stats_dict(report.a2),
        "a2_pass": report.a2_pass,
        "a2_tolerance": report.a2_tolerance,
        "a3": _ratio_stats_dict(report.a3),
        "a3_pass": report.a3_pass,
        "bound_value": report.bound_value,
        "bound_t0": report.bound_t0,
        "bound_certified": report.bound_certified,
        "certified": report.certified,
        "proxy_note": report.proxy_note,
    }


def report_from_dict(doc: dict) -> CertificationReport:
    def stats(d):
        return RatioStats(
            min=d["min"],
            max=d["max"],
            count=d["count"],
            arg_min=d["arg_min"],
            arg_max=d["arg_max"],
            skipped=d["skipped"],
        )

    fields = {f.name for f in dataclasses.fields(CertificationReport)}
    kwargs = {k: v for k, v in doc.items() if k in fields}
    kwargs["a1"] = stats(doc["a1"])
    kwargs["a2"] = stats(doc["a2"])
    kwargs["a3"] = stats(doc["a3"])
    return CertificationReport(**kwargs)


def save_report(path, report: CertificationReport) -> None:
    Path(path).write_text(json.dumps(report_to_dict(report), indent=1))


def load_report(path) -> CertificationReport:
    return report_from_dict(json.loads(Path(path).read_text()))

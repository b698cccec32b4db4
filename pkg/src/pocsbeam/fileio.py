"""On-disk formats: instance and beamformer JSON, diagnostic CSVs.

Complex numbers are stored as two-element ``[re, im]`` arrays.  Group
indices are 1-based in files and 0-based in memory.  Infinite power
caps are written as the string ``"inf"`` because JSON has no infinity
literal.  CSVs are UTF-8 with LF line endings and ``.`` decimals;
floats are written in shortest round-trip form so identical runs
produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .constraints import ProblemInstance
from .solve import SolverTrace

__all__ = [
    "TRACE_HEADER",
    "EVAL_HEADER",
    "SWEEP_HEADER",
    "save_instance",
    "load_instance",
    "save_beamformer",
    "load_beamformer",
    "write_csv",
    "write_trace_csv",
]

TRACE_HEADER = (
    "n",
    "objective",
    "rank_distance",
    "max_sinr_residual",
    "max_power_residual",
    "psd_residual",
    "rel_step",
    "elapsed_ns",
)

EVAL_HEADER = (
    "seed",
    "N",
    "K",
    "M",
    "gamma_db",
    "sinr_min_rho_db",
    "total_power",
    "rho",
    "p_sdr",
    "solver_iters",
    "solve_ns",
)

SWEEP_HEADER = (
    "axis",
    "grid_value",
    "kind",
) + EVAL_HEADER + ("status",)


def _complex_pairs(a: np.ndarray) -> list:
    """Nested [re, im] lists mirroring the shape of a complex array."""
    stacked = np.stack([a.real, a.imag], axis=-1)
    return stacked.tolist()


def _pairs_complex(pairs, shape: tuple[int, ...], what: str) -> np.ndarray:
    a = np.asarray(pairs, dtype=float)
    if a.shape != shape + (2,):
        raise ValueError(f"{what}: expected shape {shape + (2,)}, got {a.shape}")
    return a[..., 0] + 1j * a[..., 1]


def _cap_out(v: float):
    return "inf" if np.isinf(v) else float(v)


def _cap_in(v) -> float:
    if isinstance(v, str):
        if v.lower() in ("inf", "infinity"):
            return np.inf
        raise ValueError(f"power cap string must be 'inf', got {v!r}")
    return float(v)


def save_instance(path: str | Path, instance: ProblemInstance, seed: int = -1) -> None:
    """Write an instance as JSON; ``seed=-1`` marks an unknown provenance."""
    doc = {
        "N": instance.n_antennas,
        "K": instance.n_users,
        "M": instance.n_groups,
        "group_of": [int(g) + 1 for g in instance.group_of],
        "channels": _complex_pairs(instance.channels),
        "gamma": [float(v) for v in instance.sinr_target],
        "sigma2": [float(v) for v in instance.noise_power],
        "p": [_cap_out(v) for v in instance.antenna_power],
        "seed": int(seed),
    }
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def _per_user(doc, key: str, k: int) -> np.ndarray:
    v = doc[key]
    if isinstance(v, (int, float)):
        return np.full(k, float(v))
    arr = np.asarray(v, dtype=float)
    if arr.shape != (k,):
        raise ValueError(f"{key}: expected scalar or length-{k} list")
    return arr


def load_instance(path: str | Path) -> tuple[ProblemInstance, int]:
    """Read an instance JSON; returns the instance and its seed (-1 if absent)."""
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise ValueError(f"{path}: not valid JSON ({e})") from e
    try:
        n, k, m = int(doc["N"]), int(doc["K"]), int(doc["M"])
        group_of = np.asarray(doc["group_of"], dtype=np.int64) - 1
        channels = _pairs_complex(doc["channels"], (k, n), "channels")
        gamma = _per_user(doc, "gamma", k)
        sigma2 = _per_user(doc, "sigma2", k)
        p_raw = doc["p"]
        if isinstance(p_raw, (int, float, str)):
            caps = np.full(n, _cap_in(p_raw))
        else:
            caps = np.asarray([_cap_in(v) for v in p_raw], dtype=float)
    except KeyError as e:
        raise ValueError(f"{path}: missing field {e}") from e
    instance = ProblemInstance(
        channels=channels,
        group_of=group_of,
        sinr_target=gamma,
        noise_power=sigma2,
        antenna_power=caps,
        n_groups=m,
    )
    return instance, int(doc.get("seed", -1))


def save_beamformer(path: str | Path, w: np.ndarray) -> None:
    w = np.asarray(w, dtype=complex)
    doc = {"M": w.shape[0], "N": w.shape[1], "vectors": _complex_pairs(w)}
    Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def load_beamformer(path: str | Path) -> np.ndarray:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return _pairs_complex(doc["vectors"], (int(doc["M"]), int(doc["N"])), "vectors")


def _cell(v) -> str:
    """One CSV cell: shortest round-trip floats, empty string for None."""
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_csv(path: str | Path, header: tuple[str, ...], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} cells, header has {len(header)}")
        lines.append(",".join(_cell(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_trace_csv(path: str | Path, trace: SolverTrace) -> None:
    write_csv(path, TRACE_HEADER, (r.astuple() for r in trace.records))

"""On-disk formats for parameters, trajectories and label files.

Binary trajectory layout (little endian)::

    bytes 0-7    magic b"BMCTRAJ1"
    bytes 8-11   n    (u32)
    bytes 12-19  ell  (u64)
    then ell + 1 state indices as u32
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .model import BmcParams, Trajectory

MAGIC = b"BMCTRAJ1"
_HEADER = struct.Struct("<8sIQ")


class FormatError(ValueError):
    pass


def trajectory_to_bytes(traj: Trajectory) -> bytes:
    if traj.n > np.iinfo(np.uint32).max:
        raise FormatError("n does not fit in u32")
    head = _HEADER.pack(MAGIC, traj.n, traj.ell)
    return head + traj.states.astype("<u4").tobytes()


def trajectory_from_bytes(data: bytes) -> Trajectory:
    if len(data) < _HEADER.size:
        raise FormatError("truncated header")
    magic, n, ell = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    body = np.frombuffer(data, dtype="<u4", offset=_HEADER.size)
    if len(body) != ell + 1:
        raise FormatError(f"expected {ell + 1} states, found {len(body)}")
    return Trajectory(body.astype(np.int64), n=int(n))


def trajectory_to_text(traj: Trajectory) -> str:
    return "\n".join(map(str, traj.states.tolist())) + "\n"


def trajectory_from_text(text: str, n: int | None = None) -> Trajectory:
    states = np.array([int(t) for t in text.split()], dtype=np.int64)
    if n is None:
        n = int(states.max()) + 1
    return Trajectory(states, n=n)


def write_trajectory(traj: Trajectory, path, fmt: str | None = None) -> None:
    path = Path(path)
    fmt = fmt or ("text" if path.suffix in {".txt", ".csv"} else "binary")
    if fmt == "binary":
        path.write_bytes(trajectory_to_bytes(traj))
    elif fmt == "text":
        path.write_text(trajectory_to_text(traj))
    else:
        raise ValueError(f"unknown trajectory format {fmt!r}")


def read_trajectory(path, n: int | None = None) -> Trajectory:
    """Read either format; binary is recognised by its magic bytes."""
    data = Path(path).read_bytes()
    if data[:8] == MAGIC:
        traj = trajectory_from_bytes(data)
        if n is not None and n != traj.n:
            raise FormatError(f"header says n={traj.n}, caller says n={n}")
        return traj
    return trajectory_from_text(data.decode(), n=n)


def write_params(params: BmcParams, path) -> None:
    Path(path).write_text(json.dumps(params.to_dict(), indent=2) + "\n")


def read_params(path) -> BmcParams:
    return BmcParams.from_dict(json.loads(Path(path).read_text()))


def write_labels(labels, path) -> None:
    Path(path).write_text("\n".join(str(int(x)) for x in labels) + "\n")


def read_labels(path) -> np.ndarray:
    return np.array([int(t) for t in Path(path).read_text().split()], dtype=np.int64)

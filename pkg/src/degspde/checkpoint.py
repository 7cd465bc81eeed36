"""
Binary checkpoints of ensemble states.

Layout (little endian)::

    magic        4 bytes   b"DSPD"
    version      u32
    config hash  u64       see :func:`config_hash`
    N            u32       retained modes
    M            u32       dealiased grid size
    step         u64       completed steps
    seed         u64       master seed of the noise streams
    B            u32       number of trajectories
    tangent      u8        1 if tangent coefficients follow
    trajectories B x i64
    states       B x N x f64
    tangents     B x N x f64 (optional)

The noise for step ``k`` depends only on ``(seed, trajectory, k)``, so the
step index is the complete generator state.
"""

from __future__ import annotations

import dataclasses
import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .solver import ModelParams, SolverConfig
from .spectral import dealiased_size

MAGIC = b"DSPD"
VERSION = 1
_HEADER = struct.Struct("<4sIQIIQQIB")


class CheckpointError(ValueError):
    pass


def config_hash(params: ModelParams, config: SolverConfig) -> int:
    """64-bit digest of everything that determines the discrete dynamics.

    The horizon and the storage stride are excluded so a run can be resumed
    with a longer horizon.
    """
    fields = dataclasses.asdict(params)
    cfg = {k: v for k, v in dataclasses.asdict(config).items() if k not in ("horizon", "store_stride", "drift")}
    if config.drift is not None:
        d = config.drift
        cfg["drift"] = (repr(float(d.gain)), repr(float(d.tau)), repr(float(d.t_end)), np.asarray(d.target, dtype="<f8").tobytes().hex())
    text = repr(sorted(fields.items())) + repr(sorted(cfg.items()))
    return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=8).digest(), "little")


@dataclass
class Checkpoint:
    step: int
    seed: int
    trajectories: np.ndarray
    states: np.ndarray
    tangents: Optional[np.ndarray] = None
    config_hash: int = 0


def checkpoint_save(path, params: ModelParams, config: SolverConfig, step: int, trajectories, states, tangents=None) -> None:
    traj = np.ascontiguousarray(np.atleast_1d(trajectories), dtype="<i8")
    X = np.ascontiguousarray(states, dtype="<f8")
    if X.ndim == 1:
        X = X[None, :]
    B, N = X.shape
    if traj.shape[0] != B:
        raise CheckpointError("trajectory count does not match the state batch")
    header = _HEADER.pack(
        MAGIC, VERSION, config_hash(params, config), N, dealiased_size(N), int(step), int(config.seed), B, int(tangents is not None)
    )
    with open(Path(path), "wb") as fh:
        fh.write(header)
        fh.write(traj.tobytes())
        fh.write(X.tobytes())
        if tangents is not None:
            fh.write(np.ascontiguousarray(tangents, dtype="<f8").reshape(B, N).tobytes())


def checkpoint_load(path, params: ModelParams, config: SolverConfig) -> Checkpoint:
    """Read a checkpoint, refusing it unless it matches ``(params, config)``."""
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise CheckpointError("truncated checkpoint header")
    magic, version, digest, N, M, step, seed, B, has_tan = _HEADER.unpack_from(raw, 0)
    if magic != MAGIC:
        raise CheckpointError(f"bad magic bytes {magic!r}")
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    expected = config_hash(params, config)
    if digest != expected:
        raise CheckpointError(f"config hash mismatch: file {digest:016x}, run {expected:016x}")
    if N != config.n_modes or M != dealiased_size(N):
        raise CheckpointError("mode count does not match the configuration")
    off = _HEADER.size
    need = off + 8 * B + 8 * B * N * (2 if has_tan else 1)
    if len(raw) != need:
        raise CheckpointError(f"checkpoint has {len(raw)} bytes, expected {need}")
    traj = np.frombuffer(raw, dtype="<i8", count=B, offset=off).astype(np.int64)
    off += 8 * B
    X = np.frombuffer(raw, dtype="<f8", count=B * N, offset=off).reshape(B, N).copy()
    off += 8 * B * N
    Y = None
    if has_tan:
        Y = np.frombuffer(raw, dtype="<f8", count=B * N, offset=off).reshape(B, N).copy()
    return Checkpoint(int(step), int(seed), traj, X, Y, digest)

"""Persistence of exit batches: LEVX1 binary columns and CSV export.

Layout of the binary file:

    magic 'LEVX1'                       5 bytes
    header length (uint32 LE)           4 bytes
    header: UTF-8 key=value lines       (model, domain, start, config, seed)
    n_paths (uint64 LE), dim (uint32 LE), has_tau (uint8)
    tau     float64[n] LE               (present iff has_tau)
    exits   float64[n*d] LE             (row major)
    steps   int64[n] LE
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np

from .killed import DomainSpec, ExitBatch, SimConfig
from .model import make_model

MAGIC = b"LEVX1"


def _header_lines(batch: ExitBatch) -> str:
    dom = batch.domain
    lines = batch.model.config_lines() + [
        f"domain_shape={dom.shape}",
        f"domain_center={','.join(repr(c) for c in dom.center)}",
        f"domain_radius={dom.radius!r}",
        f"domain_r_inner={dom.r_inner!r}",
        f"domain_r_outer={dom.r_outer!r}",
        f"start={','.join(repr(c) for c in batch.start)}",
        f"master_seed={batch.config.master_seed}",
        f"n_paths={batch.config.n_paths}",
        f"dt0={batch.config.dt0!r}",
        f"scheme={batch.config.scheme}",
        f"bias_budget={batch.config.bias_budget!r}",
        f"bias_bound={batch.bias_bound!r}",
    ]
    return "\n".join(lines) + "\n"


def save_batch(batch: ExitBatch, path) -> None:
    path = Path(path)
    header = _header_lines(batch).encode()
    n, d = batch.exits.shape
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(np.array(len(header), dtype="<u4").tobytes())
        f.write(header)
        f.write(np.array(n, dtype="<u8").tobytes())
        f.write(np.array(d, dtype="<u4").tobytes())
        f.write(np.array(0 if batch.tau is None else 1, dtype="u1").tobytes())
        if batch.tau is not None:
            f.write(batch.tau.astype("<f8").tobytes())
        f.write(batch.exits.astype("<f8").tobytes())
        f.write(batch.steps.astype("<i8").tobytes())


def load_batch(path) -> ExitBatch:
    data = Path(path).read_bytes()
    if data[:5] != MAGIC:
        raise ValueError(f"{path}: not a LEVX1 batch file")
    off = 5
    hlen = int(np.frombuffer(data[off:off + 4], dtype="<u4")[0])
    off += 4
    fields = {}
    for line in data[off:off + hlen].decode().splitlines():
        if line.strip():
            k, v = line.split("=", 1)
            fields[k] = v
    off += hlen
    n = int(np.frombuffer(data[off:off + 8], dtype="<u8")[0]); off += 8
    d = int(np.frombuffer(data[off:off + 4], dtype="<u4")[0]); off += 4
    has_tau = bool(data[off]); off += 1
    tau = None
    if has_tau:
        tau = np.frombuffer(data[off:off + 8 * n], dtype="<f8").copy(); off += 8 * n
    exits = np.frombuffer(data[off:off + 8 * n * d], dtype="<f8").reshape(n, d).copy()
    off += 8 * n * d
    steps = np.frombuffer(data[off:off + 8 * n], dtype="<i8").copy()

    model = make_model(fields["kind"], int(fields["dim"]), float(fields["alpha"]),
                       float(fields["tempering"]),
                       quad_rel_tol=float(fields["quad_rel_tol"]),
                       quad_abs_tol=float(fields["quad_abs_tol"]),
                       grid_min=float(fields["grid_min"]),
                       grid_max=float(fields["grid_max"]))
    center = [float(v) for v in fields["domain_center"].split(",")]
    if fields["domain_shape"] == "Ball":
        dom = DomainSpec.ball(center, float(fields["domain_radius"]))
    else:
        dom = DomainSpec.annulus(center, float(fields["domain_r_inner"]),
                                 float(fields["domain_r_outer"]))
    cfg = SimConfig(master_seed=int(fields["master_seed"]),
                    n_paths=int(fields["n_paths"]), dt0=float(fields["dt0"]),
                    scheme=fields["scheme"], bias_budget=float(fields["bias_budget"]))
    start = tuple(float(v) for v in fields["start"].split(","))
    return ExitBatch(model=model, domain=dom, start=start, config=cfg,
                     exits=exits, tau=tau, steps=steps,
                     bias_bound=float(fields["bias_bound"]))


def export_batch_csv(batch: ExitBatch, path) -> None:
    n, d = batch.exits.shape
    cols = ",".join(f"x{i+1}" for i in range(d))
    buf = io.StringIO()
    buf.write(f"path,tau,{cols},steps\n")
    tau = batch.tau if batch.tau is not None else np.full(n, np.nan)
    for i in range(n):
        xs = ",".join(repr(v) for v in batch.exits[i])
        t = "" if np.isnan(tau[i]) else repr(tau[i])
        buf.write(f"{i},{t},{xs},{batch.steps[i]}\n")
    Path(path).write_text(buf.getvalue())

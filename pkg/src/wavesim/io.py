"""File formats: velocity rasters and complex fields (``VELM``/``CFLD``),
network checkpoints (``LSGD``), flat key-value run configs and metrics CSV.

All binary formats are little-endian. Grid files share a 45-byte header::

    magic    4s   b"VELM" or b"CFLD"
    version  u8
    nx, nz   u32, u32
    dx, dz   f64, f64
    x_min    f64
    z_min    f64

followed by ``float32`` payload in C order over ``(nx, nz)``: the velocity
raster, or the real plane then the imaginary plane.
"""

import csv
import math
import os
import struct
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .exceptions import ConfigError, FormatError
from .fd import ComplexField
from .lsq import EpsilonSchedule
from .medium import Domain, HelmholtzProblem, PMLSpec, SourceSpec, VelocityModel
from .network import Architecture, NetworkParams
from .training import TrainConfig

GRID_HEADER = struct.Struct("<4sBIIdddd")
GRID_VERSION = 1
VELOCITY_MAGIC = b"VELM"
FIELD_MAGIC = b"CFLD"

CHECKPOINT_MAGIC = b"LSGD"
CHECKPOINT_VERSION = 1

METRICS_HEADER = ["epoch", "loss", "val_rel_l2", "lr", "epsilon", "seconds"]


def _write_grid(path, magic, nx, nz, dx, dz, x0, z0, planes):
    header = GRID_HEADER.pack(magic, GRID_VERSION, nx, nz, dx, dz, x0, z0)
    with open(path, "wb") as fh:
        fh.write(header)
        for plane in planes:
            fh.write(np.ascontiguousarray(plane, dtype="<f4").tobytes())


def _read_grid(path, magic, n_planes):
    data = Path(path).read_bytes()
    if len(data) < GRID_HEADER.size:
        raise FormatError(f"{path}: truncated header", offset=len(data))
    got, version, nx, nz, dx, dz, x0, z0 = GRID_HEADER.unpack_from(data)
    if got != magic:
        raise FormatError(f"{path}: bad magic {got!r}, expected {magic!r}", offset=0)
    if version != GRID_VERSION:
        raise FormatError(f"{path}: unsupported version {version}", offset=4)
    expected = GRID_HEADER.size + 4 * nx * nz * n_planes
    if len(data) != expected:
        raise FormatError(f"{path}: payload is {len(data) - GRID_HEADER.size} bytes, "
                          f"header implies {expected - GRID_HEADER.size}",
                          offset=min(len(data), expected))
    flat = np.frombuffer(data, dtype="<f4", offset=GRID_HEADER.size).astype(float)
    planes = flat.reshape(n_planes, nx, nz)
    return planes, dx, dz, x0, z0


def save_velocity(path, model):
    _write_grid(path, VELOCITY_MAGIC, model.nx, model.nz, model.dx, model.dz,
                model.x0, model.z0, [model.values])


def load_velocity(path):
    planes, dx, dz, x0, z0 = _read_grid(path, VELOCITY_MAGIC, 1)
    return VelocityModel(planes[0], dx, dz, x0, z0)


def save_field(path, field):
    _write_grid(path, FIELD_MAGIC, field.nx, field.nz, field.dx, field.dz,
                field.x0, field.z0, [field.values.real, field.values.imag])


def load_field(path):
    planes, dx, dz, x0, z0 = _read_grid(path, FIELD_MAGIC, 2)
    return ComplexField(planes[0] + 1j * planes[1], dx, dz, x0, z0)


# checkpoint: magic, version u8, K u32, n_hidden u32, widths u32 * n_hidden,
# then f64 weights (row-major) and bias per hidden layer, W_out last
def save_checkpoint(path, params):
    arch = params.arch
    head = struct.pack("<4sBII", CHECKPOINT_MAGIC, CHECKPOINT_VERSION, arch.K,
                       len(arch.hidden_sizes))
    head += struct.pack(f"<{len(arch.hidden_sizes)}I", *arch.hidden_sizes)
    with open(path, "wb") as fh:
        fh.write(head)
        for w, b in zip(params.weights, params.biases):
            fh.write(np.ascontiguousarray(w, dtype="<f8").tobytes())
            fh.write(np.ascontiguousarray(b, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(params.W_out, dtype="<f8").tobytes())


def load_checkpoint(path):
    data = Path(path).read_bytes()
    fixed = struct.calcsize("<4sBII")
    if len(data) < fixed:
        raise FormatError(f"{path}: truncated checkpoint header", offset=len(data))
    magic, version, K, n_hidden = struct.unpack_from("<4sBII", data)
    if magic != CHECKPOINT_MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}", offset=0)
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported version {version}", offset=4)
    off = fixed + 4 * n_hidden
    if len(data) < off:
        raise FormatError(f"{path}: truncated layer widths", offset=len(data))
    widths = struct.unpack_from(f"<{n_hidden}I", data, fixed)
    arch = Architecture(K, widths)
    shapes = []
    for fan_in, fan_out in arch.layer_shapes:
        shapes += [(fan_in, fan_out), (fan_out,)]
    shapes.append((arch.P, arch.out_dim))
    expected = off + 8 * sum(math.prod(s) for s in shapes)
    if len(data) != expected:
        raise FormatError(f"{path}: checkpoint payload length mismatch",
                          offset=min(len(data), expected))
    arrays = []
    for shape in shapes:
        n = math.prod(shape)
        arrays.append(np.frombuffer(data, dtype="<f8", count=n, offset=off)
                      .reshape(shape).astype(float))
        off += 8 * n
    return NetworkParams(arrays[0:-1:2], arrays[1:-1:2], arrays[-1], arch)


class MetricsWriter:
    """Append-only CSV stream; the header is written once per new file."""

    def __init__(self, path):
        self.path = Path(path)
        fresh = not self.path.exists() or self.path.stat().st_size == 0
        self._fh = open(self.path, "a", newline="")
        self._writer = csv.writer(self._fh)
        if fresh:
            self._writer.writerow(METRICS_HEADER)
            self._fh.flush()

    def write(self, rec):
        def fmt(v):
            return "" if v is None else repr(float(v))
        self._writer.writerow([rec.epoch, fmt(rec.loss), fmt(rec.val_rel_l2),
                               fmt(rec.lr), fmt(rec.epsilon), fmt(rec.seconds)])
        self._fh.flush()

    def close(self):
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_metrics(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != METRICS_HEADER:
            raise FormatError(f"{path}: unexpected metrics header {reader.fieldnames}")
        rows = []
        for row in reader:
            rows.append({k: (None if v == "" else (int(v) if k == "epoch" else float(v)))
                         for k, v in row.items()})
    return rows


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional_float(text):
    return None if text.strip().lower() in ("", "none", "auto") else float(text)


def _optional_int(text):
    return None if text.strip().lower() in ("", "none", "auto") else int(text)


def _int_tuple(text):
    return tuple(int(t) for t in text.replace(" ", "").split(",") if t)


@dataclass
class RunConfig:
    """Flat run configuration. Lengths in meters, velocities in m/s, Hz."""

    # files (relative paths resolve against the config file's directory)
    velocity_file: str = "velocity.velm"
    reference_file: str = "reference.cfld"
    field_file: str = "reference.cfld"
    prediction_file: str = "prediction.cfld"
    checkpoint_file: str = "model.lsgd"
    metrics_file: str = "metrics.csv"
    # geometry and source
    x_left: float = 0.0
    x_right: float = 1000.0
    z_top: float = 0.0
    z_bottom: float = 1000.0
    source_x: float = 500.0
    source_z: float = 100.0
    frequency_hz: float = 4.0
    # absorbing layer used by the network's PDE
    pml_enabled: bool = False
    pml_thickness: float = 200.0
    pml_a0: float = 0.8
    pml_omega0: float | None = None
    # reference solver
    fd_pml_thickness: float = 1000.0
    fd_pml_a0: float = 0.8
    fd_spacing: float = 20.0
    fd_refine: int = 4
    # procedural models (make-model)
    model_kind: str = "two_layer"
    model_spacing: float = 10.0
    model_v_top: float = 1500.0
    model_v_bottom: float = 2500.0
    model_interface_depth: float = 500.0
    model_seed: int = 0
    # network and training
    mode: str = "lsgd"
    hidden_sizes: tuple = (64, 64, 64, 64)
    encoding_level: int = 3
    n_collocation: int = 500
    n_constraint: int | None = None
    beta: float = 1.0
    epochs: int = 2000
    lr_start: float = 2e-3
    lr_end: float = 7e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    eps_start: float = 0.1
    eps_end: float = 1e-4
    eps_decay_epochs: int = 1000
    constraint_block: str = "diagonal"
    length_scale: float = 1e-3
    seed: int = 0
    validate_every: int = 100
    base_dir: str = "."

    def path(self, name):
        p = Path(getattr(self, name))
        return p if p.is_absolute() else Path(self.base_dir) / p

    def domain(self):
        t = self.pml_thickness if self.pml_enabled else 0.0
        return Domain.from_interior(self.x_left, self.x_right, self.z_top,
                                    self.z_bottom, t)

    def pml(self):
        if not self.pml_enabled:
            return PMLSpec()
        return PMLSpec(self.pml_thickness, self.pml_a0, self.pml_omega0, True)

    def fd_pml(self):
        return PMLSpec(self.fd_pml_thickness, self.fd_pml_a0, None, True)

    def source(self):
        return SourceSpec(self.source_x, self.source_z, self.frequency_hz)

    def problem(self, model=None):
        if model is None:
            model = load_velocity(self.path("velocity_file"))
        return HelmholtzProblem(model, self.source(), self.domain(), self.pml())

    def train_config(self):
        return TrainConfig(
            mode=self.mode, pml_enabled=self.pml_enabled, N=self.n_collocation,
            N_C=self.n_constraint, beta=self.beta, epochs=self.epochs,
            lr_start=self.lr_start, lr_end=self.lr_end,
            adam_beta1=self.adam_beta1, adam_beta2=self.adam_beta2,
            eps_adam=self.adam_eps,
            eps_schedule=EpsilonSchedule(self.eps_start, self.eps_end,
                                         self.eps_decay_epochs),
            constraint_block=self.constraint_block, seed=self.seed,
            validate_every=self.validate_every)

    def architecture(self):
        return Architecture(self.encoding_level, self.hidden_sizes)


def _parser_for(f):
    t = f.type
    if f.name == "hidden_sizes":
        return _int_tuple
    if f.name == "pml_omega0":
        return _optional_float
    if f.name == "n_constraint":
        return _optional_int
    return {"bool": _bool, "int": int, "float": float, "str": str}[
        t if isinstance(t, str) else t.__name__]


def parse_config(text, base_dir="."):
    """Parse ``key = value`` lines (``#`` starts a comment)."""
    known = {f.name: f for f in fields(RunConfig) if f.name != "base_dir"}
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in known:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _parser_for(known[key])(value)
        except ValueError as err:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {err}") from err
    return RunConfig(base_dir=str(base_dir), **values)


def load_config(path):
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from err
    return parse_config(text, base_dir=os.path.dirname(os.path.abspath(path)))


def format_config(cfg):
    """Inverse of :func:`parse_config` (base_dir omitted)."""
    lines = []
    for f in fields(RunConfig):
        if f.name == "base_dir":
            continue
        v = getattr(cfg, f.name)
        if v is None:
            v = "auto"
        elif isinstance(v, tuple):
            v = ",".join(str(i) for i in v)
        lines.append(f"{f.name} = {v}")
    return "\n".join(lines) + "\n"

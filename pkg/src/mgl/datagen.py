"""Random Fourier-series inputs, dataset assembly, and persistence.

1d samples: u(t) = sum_j n_j^(-beta) * (a_j sin(2 pi n_j t) + b_j cos(2 pi n_j t))
2d samples combine the four sin/cos products per mode pair with decay
(k^2 + l^2)^(-beta/2). Frequencies are drawn uniformly from the
configured integer range, amplitudes are standard normal.

Per-sample randomness comes from `Rng.spawn(seed, index)`, so datasets
are reproducible bit for bit from (config, seed) and samples could be
generated in any order. Draw order within a sample is documented in
each sampler.

Binary container: magic "MGL1", version u16, dim u8, grid n u32,
count u32, then the inputs block followed by the targets block as
row-major little-endian float64. A JSON manifest sits next to the file.
"""

from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .hilbert import Field1D, Field2D, Grid1D, Grid2D
from .operators import OperatorSpec, apply, op_from_dict, op_to_dict
from .rng import Rng

MAGIC = b"MGL1"
VERSION = 1


class ConfigError(ValueError):
    """A generation config is inconsistent with itself or the grid."""


class FormatError(ValueError):
    """A dataset file is malformed; the message names the bad section."""


@dataclass(frozen=True)
class FourierFieldConfig:
    dim: int
    k_min: int  # modes per sample, lower bound
    k_max: int
    n_min: int  # frequency range, inclusive
    n_max: int
    beta: float
    seed: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ConfigError(f"dim must be 1 or 2, got {self.dim}")
        if not (1 <= self.k_min <= self.k_max):
            raise ConfigError(f"need 1 <= k_min <= k_max, got [{self.k_min}, {self.k_max}]")
        if not (1 <= self.n_min <= self.n_max):
            raise ConfigError(f"need 1 <= n_min <= n_max, got [{self.n_min}, {self.n_max}]")
        if self.beta < 0:
            raise ConfigError(f"beta must be nonnegative, got {self.beta}")


def validate_against_grid(cfg: FourierFieldConfig, n: int) -> None:
    # n_max == n/2 is allowed: the sine component of the Nyquist mode
    # vanishes on the grid but the draw is still well defined.
    if cfg.n_max > n // 2:
        raise ConfigError(
            f"frequency range: n_max={cfg.n_max} exceeds the grid Nyquist mode {n // 2}"
        )


def sample_field_1d(cfg: FourierFieldConfig, grid: Grid1D, rng: Rng) -> Field1D:
    """Draw order: K, then per mode j: n_j, a_j, b_j."""
    validate_against_grid(cfg, grid.n)
    t = grid.points()
    u = np.zeros(grid.n)
    k = rng.randint(cfg.k_min, cfg.k_max)
    for _ in range(k):
        n_j = rng.randint(cfg.n_min, cfg.n_max)
        a_j = rng.normal()
        b_j = rng.normal()
        scale = n_j ** (-cfg.beta)
        u += scale * (a_j * np.sin(2 * np.pi * n_j * t) + b_j * np.cos(2 * np.pi * n_j * t))
    return Field1D(grid, u)


def sample_field_2d(cfg: FourierFieldConfig, grid: Grid2D, rng: Rng) -> Field2D:
    """Draw order: K, then per mode j: k_j, l_j, a_j, b_j, c_j, d_j."""
    validate_against_grid(cfg, grid.n)
    x, y = grid.points()
    u = np.zeros((grid.n, grid.n))
    k = rng.randint(cfg.k_min, cfg.k_max)
    for _ in range(k):
        k_j = rng.randint(cfg.n_min, cfg.n_max)
        l_j = rng.randint(cfg.n_min, cfg.n_max)
        a_j, b_j, c_j, d_j = (rng.normal() for _ in range(4))
        scale = float(np.sqrt(k_j * k_j + l_j * l_j)) ** (-cfg.beta) if cfg.beta else 1.0
        sx, cx = np.sin(2 * np.pi * k_j * x), np.cos(2 * np.pi * k_j * x)
        sy, cy = np.sin(2 * np.pi * l_j * y), np.cos(2 * np.pi * l_j * y)
        u += scale * (a_j * sx * sy + b_j * sx * cy + c_j * cx * sy + d_j * cx * cy)
    return Field2D(grid, u)


@dataclass
class Dataset:
    grid_n: int
    dim: int
    inputs: np.ndarray = field(repr=False)
    targets: np.ndarray = field(repr=False)
    manifest: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets must have equal length")

    def __len__(self) -> int:
        return len(self.inputs)

    @property
    def grid(self):
        return Grid1D(self.grid_n) if self.dim == 1 else Grid2D(self.grid_n)

    def input_field(self, i: int):
        cls = Field1D if self.dim == 1 else Field2D
        return cls(self.grid, self.inputs[i])


def build_dataset(A: OperatorSpec, cfg: FourierFieldConfig, grid, count: int,
                  label: str = "") -> Dataset:
    if count < 1:
        raise ConfigError(f"need at least one sample, got {count}")
    master = Rng(cfg.seed)
    sampler = sample_field_1d if cfg.dim == 1 else sample_field_2d
    inputs, targets = [], []
    for i in range(count):
        f = sampler(cfg, grid, master.spawn(i))
        inputs.append(f.values)
        targets.append(apply(A, f).values)
    manifest = {
        "operator": op_to_dict(A),
        "grid": grid.n,
        "config": asdict(cfg),
        "seed": cfg.seed,
        "count": count,
        "label": label,
        "created_by_version": __version__,
    }
    return Dataset(grid.n, cfg.dim, np.stack(inputs), np.stack(targets), manifest)


def _manifest_path(path) -> Path:
    return Path(str(path) + ".json")


def save(ds: Dataset, path) -> None:
    path = Path(path)
    header = MAGIC + struct.pack("<HBII", VERSION, ds.dim, ds.grid_n, len(ds))
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(ds.inputs, dtype="<f8").tobytes())
        f.write(np.ascontiguousarray(ds.targets, dtype="<f8").tobytes())
    with open(_manifest_path(path), "w") as f:
        json.dump(ds.manifest, f, indent=1, sort_keys=True)


def _read_exact(f, nbytes: int, section: str) -> bytes:
    buf = f.read(nbytes)
    if len(buf) != nbytes:
        raise FormatError(
            f"truncated file in section '{section}': wanted {nbytes} bytes at offset {f.tell() - len(buf)}, got {len(buf)}"
        )
    return buf


def load(path) -> Dataset:
    path = Path(path)
    with open(path, "rb") as f:
        magic = _read_exact(f, 4, "magic")
        if magic != MAGIC:
            raise FormatError(f"bad magic {magic!r} at offset 0, expected {MAGIC!r}")
        version, dim, grid_n, count = struct.unpack("<HBII", _read_exact(f, 11, "header"))
        if version != VERSION:
            raise FormatError(f"unsupported version {version}")
        if dim not in (1, 2):
            raise FormatError(f"bad dim {dim} in header")
        shape = (count, grid_n) if dim == 1 else (count, grid_n, grid_n)
        per_block = count * grid_n ** dim * 8
        inputs = np.frombuffer(_read_exact(f, per_block, "inputs block"), dtype="<f8").reshape(shape)
        targets = np.frombuffer(_read_exact(f, per_block, "targets block"), dtype="<f8").reshape(shape)
        trailing = f.read(1)
        if trailing:
            raise FormatError(f"unexpected trailing bytes at offset {f.tell() - 1}")
    manifest = load_manifest(path)
    return Dataset(grid_n, dim, inputs.copy(), targets.copy(), manifest)


def load_manifest(path) -> dict:
    mpath = _manifest_path(path)
    if mpath.exists():
        with open(mpath) as f:
            return json.load(f)
    return {}


def dataset_operator(ds: Dataset) -> OperatorSpec:
    return op_from_dict(ds.manifest["operator"])

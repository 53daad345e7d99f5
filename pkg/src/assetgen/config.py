"""Model configuration and the key = value config-file format."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path

from .errors import SchemaViolation

CONFIG_VERSION = 1


@dataclass
class ModelConfig:
    """Architecture and conditioning knobs shared by encoder, assets, and denoiser."""

    image_size: int = 64
    patch_size: int = 8
    enc_dim: int = 128        # feature width of the visual encoder
    enc_depth: int = 4
    enc_heads: int = 4
    no_pe: bool = False       # drop positional encoding in the encoder
    freeze_encoder: bool = False
    roi_out: int = 2          # RoI grid side; K = roi_out**2 tokens per asset
    cond_dim: int = 256       # width of conditioning tokens
    pose_dim: int = 256       # width of the pose embedding
    pose_hidden: int = 256
    pose_repr: str = "corners"   # corners | center
    background: str = "full"     # full | no_bg | no_pose
    n_max: int = 4
    z_ref: float = 10.0
    unet_base: int = 64
    unet_mults: tuple[int, ...] = (1, 2, 4)
    unet_attn_levels: int = 2    # cross-attention at this many lowest grids
    timesteps: int = 1000
    schedule: str = "cosine"     # cosine | linear

    def __post_init__(self):
        if self.image_size % self.patch_size != 0:
            raise ValueError("image_size must be a multiple of patch_size")
        if self.pose_repr not in ("corners", "center"):
            raise ValueError(f"unknown pose_repr {self.pose_repr!r}")
        if self.background not in ("full", "no_bg", "no_pose"):
            raise ValueError(f"unknown background mode {self.background!r}")
        if self.schedule not in ("cosine", "linear"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        self.unet_mults = tuple(int(m) for m in self.unet_mults)

    @property
    def grid_size(self) -> int:
        return self.image_size // self.patch_size

    @property
    def tokens_per_asset(self) -> int:
        return self.roi_out**2

    @property
    def pose_input_dim(self) -> int:
        return 12 if self.pose_repr == "corners" else 10

    def config_hash(self) -> str:
        payload = json.dumps(dataclasses.asdict(self), sort_keys=True, default=list)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["unet_mults"] = list(self.unet_mults)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise SchemaViolation(f"unknown model config keys: {sorted(unknown)}")
        return cls(**d)


def load_kv_file(path: str | Path) -> dict[str, str]:
    """Parse a versioned ``key = value`` config document."""
    path = Path(path)
    out: dict[str, str] = {}
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SchemaViolation(
                f"line {lineno}: expected 'key = value'", path=str(path), field=line
            )
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    version = out.pop("config_version", None)
    if version is None:
        raise SchemaViolation("missing config_version", path=str(path), field="config_version")
    if int(version) != CONFIG_VERSION:
        raise SchemaViolation(
            f"unsupported config_version {version}", path=str(path), field="config_version"
        )
    return out


def coerce_value(text: str, target_type) -> object:
    if target_type is bool:
        low = text.lower()
        if low in ("true", "1", "yes"):
            return True
        if low in ("false", "0", "no"):
            return False
        raise ValueError(f"cannot parse bool from {text!r}")
    if target_type is int:
        return int(text)
    if target_type is float:
        return float(text)
    if target_type is str:
        return text
    # tuple-of-ints fields, e.g. unet_mults = 1,2,4
    if "tuple" in str(target_type):
        return tuple(int(p.strip()) for p in text.split(",") if p.strip())
    raise ValueError(f"unsupported config field type {target_type}")


def apply_kv(instance, kv: dict[str, str], *, consume: set[str] | None = None):
    """Set dataclass fields from string values; returns the updated instance.

    Keys not matching a field are left for other consumers; ``consume``
    collects the keys that were applied.
    """
    import typing

    hints = typing.get_type_hints(type(instance))
    field_names = {f.name for f in dataclasses.fields(instance)}
    updates = {}
    for key, text in kv.items():
        if key in field_names:
            updates[key] = coerce_value(text, hints[key])
            if consume is not None:
                consume.add(key)
    return dataclasses.replace(instance, **updates)

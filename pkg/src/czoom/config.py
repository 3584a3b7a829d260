"""
Layered settings: dataclass defaults < INI config file < command-line overrides.

The config file is plain INI with one section per component::

    [crop_labeling]
    n_steps = 2
    sigma = 20

Tuples are written comma separated (``object_size = 8, 40``); the detector
miss curve is a list of ``size:probability`` knots (``10:0, 20:1``).
"""

import configparser
import dataclasses

from .crop_labeling import CropLabelConfig
from .dataset import AugmentConfig
from .errors import CZoomError
from .evaluation import EvalConfig
from .fusion import FusionConfig
from .simulator import MockDetectorConfig, SceneConfig


class UsageError(CZoomError):
    """Bad command-line or config-file usage (unknown key, unparsable value)."""


def _fields(cls, skip=()):
    return {f.name: f.default for f in dataclasses.fields(cls) if f.name not in skip}


DEFAULTS = {
    "crop_labeling": _fields(CropLabelConfig),
    "augment": _fields(AugmentConfig, skip=("crop_label",)),
    "fusion": _fields(FusionConfig),
    "evaluation": _fields(EvalConfig, skip=("iou_thresholds", "recall_points")),
    "scene": _fields(SceneConfig),
    "detector": _fields(MockDetectorConfig),
    "experiment": {"n_images": 200, "seed": 42},
}

DESCRIPTIONS = {
    "n_steps": "number of merging steps N",
    "sigma": "box expansion in pixels before merging",
    "theta": "IoU threshold for connecting two boxes",
    "pi": "maximum crop area as a fraction of the image",
    "min_members": "minimum boxes per crop",
    "strategy": "iterative | single_step_factor | single_step_pixels",
    "strategy_param": "scale factor or pixels for the single-step strategies",
    "crop_confidence_threshold": "minimum score tau of a crop detection",
    "crop_category_id": "category id of the density crop class",
}


def _parse(value: str, default, key):
    value = value.strip()
    try:
        if key == "miss_curve":
            knots = []
            for part in value.split(","):
                size, prob = part.split(":")
                knots.append((float(size), float(prob)))
            return tuple(knots)
        if isinstance(default, bool):
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(value)
        if isinstance(default, tuple):
            parts = [p.strip() for p in value.split(",") if p.strip()]
            if len(parts) != len(default):
                raise ValueError(f"expected {len(default)} comma-separated values")
            return tuple(type(d)(p) for d, p in zip(default, parts))
        if value.lower() in ("none", ""):
            return None
        if isinstance(default, int):
            return int(value)
        if isinstance(default, float) or default is None:
            try:
                return int(value) if key.endswith("_id") else float(value)
            except ValueError:
                if default is None:
                    return value
                raise
        return value
    except (ValueError, TypeError):
        raise UsageError(f"cannot parse {key}={value!r}") from None


def resolve_key(key: str):
    """Map ``section.key`` or an unambiguous bare ``key`` to ``(section, key)``."""
    if "." in key:
        section, name = key.split(".", 1)
        if section in DEFAULTS and name in DEFAULTS[section]:
            return section, name
        raise UsageError(f"unknown config key {key!r}")
    hits = [s for s, keys in DEFAULTS.items() if key in keys]
    if len(hits) == 1:
        return hits[0], key
    if not hits:
        raise UsageError(f"unknown config key {key!r}")
    raise UsageError(f"ambiguous config key {key!r}; use one of " + ", ".join(f"{s}.{key}" for s in hits))


class Settings:
    def __init__(self):
        self.values = {s: dict(v) for s, v in DEFAULTS.items()}

    def set(self, section, key, value):
        if section not in DEFAULTS or key not in DEFAULTS[section]:
            raise UsageError(f"unknown config key {section}.{key}")
        if isinstance(value, str):
            value = _parse(value, DEFAULTS[section][key], key)
        self.values[section][key] = value

    def read_file(self, path):
        parser = configparser.ConfigParser()
        try:
            with open(path, encoding="utf-8") as fh:
                parser.read_file(fh)
        except configparser.Error as exc:
            raise UsageError(f"{path}: {exc}") from None
        for section in parser.sections():
            if section not in DEFAULTS:
                raise UsageError(f"{path}: unknown section [{section}]")
            for key, value in parser.items(section):
                self.set(section, key, value)

    def apply_overrides(self, overrides):
        for item in overrides or ():
            if "=" not in item:
                raise UsageError(f"override {item!r} is not key=value")
            key, value = item.split("=", 1)
            section, name = resolve_key(key.strip())
            self.set(section, name, value)

    def crop_label(self) -> CropLabelConfig:
        return CropLabelConfig(**self.values["crop_labeling"])

    def augment(self) -> AugmentConfig:
        return AugmentConfig(crop_label=self.crop_label(), **self.values["augment"])

    def fusion(self, crop_category_id=None) -> FusionConfig:
        vals = dict(self.values["fusion"])
        if crop_category_id is not None and vals["crop_category_id"] is None:
            vals["crop_category_id"] = crop_category_id
        return FusionConfig(**vals)

    def evaluation(self) -> EvalConfig:
        return EvalConfig(**self.values["evaluation"])

    def scene(self) -> SceneConfig:
        return SceneConfig(**self.values["scene"])

    def detector(self) -> MockDetectorConfig:
        return MockDetectorConfig(**self.values["detector"])


def format_value(v):
    if isinstance(v, float):
        return f"{v:g}"
    if isinstance(v, tuple):
        if v and isinstance(v[0], tuple):
            return ", ".join(f"{format_value(a)}:{format_value(b)}" for a, b in v)
        return ", ".join(format_value(x) for x in v)
    return "none" if v is None else str(v)


def describe_defaults() -> str:
    lines = ["config keys (section.key=default):"]
    for section, keys in DEFAULTS.items():
        lines.append(f"  [{section}]")
        for key, default in keys.items():
            desc = DESCRIPTIONS.get(key)
            lines.append(f"    {key}={format_value(default)}" + (f"  ({desc})" if desc else ""))
    return "\n".join(lines)


def default_ini() -> str:
    """The built-in defaults rendered as a config file."""
    out = []
    for section, keys in DEFAULTS.items():
        out.append(f"[{section}]")
        for key, default in keys.items():
            desc = DESCRIPTIONS.get(key)
            if desc:
                out.append(f"# {desc}")
            out.append(f"{key} = {format_value(default)}")
        out.append("")
    return "\n".join(out)

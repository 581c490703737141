"""Run configuration: flat `section.key=value` files layered over defaults.

Precedence is defaults < config file < command-line flags. Recognized keys:

    run.data              comma-separated dataset paths
    run.label_col, run.seed, run.test_fraction, run.out
    preprocess.<field>    any PreprocessConfig field, plus de_reference
    selector.<field>      importance_threshold_rule, rfe_step, rfecv_k,
                          rfecv_min_features, rfe_target,
                          reuse_rfecv_survivors, estimator
    model.<family>.<hp>   hyperparameter default for a model family
    grid.family, grid.k, grid.<hp>=v1,v2,...
    synth.<field>         SyntheticSpec field
    embed.d, embed.k, embed.metric
    bench.rfe_target      integer, or "auto" (the combined strategy's count)
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path

from .classifiers import FAMILIES, LINEAR_FAMILIES, ModelSpec
from .errors import ConfigError
from .preprocess import PreprocessConfig
from .selection import FROM_RFECV, SelectorConfig
from .seeding import derive_seed

_SELECTOR_KEYS = ("importance_threshold_rule", "rfe_step", "rfecv_k", "rfecv_min_features", "rfe_target",
                  "reuse_rfecv_survivors", "estimator")
_SYNTH_KEYS = ("n_samples", "n_features", "n_informative", "n_classes", "class_separation", "noise_std")
_EMBED_KEYS = ("d", "k", "metric")


def parse_config_text(text: str, source="<config>") -> dict:
    """Flat {dotted key: raw string}. Blank lines and lines starting with # are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key=value, got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if "." not in key or not all(key.split(".")):
            raise ConfigError(f"{source}:{lineno}: key {key!r} needs a section prefix like run.seed")
        if key in out:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        out[key] = value
    return out


def load_config_file(path) -> dict:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config_text(path.read_text(encoding="utf-8"), str(path))


def number(text):
    """int when the text is integral without a decimal point or exponent, else float."""
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return text
    s = str(text).strip()
    try:
        if any(ch in s for ch in ".eE") or s.lower() in ("inf", "-inf", "nan"):
            return float(s)
        return int(s)
    except ValueError:
        raise ConfigError(f"not a number: {text!r}") from None


def _int(text, what):
    v = number(text)
    if isinstance(v, float):
        if v != int(v):
            raise ConfigError(f"{what} must be an integer, got {text!r}")
        v = int(v)
    return v


def _bool(text, what):
    s = str(text).strip().lower()
    if s in ("true", "1", "yes"):
        return True
    if s in ("false", "0", "no"):
        return False
    raise ConfigError(f"{what} must be true or false, got {text!r}")


@dataclass(frozen=True)
class RunConfig:
    data: tuple = ()
    label_col: str = "label"
    seed: int = 0
    test_fraction: float = 0.25
    out: str = "out"
    preprocess: PreprocessConfig = field(default_factory=PreprocessConfig)
    de_reference: str = None
    selector: dict = field(default_factory=dict)
    models: dict = field(default_factory=dict)
    grid_family: str = "linear_svc"
    grid_k: int = 5
    grid: dict = field(default_factory=dict)
    synth: dict = field(default_factory=dict)
    embed: dict = field(default_factory=dict)
    bench_rfe_target: object = "auto"

    def __post_init__(self):
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError(f"seed must be an unsigned 64-bit value, got {self.seed}")
        if not 0 < self.test_fraction < 1:
            raise ConfigError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")

    def model_spec(self, family: str, label: str) -> ModelSpec:
        """Default spec for `family` with configured overrides and a derived seed."""
        return ModelSpec(family, dict(self.models.get(family, {})), derive_seed(self.seed, label))

    def selector_config(self) -> SelectorConfig:
        s = dict(self.selector)
        estimator = s.pop("estimator", "linear_svc")
        if estimator not in LINEAR_FAMILIES:
            raise ConfigError(f"selector.estimator must be one of {', '.join(LINEAR_FAMILIES)}")
        return SelectorConfig(
            tree_spec=self.model_spec("random_forest", "tree_select"),
            estimator_spec=self.model_spec(estimator, "estimator"),
            seed=self.seed,
            **s,
        )

    def split_seed(self) -> int:
        return derive_seed(self.seed, "split")

    def check_paths(self):
        for p in self.data:
            if not Path(p).is_file():
                raise ConfigError(f"dataset not found: {p}")


def build_run_config(flat: dict = None, **overrides) -> RunConfig:
    """Typed RunConfig from a flat key map; keyword overrides (None = unset) win."""
    flat = dict(flat or {})
    kw = {}
    pre = {}
    selector = {}
    models = {}
    grid = {}
    synth = {}
    embed = {}
    pre_fields = {f.name for f in dataclasses.fields(PreprocessConfig)}
    for key, value in flat.items():
        section, _, rest = key.partition(".")
        if section == "run":
            if rest == "data":
                kw["data"] = tuple(p.strip() for p in value.split(",") if p.strip())
            elif rest == "label_col":
                kw["label_col"] = value
            elif rest == "seed":
                kw["seed"] = _int(value, key)
            elif rest == "test_fraction":
                kw["test_fraction"] = float(number(value))
            elif rest == "out":
                kw["out"] = value
            else:
                raise ConfigError(f"unknown config key {key!r}")
        elif section == "preprocess":
            if rest == "de_reference":
                kw["de_reference"] = value
            elif rest in pre_fields:
                pre[rest] = float(number(value))
            else:
                raise ConfigError(f"unknown config key {key!r}")
        elif section == "selector":
            if rest not in _SELECTOR_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            if rest in ("rfe_step",):
                selector[rest] = number(value)
            elif rest in ("rfecv_k", "rfecv_min_features"):
                selector[rest] = _int(value, key)
            elif rest == "rfe_target":
                selector[rest] = value if value == FROM_RFECV else _int(value, key)
            elif rest == "reuse_rfecv_survivors":
                selector[rest] = _bool(value, key)
            else:
                selector[rest] = value
        elif section == "model":
            family, _, hp = rest.partition(".")
            if family not in FAMILIES or not hp:
                raise ConfigError(f"unknown config key {key!r}")
            models.setdefault(family, {})[hp] = value
        elif section == "grid":
            if rest == "family":
                kw["grid_family"] = value
            elif rest == "k":
                kw["grid_k"] = _int(value, key)
            else:
                grid[rest] = [v.strip() for v in value.split(",") if v.strip()]
        elif section == "synth":
            if rest not in _SYNTH_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            synth[rest] = number(value)
        elif section == "embed":
            if rest not in _EMBED_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            embed[rest] = value if rest == "metric" else _int(value, key)
        elif section == "bench":
            if rest != "rfe_target":
                raise ConfigError(f"unknown config key {key!r}")
            kw["bench_rfe_target"] = value if value == "auto" else _int(value, key)
        else:
            raise ConfigError(f"unknown config section in {key!r}")
    for name, value in overrides.items():
        if value is not None:
            kw[name] = value
    try:
        kw["preprocess"] = PreprocessConfig(**pre)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None
    # validate model overrides early so errors name the config key
    for family, hps in models.items():
        ModelSpec(family, hps)
    cfg = RunConfig(selector=selector, models=models, grid=grid, synth=synth, embed=embed, **kw)
    cfg.selector_config()
    return cfg

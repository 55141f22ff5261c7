"""Experiment configuration loaded from JSON, with field-named validation errors."""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError
from .inferencenet import CRFConfig
from .inflector import InflectorConfig
from .lemmagen import LemmaGenConfig
from .taglm import TagLMConfig
from .wakesleep import WakeSleepConfig

DATA_DIR_ENV = "MORPHOGEN_DATA_DIR"
STANDARD_BUDGETS = (500, 1000, 5000)
MODES = ("nn", "svae")


@dataclass
class SyntheticData:
    """Use the built-in suffixing language instead of CoNLL-U files."""
    unlabeled_tokens: int = 2000
    heldout_types: int = 100


@dataclass
class ExperimentConfig:
    train: str | None = None  # CoNLL-U; labeled prefix plus unlabeled remainder
    eval: str | None = None  # CoNLL-U whose type lexicon is the evaluation set
    synthetic: SyntheticData | None = None
    tokens: int = 500
    mode: str = "svae"
    seed: int = 0
    output_dir: str = "runs/default"
    decode: str = "beam"
    wakesleep: WakeSleepConfig = field(default_factory=WakeSleepConfig)

    @property
    def budget_name(self) -> str:
        return str(self.tokens) if self.tokens in STANDARD_BUDGETS else "custom"

    def resolve(self, path: str) -> Path:
        p = Path(path)
        if not p.is_absolute() and os.environ.get(DATA_DIR_ENV):
            p = Path(os.environ[DATA_DIR_ENV]) / p
        return p

    def validate(self) -> None:
        if self.train is None and self.synthetic is None:
            raise ConfigError("train: a CoNLL-U path is required unless 'synthetic' is set")
        for name in ("train", "eval"):
            value = getattr(self, name)
            if value is not None and not self.resolve(value).is_file():
                raise ConfigError(f"{name}: file not found: {self.resolve(value)}")
        if self.synthetic is not None:
            if self.synthetic.unlabeled_tokens < 0:
                raise ConfigError("synthetic.unlabeled_tokens: must be >= 0")
            if self.synthetic.heldout_types < 1:
                raise ConfigError("synthetic.heldout_types: must be >= 1")
        if not isinstance(self.tokens, int) or self.tokens < 1:
            raise ConfigError(f"tokens: must be a positive integer, got {self.tokens!r}")
        if self.mode not in MODES:
            raise ConfigError(f"mode: must be one of {MODES}, got {self.mode!r}")
        if self.decode not in ("beam", "greedy"):
            raise ConfigError(f"decode: must be 'beam' or 'greedy', got {self.decode!r}")
        try:
            self.wakesleep.validate()
        except ConfigError as e:
            raise ConfigError(f"wakesleep: {e}") from None

    def semantic_dict(self) -> dict:
        """Everything that affects results; the output location does not."""
        d = dataclasses.asdict(self)
        d.pop("output_dir")
        d["wakesleep"].pop("seed")  # superseded by the top-level seed
        return d

    def fingerprint(self) -> str:
        blob = json.dumps(self.semantic_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n"


_SUBCONFIGS = {"taglm": TagLMConfig, "lemmagen": LemmaGenConfig, "inflector": InflectorConfig, "crf": CRFConfig}


def _build(cls, data, where: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{where}: expected an object")
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - names)
    if unknown:
        raise ConfigError(f"{where}.{unknown[0]}: unknown field" if where else f"{unknown[0]}: unknown field")
    try:
        return cls(**data)
    except TypeError as e:
        raise ConfigError(f"{where or 'config'}: {e}") from None


def config_from_dict(data: dict) -> ExperimentConfig:
    data = dict(data)
    ws = dict(data.pop("wakesleep", {}) or {})
    for key, cls in _SUBCONFIGS.items():
        ws[key] = _build(cls, ws.get(key, {}), f"wakesleep.{key}")
    data["wakesleep"] = _build(WakeSleepConfig, ws, "wakesleep")
    if data.get("synthetic") is not None:
        data["synthetic"] = _build(SyntheticData, data["synthetic"], "synthetic")
    return _build(ExperimentConfig, data, "")


def load_config(path) -> ExperimentConfig:
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise ConfigError(f"config: file not found: {path}") from None
    except json.JSONDecodeError as e:
        raise ConfigError(f"config: invalid JSON at line {e.lineno}: {e.msg}") from None
    return config_from_dict(data)


def desk_config(seed: int = 0, mode: str = "svae") -> ExperimentConfig:
    """Reduced network sizes that run the synthetic comparison in minutes on one CPU."""
    ws = WakeSleepConfig(
        iterations=2, gamma_sleep=0.25, gamma_wake=0.25, seed=seed,
        taglm=TagLMConfig(embed_dim=32, hidden=32, layers=1, epochs=10, lr=1.0),
        lemmagen=LemmaGenConfig(epochs=200),
        inflector=InflectorConfig(embed_dim=48, hidden=48, epochs=60),
    )
    return ExperimentConfig(synthetic=SyntheticData(), tokens=200, mode=mode, seed=seed,
                            output_dir=f"runs/synthetic-{mode}-{seed}", wakesleep=ws)

"""Experiment configuration: a flat ``key = value`` text file."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace

from .lm import MAX_ORDER, ConfigError


@dataclass(frozen=True)
class ExperimentConfig:
    # Input files; empty means the copy shipped with the package.
    inventory: str = ""
    lexicon: str = ""
    rules: str = ""
    out: str = "experiment"

    seed: int = 0
    n_utts: int = 500
    n_train_utts: int = 500
    min_words: int = 2
    max_words: int = 4

    rule_rate: float = 0.15
    sharpness: float = 2.5
    noise: float = 1.0

    lm_order: int = 5
    smoothing: str = "add_k"
    smoothing_k: float = 0.1

    lm_weight: float = 0.7
    beam: int = 8
    variant_cap: int = 16
    skip_penalty: float = -4.0

    min_count: int = 5
    min_rate: float = 0.05
    top_k: int = 5

    def __post_init__(self):
        checks = [
            (self.n_utts >= 1, "n_utts must be >= 1"),
            (self.n_train_utts >= 1, "n_train_utts must be >= 1"),
            (1 <= self.min_words <= self.max_words, "need 1 <= min_words <= max_words"),
            (0 <= self.rule_rate < 1, "rule_rate must lie in [0, 1)"),
            (self.sharpness > 0, "sharpness must be > 0"),
            (self.noise >= 0, "noise must be >= 0"),
            (1 <= self.lm_order <= MAX_ORDER, f"lm_order must be in 1..{MAX_ORDER}"),
            (self.smoothing in ("add_k", "witten_bell"), "smoothing must be add_k or witten_bell"),
            (self.smoothing_k > 0, "smoothing_k must be > 0"),
            (self.lm_weight >= 0, "lm_weight must be >= 0"),
            (self.beam >= 1, "beam must be >= 1"),
            (self.variant_cap >= 1, "variant_cap must be >= 1"),
            (self.skip_penalty <= 0, "skip_penalty must be <= 0"),
            (self.min_count >= 1, "min_count must be >= 1"),
            (0 < self.min_rate <= 1, "min_rate must lie in (0, 1]"),
            (self.top_k >= 1, "top_k must be >= 1"),
        ]
        for ok, message in checks:
            if not ok:
                raise ConfigError(message)

    @classmethod
    def from_mapping(cls, values: dict[str, str], base: "ExperimentConfig | None" = None) -> "ExperimentConfig":
        base = base or cls()
        types = {f.name: type(f.default) for f in fields(cls)}
        parsed = {}
        for key, raw in values.items():
            if key not in types:
                raise ConfigError(f"unknown config key {key!r}")
            kind = types[key]
            try:
                parsed[key] = kind(raw)
            except ValueError:
                raise ConfigError(f"bad value for {key}: {raw!r}") from None
        return replace(base, **parsed)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        values: dict[str, str] = {}
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
                key, value = (s.strip() for s in line.split("=", 1))
                if key in values:
                    raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
                values[key] = value
        return cls.from_mapping(values)

    def to_text(self, include_out: bool = True) -> str:
        lines = []
        for f in fields(self):
            if f.name == "out" and not include_out:
                continue
            lines.append(f"{f.name} = {getattr(self, f.name)}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        """Hash of every setting except the output directory."""
        return hashlib.sha256(self.to_text(include_out=False).encode()).hexdigest()[:16]

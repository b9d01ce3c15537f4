"""Flat key=value run configuration with a strict schema.

Lines are ``key=value``; ``#`` starts a comment; blank lines ignored.
Unknown keys are rejected so typos fail fast. Path defaults that are
empty resolve against ``output_dir`` (see :meth:`RunConfig.resolve`).
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path


class ConfigError(ValueError):
    """Bad configuration: unknown key, bad type, out-of-range value."""


def _parse_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(p) for p in text.split(",") if p.strip() != ""]
    except ValueError as exc:
        raise ConfigError(f"expected comma-separated integers, got {text!r}") from exc


@dataclass
class RunConfig:
    # paths; empty strings resolve to defaults under output_dir
    corpus: str = ""
    valid_corpus: str = ""
    output_dir: str = "out"
    vocab_file: str = ""
    rnnlm_model: str = ""
    ngram_model: str = ""
    lattice_lm: str = ""
    lattice_dir: str = ""
    # vocabulary / model geometry
    min_count: int = 1
    hidden_size: int = 100
    maxent_order: int = 3
    maxent_table_bits: int = 20
    # n-gram models
    ngram_order: int = 3
    smoothing: str = "kneser-ney"
    lattice_lm_order: int = 2
    # training
    epochs: int = 5
    learn_rate: float = 0.1
    bptt_steps: int = 1
    # decoding
    beam: int = 8
    nbest_n: int = 10
    interp_weight: float = 0.5
    lm_weight: float = 1.0
    # cache studies
    cache_capacity_kb: list[int] = None
    retain_across_utterances: bool = True
    # lattice generation
    confusion_breadth: int = 3
    utterance_count: int = 100
    seed: int = 12345

    def __post_init__(self):
        if self.cache_capacity_kb is None:
            self.cache_capacity_kb = [0, 250, 500, 750, 1000]
        self.validate()

    def validate(self) -> None:
        checks = [
            ("min_count", 1 <= self.min_count),
            ("hidden_size", 1 <= self.hidden_size <= 4096),
            ("maxent_order", 1 <= self.maxent_order <= 8),
            ("maxent_table_bits", 4 <= self.maxent_table_bits <= 30),
            ("ngram_order", 1 <= self.ngram_order <= 5),
            ("lattice_lm_order", 1 <= self.lattice_lm_order <= 5),
            ("epochs", 1 <= self.epochs),
            ("learn_rate", self.learn_rate >= 0),
            ("bptt_steps", 1 <= self.bptt_steps),
            ("beam", 1 <= self.beam),
            ("nbest_n", 1 <= self.nbest_n),
            ("interp_weight", 0.0 <= self.interp_weight <= 1.0),
            ("lm_weight", self.lm_weight > 0),
            ("cache_capacity_kb", all(c >= 0 for c in self.cache_capacity_kb)),
            ("confusion_breadth", 1 <= self.confusion_breadth),
            ("utterance_count", 1 <= self.utterance_count),
        ]
        for name, ok in checks:
            if not ok:
                raise ConfigError(f"{name} out of range: {getattr(self, name)!r}")
        if self.smoothing not in ("kneser-ney", "absolute-discount"):
            raise ConfigError(f"unknown smoothing {self.smoothing!r}")
        if self.lattice_lm_order - 1 > self.maxent_order:
            raise ConfigError(
                "lattice_lm_order - 1 must not exceed maxent_order "
                "(the stored history feeds the small-LM context)")

    def resolve(self, name: str) -> Path:
        """Resolve a path field, defaulting into output_dir."""
        value = getattr(self, name)
        if value:
            return Path(value)
        defaults = {
            "vocab_file": "vocab.tsv",
            "rnnlm_model": "rnnlm.bin",
            "ngram_model": "ngram.arpa",
            "lattice_lm": "lattice_lm.arpa",
            "lattice_dir": "lattices",
        }
        if name not in defaults:
            raise ConfigError(f"path {name} is required but not set")
        return Path(self.output_dir) / defaults[name]

    def echo(self) -> str:
        """Single-line summary for report headers."""
        parts = [f"{f.name}={getattr(self, f.name)}" for f in fields(self)]
        return " ".join(parts)


_FIELD_TYPES = {f.name: f.type for f in fields(RunConfig)}


def load_config(path: str | Path) -> RunConfig:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.strip()
            if key not in _FIELD_TYPES:
                raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _convert(key, value, path, lineno)
    try:
        return RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def _convert(key: str, value: str, path, lineno: int):
    ftype = _FIELD_TYPES[key]
    try:
        if ftype in ("int", int):
            return int(value)
        if ftype in ("float", float):
            return float(value)
        if ftype in ("bool", bool):
            return _parse_bool(value)
        if "list[int]" in str(ftype):
            return _parse_int_list(value)
        return value
    except (ValueError, ConfigError) as exc:
        raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc

"""Configuration surfaces.

Server settings come from a KEY=VALUE file ('#' comments, blank lines
ignored) overridden by TAGLOOP_* environment variables and then by CLI
flags. Experiments and projects are described by a single declarative
JSON file: corpus (synthetic generator parameters or file paths),
scheme, loop settings, and for simulations a strategy x seed matrix.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

from .corpus import (
    DEFAULT_ENTITY_TYPES,
    DEFAULT_LABEL_MAPPING,
    CorpusSplit,
    LabelScheme,
    read_corpus,
)
from .loop import LoopConfig
from .strategies import STRATEGY_IDS
from .synth import GeneratorConfig, generate_synthetic_corpus

__all__ = [
    "read_kv_config",
    "server_settings",
    "SimulationConfig",
    "load_simulation_config",
    "build_corpus",
    "load_project_config",
]

ENV_PREFIX = "TAGLOOP_"

SERVER_DEFAULTS = {
    "host": "127.0.0.1",
    "port": 8000,
    "lease_seconds": None,
    "project_dir": None,
}

_SERVER_PARSERS = {
    "host": str,
    "port": int,
    "lease_seconds": float,
    "project_dir": str,
}


def read_kv_config(path) -> dict:
    """Parse a KEY=VALUE file into lowercase server settings."""
    settings = {}
    with open(str(path), encoding="utf-8") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected KEY=VALUE, got {line!r}")
            key, _, value = line.partition("=")
            key = key.strip().lower()
            if key not in _SERVER_PARSERS:
                raise ValueError(
                    f"{path}:{lineno}: unknown key {key!r}; "
                    f"valid keys: {sorted(_SERVER_PARSERS)}"
                )
            settings[key] = _SERVER_PARSERS[key](value.strip())
    return settings


def server_settings(config_path=None, env=None, overrides=None) -> dict:
    """Defaults < config file < TAGLOOP_* environment < explicit flags."""
    env = os.environ if env is None else env
    settings = dict(SERVER_DEFAULTS)
    if config_path is not None:
        settings.update(read_kv_config(config_path))
    for key, parser in _SERVER_PARSERS.items():
        raw = env.get(ENV_PREFIX + key.upper())
        if raw is not None:
            settings[key] = parser(raw)
    for key, value in (overrides or {}).items():
        if value is not None:
            settings[key] = value
    return settings


# ---------------------------------------------------------------------------
# Declarative corpus + experiment configs.


def _scheme_from_dict(payload: dict | None) -> LabelScheme | None:
    if payload is None:
        return None
    return LabelScheme(
        entity_types=tuple(payload.get("entity_types", DEFAULT_ENTITY_TYPES)),
        mapping=tuple(tuple(rule) for rule in payload.get("mapping", DEFAULT_LABEL_MAPPING)),
    )


def build_corpus(corpus: dict, scheme: LabelScheme | None) -> tuple[CorpusSplit, LabelScheme]:
    """Materialize a corpus section: synthetic generator or file paths."""
    if "synthetic" in corpus:
        params = dict(corpus["synthetic"])
        rng_seed = params.pop("rng_seed", 0)
        if "entity_types" in params:
            params["entity_types"] = tuple(params["entity_types"])
        generator = GeneratorConfig(**params)
        split = generate_synthetic_corpus(generator, rng_seed=rng_seed)
        return split, scheme if scheme is not None else generator.scheme()
    if "files" in corpus:
        files = corpus["files"]
        fmt = files.get("format", "subtoken")
        if scheme is None:
            scheme = LabelScheme(
                entity_types=DEFAULT_ENTITY_TYPES, mapping=DEFAULT_LABEL_MAPPING
            )
        parts = {}
        for name in ("seed", "pool", "validation", "test"):
            if name in files:
                parts[name] = tuple(
                    read_corpus(files[name], fmt=fmt, scheme=scheme, id_prefix=name)
                )
            else:
                parts[name] = ()
        return CorpusSplit(**parts), scheme
    raise ValueError("corpus section needs either 'synthetic' or 'files'")


@dataclass(frozen=True)
class SimulationConfig:
    corpus: dict
    loop: dict
    strategies: tuple[str, ...]
    seeds: tuple[int, ...]
    scheme: dict | None = None
    hard_bio_constraints: bool = True

    def runs(self) -> list[tuple[str, int]]:
        return [(s, seed) for s in self.strategies for seed in self.seeds]

    def loop_config(self, strategy: str, seed: int) -> LoopConfig:
        payload = dict(self.loop)
        payload["strategy"] = strategy
        payload["rng_seed"] = seed
        return LoopConfig.from_dict(payload)

    def build(self) -> tuple[CorpusSplit, LabelScheme]:
        return build_corpus(self.corpus, _scheme_from_dict(self.scheme))


def load_simulation_config(path) -> SimulationConfig:
    with open(str(path), encoding="utf-8") as handle:
        payload = json.load(handle)
    strategies = tuple(payload.get("strategies", ["ltp"]))
    for strategy in strategies:
        if strategy not in STRATEGY_IDS:
            raise ValueError(
                f"invalid strategy id {strategy!r}; valid ids: {', '.join(STRATEGY_IDS)}"
            )
    seeds = tuple(int(s) for s in payload.get("seeds", [0]))
    if "corpus" not in payload:
        raise ValueError("config needs a 'corpus' section")
    loop = dict(payload.get("loop", {}))
    loop.pop("strategy", None)
    loop.pop("rng_seed", None)
    return SimulationConfig(
        corpus=payload["corpus"],
        loop=loop,
        strategies=strategies,
        seeds=seeds,
        scheme=payload.get("scheme"),
        hard_bio_constraints=payload.get("hard_bio_constraints", True),
    )


def load_project_config(path) -> dict:
    """Project creation config: corpus + scheme + loop + annotators."""
    with open(str(path), encoding="utf-8") as handle:
        payload = json.load(handle)
    if "corpus" not in payload:
        raise ValueError("project config needs a 'corpus' section")
    if not payload.get("annotators"):
        raise ValueError("project config needs an 'annotators' map (name -> token)")
    split, scheme = build_corpus(payload["corpus"], _scheme_from_dict(payload.get("scheme")))
    loop = LoopConfig.from_dict(payload.get("loop", {}))
    return {
        "split": split,
        "scheme": scheme,
        "config": loop,
        "annotator_tokens": dict(payload["annotators"]),
        "project_id": payload.get("project_id", "project"),
        "lease_seconds": float(payload.get("lease_seconds", 600.0)),
        "metric_mode": payload.get("metric_mode", "exclusive"),
    }

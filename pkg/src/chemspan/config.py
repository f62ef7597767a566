"""Pipeline configuration with the published defaults.

Everything the trainers and CLI read lives here: encoder size, span
enumeration limit, context window budgets, epoch counts, and the tuned
optimizer settings for the built-in encoder. Config files are plain JSON
holding any subset of these keys, grouped by section.
"""

import dataclasses
import json
from dataclasses import dataclass
from typing import Optional


@dataclass
class EncoderConfig:
    dim: int = 64
    blocks: int = 2
    ffn_dim: int = 128
    buckets: int = 2048
    max_len: int = 512


@dataclass
class NerConfig:
    max_span_width: int = 16        # candidate spans run from width 1 to this
    width_dim: int = 25             # learned width embedding size
    context_window: int = 300       # token budget shared by both sides
    epochs: int = 50
    batch_size: int = 16
    lr: float = 3e-3


@dataclass
class RelationConfig:
    variant: str = "C"              # which representation layout to use
    head_hidden: int = 64
    context_window: int = 100
    epochs: int = 10
    batch_size: int = 16
    lr: float = 3e-3


@dataclass
class PipelineConfig:
    encoder: EncoderConfig = dataclasses.field(default_factory=EncoderConfig)
    ner: NerConfig = dataclasses.field(default_factory=NerConfig)
    relation: RelationConfig = dataclasses.field(default_factory=RelationConfig)
    seeds: int = 5                  # how many seeds a multi-seed run averages

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        cfg = cls()
        for section_name, section_cls in (("encoder", EncoderConfig),
                                          ("ner", NerConfig),
                                          ("relation", RelationConfig)):
            overrides = data.get(section_name, {})
            section = getattr(cfg, section_name)
            for key, value in overrides.items():
                if not hasattr(section, key):
                    raise KeyError(f"unknown config key {section_name}.{key}")
                setattr(section, key, value)
        if "seeds" in data:
            cfg.seeds = int(data["seeds"])
        return cfg

    @classmethod
    def from_json(cls, path) -> "PipelineConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {
            "encoder": dataclasses.asdict(self.encoder),
            "ner": dataclasses.asdict(self.ner),
            "relation": dataclasses.asdict(self.relation),
            "seeds": self.seeds,
        }


def load_config(path: Optional[str]) -> PipelineConfig:
    return PipelineConfig() if path is None else PipelineConfig.from_json(path)

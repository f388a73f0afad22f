"""Token, prompt and cost accounting for one audit run."""

from __future__ import annotations

import json
import threading
from collections import defaultdict
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Optional

from ..errors import ConfigInvalid

MILLION = Decimal(1_000_000)


@dataclass(frozen=True)
class Rates:
    """Price per million input and output tokens, kept as exact decimals."""

    input_per_million: Decimal = Decimal(0)
    output_per_million: Decimal = Decimal(0)
    currency: str = "USD"

    @classmethod
    def from_dict(cls, d: dict) -> "Rates":
        try:
            return cls(Decimal(str(d["input_per_million"])), Decimal(str(d["output_per_million"])),
                       d.get("currency", "USD"))
        except (KeyError, ArithmeticError) as exc:
            raise ConfigInvalid(f"bad rates configuration: {exc}") from exc

    @classmethod
    def load(cls, path) -> "Rates":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigInvalid(f"cannot read rates file {path}: {exc}") from exc

    def cost(self, input_tokens: int, output_tokens: int) -> Decimal:
        return (Decimal(input_tokens) * self.input_per_million + Decimal(output_tokens) * self.output_per_million) / MILLION


@dataclass
class LedgerEntry:
    template: str
    fingerprint: str
    source: str
    input_tokens: int
    output_tokens: int
    latency: float


@dataclass
class RunLedger:
    rates: Rates = field(default_factory=Rates)
    entries: list = field(default_factory=list)
    cache_hits: int = 0
    cache_misses: int = 0
    wall_time: float = 0.0

    def __post_init__(self):
        self._lock = threading.Lock()

    def record(self, response, template: str, source: Optional[str] = None) -> None:
        with self._lock:
            self.entries.append(LedgerEntry(template, response.fingerprint, source or "",
                                            response.input_tokens, response.output_tokens, response.latency))

    @property
    def prompt_rounds(self) -> int:
        return len(self.entries)

    @property
    def input_tokens(self) -> int:
        return sum(e.input_tokens for e in self.entries)

    @property
    def output_tokens(self) -> int:
        return sum(e.output_tokens for e in self.entries)

    @property
    def model_latency(self) -> float:
        return sum(e.latency for e in self.entries)

    @property
    def financial_cost(self) -> Decimal:
        return self.rates.cost(self.input_tokens, self.output_tokens)

    def rounds(self, template: str) -> int:
        return sum(1 for e in self.entries if e.template == template)

    def per_source(self) -> dict:
        table = defaultdict(lambda: {"prompt_rounds": 0, "input_tokens": 0, "output_tokens": 0})
        for e in self.entries:
            row = table[e.source]
            row["prompt_rounds"] += 1
            row["input_tokens"] += e.input_tokens
            row["output_tokens"] += e.output_tokens
        return dict(sorted(table.items()))

    def to_dict(self) -> dict:
        """Deterministic totals; clock readings live in :meth:`timing`."""
        return {
            "prompt_rounds": self.prompt_rounds,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "financial_cost": str(self.financial_cost),
            "currency": self.rates.currency,
            "rates": {
                "input_per_million": str(self.rates.input_per_million),
                "output_per_million": str(self.rates.output_per_million),
            },
            "cache_hits": self.cache_hits,
            "cache_misses": self.cache_misses,
            "per_template": {
                t: self.rounds(t) for t in sorted({e.template for e in self.entries})
            },
            "per_source": self.per_source(),
        }

    def timing(self) -> dict:
        model = self.model_latency
        return {"wall_time_s": round(self.wall_time, 6), "model_latency_s": round(model, 6),
                "local_compute_s": round(max(self.wall_time - model, 0.0), 6)}

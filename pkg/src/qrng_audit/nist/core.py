"""Result and configuration types for the SP 800-22 battery."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

from ..stats import PValue

RANDOM = "random"
NON_RANDOM = "non_random"
NOT_APPLICABLE = "not_applicable"
VERDICTS = (RANDOM, NON_RANDOM, NOT_APPLICABLE)


def verdict_for(p_values, alpha: float = 0.01) -> str:
    """``random`` iff every p-value is >= alpha (ties pass)."""
    ps = list(p_values)
    if not ps:
        return NOT_APPLICABLE
    return RANDOM if all(p >= alpha for p in ps) else NON_RANDOM


@dataclass(frozen=True)
class LabeledP:
    label: str
    value: PValue

    def to_dict(self) -> dict:
        return {"label": self.label, "value": float(self.value)}


@dataclass(frozen=True)
class TestResult:
    """Outcome of one test on one sequence.

    ``p_values`` holds every p-value the test produces (148 for the
    non-overlapping template test); ``headline`` is what a one-cell-per-test
    row shows.
    """

    __test__ = False  # not a pytest class

    test_name: str
    params: dict
    p_values: tuple = ()
    statistics: dict = field(default_factory=dict)
    applicable: bool = True
    verdict: str = NOT_APPLICABLE
    note: str = ""

    @classmethod
    def make(cls, name: str, params: dict, p_values, statistics: dict, alpha: float) -> "TestResult":
        ps = tuple(LabeledP(label, PValue(v)) for label, v in p_values)
        return cls(name, dict(params), ps, dict(statistics), True,
                   verdict_for((p.value for p in ps), alpha))

    @classmethod
    def not_applicable(cls, name: str, params: dict, reason: str, **statistics) -> "TestResult":
        return cls(name, dict(params), (), dict(statistics), False, NOT_APPLICABLE, reason)

    @property
    def values(self) -> list[float]:
        return [float(p.value) for p in self.p_values]

    @property
    def headline(self) -> list[float]:
        if self.test_name == "non_overlapping_template" and self.p_values:
            return [min(self.values)]
        return self.values

    def to_dict(self) -> dict:
        return {
            "name": self.test_name,
            "params": self.params,
            "p_values": [p.to_dict() for p in self.p_values],
            "statistics": self.statistics,
            "applicable": self.applicable,
            "verdict": self.verdict,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TestResult":
        ps = tuple(LabeledP(p["label"], PValue(p["value"])) for p in d["p_values"])
        return cls(d["name"], d["params"], ps, d.get("statistics", {}), d["applicable"],
                   d["verdict"], d.get("note", ""))


@dataclass(frozen=True)
class SuiteConfig:
    """Battery parameters.

    ``strict`` enforces the standard's recommended minimum lengths (e.g.
    n >= 100 for monobit, m < log2(n) - 2 for serial); with ``strict=False``
    only structural minimums apply, which is what the standard's short
    worked examples need.  ``spectral_workdir``, ``spectral_incore_bits``
    and ``spectral_slab_bytes`` only affect how the spectral test computes,
    never what it returns, so they are left out of :meth:`digest`.
    """

    alpha: float = 0.01
    strict: bool = True
    block_frequency_m: int | None = None
    serial_m: int = 16
    apen_m: int = 10
    linear_complexity_m: int = 500
    template_m: int = 9
    template_blocks: int = 8
    overlapping_m: int = 9
    overlapping_block: int = 1032
    universal_l: int | None = None
    universal_q: int | None = None
    spectral_cap_bits: int = 1 << 30
    spectral_incore_bits: int = 1 << 25
    spectral_slab_bytes: int = 128 << 20
    spectral_workdir: str | None = None

    _NON_SEMANTIC = ("spectral_workdir", "spectral_incore_bits", "spectral_slab_bytes")

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        cap = self.spectral_cap_bits
        if cap < 1 << 10 or cap & (cap - 1):
            raise ValueError(f"spectral_cap_bits must be a power of two >= 2**10, got {cap}")
        if self.serial_m < 2:
            raise ValueError("serial_m must be >= 2")
        if not 1 <= self.apen_m <= 24:
            raise ValueError("apen_m must be in 1..24")
        if not 2 <= self.template_m <= 16:
            raise ValueError("template_m must be in 2..16")
        if self.universal_l is not None and not 1 <= self.universal_l <= 16:
            raise ValueError("universal_l must be in 1..16")
        if self.block_frequency_m is not None and self.block_frequency_m < 1:
            raise ValueError("block_frequency_m must be positive")
        for name in ("linear_complexity_m", "template_blocks", "overlapping_block", "overlapping_m"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")

    def to_dict(self, semantic_only: bool = False) -> dict:
        d = dataclasses.asdict(self)
        if semantic_only:
            for k in self._NON_SEMANTIC:
                d.pop(k, None)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SuiteConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown suite config keys: {sorted(unknown)}")
        return cls(**d)

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(semantic_only=True), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def dumps(obj: Any) -> str:
    """Stable JSON used for every document this package writes."""
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"

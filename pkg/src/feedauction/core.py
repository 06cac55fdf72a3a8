"""Shared vocabulary for the simulator: seeded random substreams and round records.

Contexts are plain numpy arrays. A single agent's context is a vector of
``dim`` floats; a round's context block is an ``(n_agents, dim)`` matrix with
one row per agent. Functions that consume contexts validate shapes and raise
:class:`DimensionMismatchError` on mismatch rather than broadcasting silently.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np

__all__ = [
    "CODE_VERSION",
    "ConfigurationError",
    "DimensionMismatchError",
    "Report",
    "RngStream",
    "RoundRecord",
    "derive_seed",
    "derive_stream",
]

CODE_VERSION = "0.1.0"


class DimensionMismatchError(ValueError):
    """An array argument had the wrong shape for the receiving object."""


class ConfigurationError(ValueError):
    """A parameter combination is invalid or out of its documented range."""


_MASK64 = (1 << 64) - 1


def _splitmix64(state: int) -> int:
    # One output step of the splitmix64 generator; used purely as a bit mixer.
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    state = ((state ^ (state >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    state = ((state ^ (state >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state ^ (state >> 31)


def derive_seed(master_seed: int, name: str) -> int:
    """Mix a master seed with a stream name into a stable 64-bit seed.

    The mixing absorbs the UTF-8 bytes of ``name`` one at a time through
    splitmix64, so distinct names give unrelated seeds while equal
    ``(master_seed, name)`` pairs always give the same seed, independent of
    platform and process.
    """
    if not name:
        raise ValueError("stream name must be non-empty")
    state = _splitmix64(master_seed & _MASK64)
    for byte in name.encode("utf-8"):
        state = _splitmix64(state ^ byte)
    return state


@dataclass
class RngStream:
    """A named deterministic random substream.

    Two streams built from the same ``(master_seed, name)`` pair produce
    identical draw sequences; streams with different names are statistically
    independent. The underlying generator is mutable state with a single
    owner: do not share one stream between consumers whose draw order is not
    fixed.
    """

    master_seed: int
    name: str
    gen: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.gen = np.random.Generator(
            np.random.PCG64(derive_seed(self.master_seed, self.name))
        )

    def random(self, size: int | tuple[int, ...] | None = None):
        """Uniform draws on [0, 1)."""
        return self.gen.random(size)

    def integers(self, upper: int, size: int | tuple[int, ...] | None = None):
        """Uniform integer draws on {0, ..., upper - 1}."""
        return self.gen.integers(upper, size=size)


def derive_stream(master_seed: int, name: str) -> RngStream:
    """Create the named substream of ``master_seed``."""
    return RngStream(master_seed, name)


@dataclass(frozen=True)
class Report:
    """A single binary comparison answer at a given comparison price."""

    value: bool
    comparison_price: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.comparison_price <= 1.0:
            raise ConfigurationError(
                f"comparison price {self.comparison_price} outside [0, 1]"
            )


@dataclass(frozen=True, eq=False)
class RoundRecord:
    """Full ledger entry for one auction round.

    ``true_utility`` and ``oracle_second_price`` are ground-truth diagnostics
    that only the simulation driver can know; mechanisms leave them ``None``
    and the driver fills them in afterwards. No allocation or payment decision
    may depend on them.
    """

    t: int
    contexts: np.ndarray | None
    allocated_agent: int
    explored: bool
    comparison_price: float
    report: bool
    payment: float
    true_utility: float | None = None
    oracle_second_price: float | None = None

    def to_flat_dict(self) -> dict[str, Any]:
        """Flat JSON-compatible mapping with native Python scalars."""
        contexts = None if self.contexts is None else self.contexts.tolist()
        return {
            "t": int(self.t),
            "contexts": contexts,
            "allocated_agent": int(self.allocated_agent),
            "explored": bool(self.explored),
            "comparison_price": float(self.comparison_price),
            "report": bool(self.report),
            "payment": float(self.payment),
            "true_utility": None if self.true_utility is None else float(self.true_utility),
            "oracle_second_price": (
                None if self.oracle_second_price is None else float(self.oracle_second_price)
            ),
        }

    @classmethod
    def from_flat_dict(cls, row: dict[str, Any]) -> "RoundRecord":
        contexts = row["contexts"]
        return cls(
            t=int(row["t"]),
            contexts=None if contexts is None else np.asarray(contexts, dtype=float),
            allocated_agent=int(row["allocated_agent"]),
            explored=bool(row["explored"]),
            comparison_price=float(row["comparison_price"]),
            report=bool(row["report"]),
            payment=float(row["payment"]),
            true_utility=row["true_utility"],
            oracle_second_price=row["oracle_second_price"],
        )

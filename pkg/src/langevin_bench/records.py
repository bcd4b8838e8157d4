"""Per-run outcome records shared by the samplers, optimizers and the sweep harness."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

CSV_COLUMNS = (
    "algo", "objective", "dim", "mixtures", "n_data", "trial", "seed", "step_size",
    "queries", "converged", "wall_ms", "final_value", "acceptance_rate",
)


@dataclass
class RunRecord:
    """Outcome of one algorithm run.

    ``queries`` is the gradient-query count at first passage of the stopping
    rule, or the budget when the run never converged. ``error`` is set when
    the run failed and the remaining fields are placeholders.
    """

    algo: str
    objective: str = ""
    dim: int = 0
    mixtures: int = 0
    n_data: int = 0
    trial: int = 0
    seed: int = 0
    step_size: float = float("nan")
    queries: int = 0
    converged: bool = False
    wall_ms: float = 0.0
    final_value: float = float("nan")
    acceptance_rate: float = float("nan")
    iterations: int = 0
    value_queries: int = 0
    first_passage: int | None = None
    budget: int = 0
    error: str | None = None
    notes: dict = field(default_factory=dict)

    @property
    def budget_exhausted(self) -> bool:
        return self.error is None and not self.converged

    def to_json(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, float) and not math.isfinite(v):
                out[k] = None
        return out

    @classmethod
    def from_json(cls, d: dict) -> "RunRecord":
        d = dict(d)
        for k in ("step_size", "final_value", "acceptance_rate"):
            if d.get(k) is None:
                d[k] = float("nan")
        return cls(**d)

    def csv_row(self, timing: bool = False) -> list[str]:
        def num(v):
            if v is None or (isinstance(v, float) and not math.isfinite(v)):
                return ""
            return repr(float(v)) if isinstance(v, float) else str(v)

        if self.error is not None:
            converged, queries = "error", ""
        else:
            converged, queries = ("true" if self.converged else "false"), str(self.queries)
        return [
            self.algo, self.objective, str(self.dim), str(self.mixtures), str(self.n_data),
            str(self.trial), str(self.seed), num(self.step_size), queries, converged,
            num(round(self.wall_ms, 3)) if timing else "",
            num(self.final_value), num(self.acceptance_rate),
        ]

"""Closed-form bound calculators.

Big-O constants are exposed as a multiplicative ``prefactor`` (default 1);
every report echoes it.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

from .objectives import WELL_FACTOR

__all__ = [
    "BoundReport",
    "log_sobolev_lower_bound",
    "ula_mixing_bound",
    "mala_mixing_bound",
    "packing_number",
    "optimization_lower_bound",
    "optimization_validity_threshold",
    "beta_requirement",
    "bound_report",
]

_LN2 = math.log(2.0)


def _exp(x: float) -> float:
    """``math.exp`` that saturates at ``inf`` instead of raising."""
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def log_sobolev_lower_bound(m: float, L: float, R: float) -> float:
    """``(m/2) exp(-16 L R^2)``."""
    return 0.5 * m * math.exp(-16.0 * L * R * R)


def ula_mixing_bound(eps: float, d: int, L: float, m: float, R: float, prefactor: float = 1.0) -> float:
    """``c e^{32 L R^2} kappa^2 (d/eps^2) ln(d/eps^2)``, log floored at ``ln 2``."""
    ratio = d / (eps * eps)
    kappa = L / m
    return prefactor * _exp(32.0 * L * R * R) * kappa * kappa * ratio * max(math.log(ratio), _LN2)


def mala_mixing_bound(eps: float, d: int, L: float, m: float, R: float, prefactor: float = 1.0) -> float:
    """``c (e^{40 L R^2}/m) kappa^{3/2} d^{1/2} (d ln kappa + ln 1/eps)^{3/2}``."""
    kappa = L / m
    log_kappa = max(math.log(kappa), _LN2)
    inner = d * log_kappa + math.log(1.0 / eps)
    return prefactor * _exp(40.0 * L * R * R) / m * kappa**1.5 * math.sqrt(d) * inner**1.5


def _floor_power(base: float, d: int) -> int:
    if base <= 0:
        return 0
    val = base**d
    # values a hair below an integer come from rounding in ``base``
    return int(math.floor(val * (1.0 + 1e-12)))


def packing_number(R_outer: float, r: float, d: int) -> int:
    """``floor(((R_outer - r) / (2r))^d)``, zero when ``R_outer <= r``."""
    if R_outer <= r:
        return 0
    return _floor_power((R_outer - r) / (2.0 * r), d)


def optimization_validity_threshold(L: float, R: float) -> float:
    return L * R * R / (64.0 * WELL_FACTOR)


def optimization_lower_bound(L: float, R: float, eps: float, d: int, p: float = 1.0) -> float:
    """Iterations any algorithm needs to hit an ``eps``-minimizer with probability ``p``.

    ``p * floor((R/4 sqrt(L/(2 pi^2 + pi)) / sqrt(eps) - 1/2)^d)`` for
    ``eps <= L R^2 / (64 (2 pi^2 + pi))``; 1 above that threshold.
    """
    if eps > optimization_validity_threshold(L, R):
        return 1.0
    base = R / 4.0 * math.sqrt(L / WELL_FACTOR) / math.sqrt(eps) - 0.5
    return p * _floor_power(base, d)


def beta_requirement(eps: float, d: int, L: float, R: float, p: float = 1.0) -> float:
    """Inverse temperature for ``exp(-beta U)`` to put mass ``p`` in the optimal well."""
    arg = L * R * R / (4.0 * WELL_FACTOR * eps)
    if p <= 0 or arg <= 0:
        return 0.0
    return max(math.log(p) / eps + d / (2.0 * eps) * math.log(arg), 0.0)


@dataclass
class BoundReport:
    L: float
    m: float
    R: float
    eps: float
    dim: int
    p: float
    prefactor: float
    rho_lower: float
    ula_mixing_upper: float
    mala_mixing_upper: float
    opt_queries_lower: float
    packing_eta: int
    beta_required: float
    opt_formula_valid: bool
    threshold_gap: bool

    def as_text(self) -> str:
        rows = [
            ("L", self.L), ("m", self.m), ("R", self.R), ("eps", self.eps), ("dim", self.dim),
            ("p", self.p), ("prefactor c", self.prefactor),
            ("rho lower bound", self.rho_lower),
            ("ULA mixing upper bound", self.ula_mixing_upper),
            ("MALA mixing upper bound", self.mala_mixing_upper),
            ("optimization queries lower bound", self.opt_queries_lower),
            ("packing eta", self.packing_eta),
            ("beta required", self.beta_required),
            ("opt formula valid (64 threshold)", self.opt_formula_valid),
            ("between 64 and 36 thresholds", self.threshold_gap),
        ]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k.ljust(width)}  {_fmt(v)}" for k, v in rows)

    def as_json(self) -> str:
        return json.dumps(asdict(self), indent=1, sort_keys=True)


def _fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, int):
        return str(v)
    return f"{v:.10g}"


def bound_report(L: float, m: float, R: float, eps: float, dim: int, p: float = 1.0,
                 prefactor: float = 1.0) -> BoundReport:
    r = math.sqrt(WELL_FACTOR * eps / L)
    valid = eps <= optimization_validity_threshold(L, R)
    gap = valid is False and eps < L * R * R / (36.0 * WELL_FACTOR)
    return BoundReport(
        L=L, m=m, R=R, eps=eps, dim=dim, p=p, prefactor=prefactor,
        rho_lower=log_sobolev_lower_bound(m, L, R),
        ula_mixing_upper=ula_mixing_bound(eps, dim, L, m, R, prefactor),
        mala_mixing_upper=mala_mixing_bound(eps, dim, L, m, R, prefactor),
        opt_queries_lower=optimization_lower_bound(L, R, eps, dim, p),
        packing_eta=packing_number(R / 2.0, r, dim),
        beta_required=beta_requirement(eps, dim, L, R, p),
        opt_formula_valid=valid,
        threshold_gap=gap,
    )

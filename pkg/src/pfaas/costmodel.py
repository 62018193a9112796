"""Resource-time cost of serverless versus always-on deployments.

Memory inputs are MB, converted with 1 GB = 1,000 MB; ``g`` is GB-seconds per
registration and ``lam`` registrations per second. Every total is in GB-s.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, replace

MB_PER_GB = 1000.0
# duty cycles worth quoting: 8 h and 12 h of traffic per day
REFERENCE_DUTIES = (0.33, 0.50)


class DegenerateTenancy(ValueError):
    """Function memory alone reaches the always-on footprint; no tenant count helps."""


@dataclass(frozen=True)
class CostParams:
    Ms: float = 2105.0  # serverless total while running
    Mp: float = 1640.0  # platform (orchestrator, gateway, stores)
    Mf: float = 465.0  # function replicas while traffic is present
    Ma: float = 1368.0  # always-on baseline
    Mi: float = 150.0  # managed state stores
    g: float = 0.002
    lam: float = 0.0
    d: float = 1.0
    K: int = 1
    T: float = 1.0

    def __post_init__(self):
        for name in ("Ms", "Mp", "Mf", "Ma", "Mi", "g", "lam", "T"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        if not 0.0 <= self.d <= 1.0:
            raise ValueError("duty cycle must be in [0, 1]")
        if self.K < 1:
            raise ValueError("tenant count must be at least 1")

    def gb(self, name: str) -> float:
        return getattr(self, name) / MB_PER_GB

    def with_(self, **kw) -> "CostParams":
        return replace(self, **kw)


def memory_consistent(p: CostParams, tol_mb: float = 1e-6) -> bool:
    """Whether Ms equals Mp + Mf, as it does when all three come from one deployment."""
    return abs(p.Ms - (p.Mp + p.Mf)) <= tol_mb


def gs_platform_on(p: CostParams) -> float:
    return (p.gb("Mp") + p.d * p.gb("Mf")) * p.T + p.lam * p.d * p.T * p.g


def ga(p: CostParams) -> float:
    return p.gb("Ma") * p.T


def gs_shutdown(p: CostParams) -> float:
    return p.gb("Ms") * p.d * p.T + p.lam * p.d * p.T * p.g


def gs_multitenant(p: CostParams) -> float:
    """Per-tenant cost when K tenants share the platform."""
    return (p.gb("Mp") / p.K + p.d * p.gb("Mf")) * p.T


def gs_managed(p: CostParams) -> float:
    return p.gb("Mi") * p.T + p.lam * p.T * p.g


def breakeven_duty_platform_on(p: CostParams) -> float:
    """Approximate root that drops the per-registration term: (Ma - Mp) / Mf."""
    if p.Mf <= 0:
        raise ValueError("Mf must be positive")
    return (p.Ma - p.Mp) / p.Mf


def breakeven_duty_platform_on_exact(p: CostParams) -> float:
    if p.Mf <= 0:
        raise ValueError("Mf must be positive")
    return (p.gb("Ma") - p.gb("Mp")) / (p.gb("Mf") + p.lam * p.g)


def breakeven_duty_shutdown(p: CostParams) -> float:
    denom = p.gb("Ms") + p.lam * p.g
    if denom <= 0:
        raise ValueError("Ms must be positive")
    return p.gb("Ma") / denom


def shutdown_cost_ratio(p: CostParams) -> float:
    """Serverless-with-shutdown cost as a fraction of the always-on cost."""
    return gs_shutdown(p) / ga(p)


def breakeven_tenants(p: CostParams) -> int:
    if p.Ma <= p.Mf:
        raise DegenerateTenancy(f"Ma={p.Ma} MB does not exceed Mf={p.Mf} MB")
    return max(1, math.ceil(p.Mp / (p.Ma - p.Mf)))


def breakeven_rate_managed(p: CostParams) -> float:
    if p.g <= 0:
        raise ValueError("g must be positive")
    return (p.gb("Ma") - p.gb("Mi")) / p.g


@dataclass
class ThresholdRow:
    scenario: str
    condition: str
    threshold: str
    value: float | int | None
    holds: bool
    note: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(p: CostParams | None = None) -> dict:
    """The four break-even rows evaluated at the supplied d, K and lam."""
    p = p or CostParams()
    rows = []

    d_on = breakeven_duty_platform_on(p)
    d_on_exact = breakeven_duty_platform_on_exact(p)
    if d_on_exact < 0:
        cond, holds = "never cheaper", False
        note = "platform memory exceeds the always-on footprint"
    elif d_on_exact >= 1:
        cond, holds = "always cheaper", True
        note = "cheaper at every duty cycle"
    else:
        cond, holds = "d < d*", p.d < d_on_exact
        note = ""
    rows.append(ThresholdRow("self-hosted, platform on", cond, f"d* = {d_on:.3f}", d_on, holds, note))

    d_off = breakeven_duty_shutdown(p)
    rows.append(ThresholdRow("self-hosted, cluster off", "d < d*", f"d* = {d_off:.3f}", d_off, p.d < d_off,
                             f"cost ratio at d={p.d:g}: {shutdown_cost_ratio(p):.3f}"))

    try:
        k = breakeven_tenants(p)
        rows.append(ThresholdRow("multi-tenant self-hosted", "K >= K*", f"K* = {k}", k, p.K >= k))
    except DegenerateTenancy as exc:
        rows.append(ThresholdRow("multi-tenant self-hosted", "never cheaper", "K* undefined", None, False, str(exc)))

    lam_star = breakeven_rate_managed(p)
    rows.append(ThresholdRow("managed FaaS", "lambda < lambda*", f"lambda* = {lam_star:.1f} reg/s",
                             lam_star, p.lam < lam_star, "" if p.lam < lam_star else f"lambda={p.lam:g} exceeds threshold"))

    cheaper = [r.scenario for r in rows if r.holds]
    return {
        "params": asdict(p),
        "memory_consistent": memory_consistent(p),
        "exact": {
            "d_star_platform_on": d_on_exact,
            "d_star_shutdown": d_off,
            "ratio_shutdown": shutdown_cost_ratio(p),
        },
        "duty_ratios": {f"{d:.2f}": shutdown_cost_ratio(p.with_(d=d)) for d in REFERENCE_DUTIES},
        "rows": [r.to_dict() for r in rows],
        "recommendation": ("serverless is cheaper for: " + ", ".join(cheaper)) if cheaper
        else "always-on is cheaper under every modeled deployment",
    }


def render_summary(summary: dict) -> str:
    header = ("scenario", "condition", "threshold", "holds")
    rows = [(r["scenario"], r["condition"], r["threshold"], "yes" if r["holds"] else "no") for r in summary["rows"]]
    widths = [max(len(x[i]) for x in (header, *rows)) for i in range(4)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in (header, *rows)]
    lines.insert(1, "  ".join("-" * w for w in widths))
    for r in summary["rows"]:
        if r["note"]:
            lines.append(f"  {r['scenario']}: {r['note']}")
    for d, ratio in summary.get("duty_ratios", {}).items():
        lines.append(f"  cluster-off cost at d={d}: {ratio:.3f} of always-on")
    if not summary["memory_consistent"]:
        lines.append("  warning: Ms differs from Mp + Mf")
    lines.append(summary["recommendation"])
    return "\n".join(lines) + "\n"

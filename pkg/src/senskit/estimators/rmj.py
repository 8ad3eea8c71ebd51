"""Quantile estimate from a completed averaged root-finding run.

The design's deterministic gain schedule tracks a posterior-spread
sequence tau_i alongside the step sizes; after n steps the next working
point x_{n+1} is the quantile estimate and tau_{n+1} its standard error
on the working axis, giving a symmetric normal-theory interval.
"""

from __future__ import annotations

from ..designs import RmjState
from ..errors import DesignStateError
from ..models import norm_quantile
from .base import QuantileEstimate

__all__ = ["rmj_estimate"]


def rmj_estimate(state: RmjState, level: float = 0.9) -> QuantileEstimate:
    """Point and interval for the target quantile after a completed run.

    Values are on the design's working axis (log stimulus for physical
    sessions); use ``.exp()`` for natural units there.
    """
    if not state.terminated:
        raise DesignStateError(
            f"run has {len(state.history)} of {state.config.n} responses; "
            "the estimate is defined only after the final step"
        )
    point = state.final_level
    tau = state.schedule.tau[-1]
    z = norm_quantile(0.5 * (1.0 + level))
    return QuantileEstimate(
        p=state.config.p,
        point=point,
        lo=point - z * tau,
        hi=point + z * tau,
        level=level,
        method="rmj-normal",
    )

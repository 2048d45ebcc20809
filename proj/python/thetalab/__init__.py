"""Riemann theta functions and numerical tests of the Jacobian conditions."""

from ._core import (
    DirectionJet,
    RiemannMatrix,
    ThetaLabError,
    decomposability,
    flex_direction_from_one_point,
    flex_test,
    hierarchy_residual,
    hirota_residual,
    kp_field_u,
    kp_grid,
    longeq_residual,
    p_ab_residual,
    p_residual,
    sample_theta_divisor,
    search,
    theta,
    weil,
)

__all__ = [
    "jet_from_result",
    "DirectionJet",
    "RiemannMatrix",
    "ThetaLabError",
    "decomposability",
    "flex_direction_from_one_point",
    "flex_test",
    "hierarchy_residual",
    "hirota_residual",
    "kp_field_u",
    "kp_grid",
    "longeq_residual",
    "p_ab_residual",
    "p_residual",
    "sample_theta_divisor",
    "search",
    "theta",
    "weil",
]


def jet_from_result(result):
    """Best jet and shift (or None) of a search result dict."""
    jet = DirectionJet.from_dict(result["best_jet"])
    a = result.get("a")
    if a is not None:
        a = [complex(x["re"], x["im"]) for x in a]
    return jet, a

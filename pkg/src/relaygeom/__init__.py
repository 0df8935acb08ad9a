"""Outage simulator and analytic calculator for opportunistic relaying over
a Poisson field of relays.

A source at the center of a disk cell reaches a displaced destination
through randomly placed decode-and-forward relays under Rayleigh fading and
distance path loss. The package pairs closed-form/semi-analytic outage
expressions (:mod:`relaygeom.analytic`) with an independent Monte Carlo
engine (:mod:`relaygeom.montecarlo`) for two relay-knowledge regimes:
instantaneous channel knowledge at the relays, and distance ranking only.
"""

from .model import (
    FIRST_HOP_RULES,
    CellGeometry,
    RadioParams,
    Thresholds,
    compute_thresholds,
    snr_db_to_linear,
)
from .geometry import Point, Realization, dist_to_dest, k_nearest_to_dest, sample_ppp
from .montecarlo import OutageEstimate, TrialOutcome, estimate_outage
from .quadrature import QuadratureError, QuadratureSpec, integrate_1d

__version__ = "0.1.0"

__all__ = [
    "CellGeometry",
    "RadioParams",
    "Thresholds",
    "FIRST_HOP_RULES",
    "compute_thresholds",
    "snr_db_to_linear",
    "Point",
    "Realization",
    "sample_ppp",
    "dist_to_dest",
    "k_nearest_to_dest",
    "TrialOutcome",
    "OutageEstimate",
    "estimate_outage",
    "QuadratureSpec",
    "QuadratureError",
    "integrate_1d",
    "__version__",
]

"""Monte Carlo outage trials for both relay-knowledge regimes.

Reproducibility contract
------------------------
Trial ``t`` of a run seeded with ``s`` draws from its own counter-based
stream, ``Generator(Philox(key=s, counter=[0, 0, 0, t]))``; streams of
distinct trials never overlap and do not depend on scheduling, so estimates
are bit-identical for any worker count. Within a trial the draw order is
fixed: relay count, all radii, all angles, first-hop fading gains for every
relay, then second-hop gains for every *qualified* relay in input order.
Both strategies consume draws identically (the statistical strategy draws
second-hop gains even for relays it does not select), so runs that share a
seed share realizations and channels draw for draw.

Aggregation across trials is integer summation, which is order-independent.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .geometry import Point, Realization, sq_dists_to_dest
from .model import CellGeometry, RadioParams, Thresholds, compute_thresholds

log = logging.getLogger(__name__)

#: Environment variable capping the number of worker processes.
THREADS_ENV = "RELAYGEOM_THREADS"

STRATEGIES = ("exact", "stat")
OBSERVERS = ("bs", "dest")


def trial_rng(seed: int, trial_index: int) -> np.random.Generator:
    """Independent, scheduling-invariant stream for one trial."""
    if trial_index < 0:
        raise ValueError("trial_index must be >= 0")
    key = int(seed) % (1 << 128)
    return np.random.Generator(np.random.Philox(key=key, counter=[0, 0, 0, int(trial_index)]))


def _resolve_workers(workers: int | None) -> int:
    if workers is None:
        env = os.environ.get(THREADS_ENV)
        workers = int(env) if env else 1
    if not (isinstance(workers, int) and workers >= 1):
        raise ValueError(f"workers must be an integer >= 1, got {workers!r}")
    return workers


@dataclass(frozen=True)
class TrialOutcome:
    """Result of one end-to-end trial.

    ``qualified_count`` is the number of relays that decoded the source
    broadcast; ``selected_count`` is how many took part in the cooperative
    phase (at most 1 under full channel knowledge, ``min(k, qualified)``
    under distance ranking). ``qualified_count == 0`` forces an outage.
    """

    qualified_count: int
    outage: bool
    selected_count: int


@dataclass(frozen=True)
class OutageEstimate:
    """Binomial outage estimate with its standard error."""

    trials: int
    outage_count: int
    p_hat: float
    stderr: float

    @classmethod
    def from_counts(cls, outage_count: int, trials: int) -> "OutageEstimate":
        if not (trials >= 1 and 0 <= outage_count <= trials):
            raise ValueError("need 0 <= outage_count <= trials and trials >= 1")
        p = outage_count / trials
        return cls(trials, outage_count, p, math.sqrt(p * (1.0 - p) / trials))

    @property
    def below_resolution(self) -> bool:
        """True when no outage was observed, i.e. the estimate is only an
        upper bound of order ``1/trials``."""
        return self.outage_count == 0


def sample_fading_gain(rng: np.random.Generator) -> float:
    """Squared magnitude of a unit Rayleigh fading coefficient: Exp(1)."""
    return float(rng.standard_exponential())


def _qualify_mask(
    radii: np.ndarray, theta_first: float, alpha: float, rng: np.random.Generator
) -> np.ndarray:
    gains = rng.standard_exponential(radii.size)
    rpow = radii * radii if alpha == 2.0 else radii**alpha
    return gains >= theta_first * (1.0 + rpow)


def qualify_relays(
    realization: Realization,
    theta_first: float,
    path_loss_exponent: float,
    rng: np.random.Generator,
) -> tuple[Point, ...]:
    """Thin a relay field to the relays that decoded the source broadcast.

    Keeps a relay at source-distance ``r`` iff a fresh Exp(1) gain ``g``
    satisfies ``g >= theta_first * (1 + r**alpha)``, so the survivor set is
    an independent thinning with keep probability
    ``exp(-theta_first (1 + r**alpha))`` at radius ``r``.
    """
    keep = _qualify_mask(realization.radii, theta_first, path_loss_exponent, rng)
    return tuple(
        Point(float(r), float(a))
        for r, a in zip(realization.radii[keep], realization.angles[keep])
    )


def _sample_field(cell: CellGeometry, rng: np.random.Generator):
    n = int(rng.poisson(cell.mean_relay_count))
    radii = cell.cell_radius * np.sqrt(rng.random(n))
    angles = 2.0 * math.pi * rng.random(n)
    return radii, angles


def _link_trial(cell: CellGeometry, thresholds: Thresholds, rng: np.random.Generator):
    """Common first phase of a trial: field, qualification, per-relay
    second-hop outcomes. Returns (J, squared dest distances, success flags)."""
    radii, angles = _sample_field(cell, rng)
    alpha = cell.path_loss_exponent
    keep = _qualify_mask(radii, thresholds.theta_first, alpha, rng)
    j = int(np.count_nonzero(keep))
    if j == 0:
        return 0, None, None
    d2 = sq_dists_to_dest(radii[keep], angles[keep], cell.dest_distance)
    gains = rng.standard_exponential(j)
    dpow = d2 if alpha == 2.0 else d2 ** (0.5 * alpha)
    succ = gains >= thresholds.theta_second * (1.0 + dpow)
    return j, d2, succ


def trial_exact_csi(
    cell: CellGeometry, thresholds: Thresholds, rng: np.random.Generator
) -> TrialOutcome:
    """One trial under full channel knowledge (single-relay frame).

    The frame succeeds iff some relay passes both the first-hop test and an
    independent second-hop test; gains on the two hops of one relay and
    across relays are independent.
    """
    j, _, succ = _link_trial(cell, thresholds, rng)
    if j == 0:
        return TrialOutcome(0, True, 0)
    ok = bool(succ.any())
    return TrialOutcome(j, not ok, 1 if ok else 0)


def trial_stat_csi(
    cell: CellGeometry, thresholds: Thresholds, k: int, rng: np.random.Generator
) -> TrialOutcome:
    """One trial under distance ranking only.

    The ``min(k, J)`` qualified relays nearest to the destination each get
    one slot; the frame format (and hence ``theta_second``) is fixed for
    ``k`` slots in advance, even when fewer relays are available. Outage iff
    every selected relay fails, vacuously when none qualified.
    """
    if not (isinstance(k, int) and k >= 1):
        raise ValueError("k must be an integer >= 1")
    j, d2, succ = _link_trial(cell, thresholds, rng)
    if j == 0:
        return TrialOutcome(0, True, 0)
    order = np.argsort(d2, kind="stable")
    selected = order[: min(k, j)]
    ok = bool(succ[selected].any())
    return TrialOutcome(j, not ok, int(selected.size))


def _outage_block(
    strategy: str,
    cell: CellGeometry,
    thresholds: Thresholds,
    k: int,
    seed: int,
    start: int,
    stop: int,
) -> int:
    count = 0
    for t in range(start, stop):
        rng = trial_rng(seed, t)
        if strategy == "exact":
            outcome = trial_exact_csi(cell, thresholds, rng)
        else:
            outcome = trial_stat_csi(cell, thresholds, k, rng)
        count += outcome.outage
    return count


def _block_bounds(n: int, workers: int) -> list[tuple[int, int]]:
    workers = min(workers, n)
    return [(i * n // workers, (i + 1) * n // workers) for i in range(workers)]


def estimate_outage(
    strategy: str,
    cell: CellGeometry,
    radio: RadioParams,
    trials: int,
    seed: int,
    *,
    first_hop: str = "frame_rate",
    workers: int | None = None,
) -> OutageEstimate:
    """Run ``trials`` independent trials and return the outage estimate.

    ``strategy`` is ``"exact"`` (full channel knowledge, requires
    ``radio.num_relays == 1``) or ``"stat"`` (distance ranking with
    ``radio.num_relays`` slots). ``workers`` defaults to the
    ``RELAYGEOM_THREADS`` environment variable, else 1; the result is
    bit-identical for any worker count.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    if not (isinstance(trials, int) and trials >= 1):
        raise ValueError("trials must be an integer >= 1")
    if strategy == "exact" and radio.num_relays != 1:
        raise ValueError("the exact-knowledge strategy is defined for num_relays == 1")
    thresholds = compute_thresholds(radio, first_hop)
    workers = _resolve_workers(workers)
    k = radio.num_relays
    if workers == 1:
        total = _outage_block(strategy, cell, thresholds, k, seed, 0, trials)
    else:
        bounds = _block_bounds(trials, workers)
        with ProcessPoolExecutor(max_workers=len(bounds)) as pool:
            futures = [
                pool.submit(_outage_block, strategy, cell, thresholds, k, seed, lo, hi)
                for lo, hi in bounds
            ]
            total = sum(f.result() for f in futures)
    estimate = OutageEstimate.from_counts(total, trials)
    if estimate.below_resolution:
        log.info(
            "no outage in %d trials (%s): estimate below resolution %.1e",
            trials,
            strategy,
            1.0 / trials,
        )
    return estimate


class MeanCountPoint(NamedTuple):
    """One radius of an empirical mean-count curve."""

    radius: float
    mean: float
    stderr: float


def _observer_distances(observer, radii, angles, keep, dest_distance):
    if observer == "bs":
        return radii[keep]
    return np.sqrt(sq_dists_to_dest(radii[keep], angles[keep], dest_distance))


def _mean_count_block(
    observer: str,
    cell: CellGeometry,
    theta_first: float,
    grid: tuple[float, ...],
    seed: int,
    start: int,
    stop: int,
):
    grid_arr = np.asarray(grid)
    s1 = np.zeros(grid_arr.size, dtype=np.int64)
    s2 = np.zeros(grid_arr.size, dtype=np.int64)
    for t in range(start, stop):
        rng = trial_rng(seed, t)
        radii, angles = _sample_field(cell, rng)
        keep = _qualify_mask(radii, theta_first, cell.path_loss_exponent, rng)
        d = np.sort(_observer_distances(observer, radii, angles, keep, cell.dest_distance))
        counts = np.searchsorted(d, grid_arr, side="right").astype(np.int64)
        s1 += counts
        s2 += counts * counts
    return s1, s2


def empirical_mean_count(
    observer: str,
    radii: Sequence[float],
    cell: CellGeometry,
    theta_first: float,
    trials: int,
    seed: int,
    *,
    workers: int | None = None,
) -> list[MeanCountPoint]:
    """Mean number of qualified relays within each radius of an observer.

    ``observer`` is ``"bs"`` (the cell center) or ``"dest"``. For each
    radius ``r`` of the strictly increasing grid, averages the count of
    qualified relays at distance <= ``r`` over fresh realizations. Draw
    order per trial: count, radii, angles, first-hop gains (no second-hop
    draws are consumed).
    """
    if observer not in OBSERVERS:
        raise ValueError(f"observer must be one of {OBSERVERS}, got {observer!r}")
    grid = tuple(float(r) for r in radii)
    if not grid:
        raise ValueError("radii grid must be nonempty")
    upper = cell.cell_radius + cell.dest_distance
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("radii must be strictly increasing")
    if grid[0] < 0 or grid[-1] > upper * (1.0 + 1e-12):
        raise ValueError(f"radii must lie within [0, {upper}]")
    if not (isinstance(trials, int) and trials >= 1):
        raise ValueError("trials must be an integer >= 1")
    workers = _resolve_workers(workers)
    if workers == 1:
        s1, s2 = _mean_count_block(observer, cell, theta_first, grid, seed, 0, trials)
    else:
        bounds = _block_bounds(trials, workers)
        s1 = np.zeros(len(grid), dtype=np.int64)
        s2 = np.zeros(len(grid), dtype=np.int64)
        with ProcessPoolExecutor(max_workers=len(bounds)) as pool:
            futures = [
                pool.submit(_mean_count_block, observer, cell, theta_first, grid, seed, lo, hi)
                for lo, hi in bounds
            ]
            for f in futures:
                b1, b2 = f.result()
                s1 += b1
                s2 += b2
    out = []
    for i, r in enumerate(grid):
        mean = s1[i] / trials
        if trials > 1:
            var = (s2[i] - s1[i] * s1[i] / trials) / (trials - 1)
            stderr = math.sqrt(max(var, 0.0) / trials)
        else:
            stderr = 0.0
        out.append(MeanCountPoint(r, float(mean), float(stderr)))
    return out


def kth_nearest_qualified_distances(
    cell: CellGeometry, theta_first: float, k_max: int, trials: int, seed: int
) -> np.ndarray:
    """Sampled distances from the destination to its k-th nearest qualified
    relay, for ``k = 1 .. k_max``.

    Returns an array of shape ``(trials, k_max)``; entries where fewer than
    ``k`` relays qualified are ``inf`` (the distance distribution is
    defective). Same draw order as :func:`empirical_mean_count`.
    """
    if not (isinstance(k_max, int) and k_max >= 1):
        raise ValueError("k_max must be an integer >= 1")
    if not (isinstance(trials, int) and trials >= 1):
        raise ValueError("trials must be an integer >= 1")
    out = np.full((trials, k_max), np.inf)
    for t in range(trials):
        rng = trial_rng(seed, t)
        radii, angles = _sample_field(cell, rng)
        keep = _qualify_mask(radii, theta_first, cell.path_loss_exponent, rng)
        d = np.sort(np.sqrt(sq_dists_to_dest(radii[keep], angles[keep], cell.dest_distance)))
        take = min(k_max, d.size)
        out[t, :take] = d[:take]
    return out

"""Closed forms and semi-analytic outage expressions.

The qualified-relay field (relays that decoded the source broadcast) is a
thinned Poisson process with intensity ``lam * exp(-theta (1 + r^2))`` at
distance ``r`` from the source. Everything here derives from its mean
measure seen either from the source or from the displaced destination:

* ``lambda_prime(r)`` -- expected number of qualified relays within distance
  ``r`` of the destination. The radial integral inside it has a closed form
  (:func:`inner_integral_I`); only the angular integral is numeric.
* ``f_k_pdf`` -- density of the distance to the k-th nearest qualified
  relay, in two variants (see the function docstring).
* ``p_fail_jth`` / ``outage_stat`` -- per-relay failure probabilities and
  their product, the outage of distance-ranked relay selection.
* ``lambda_q_*`` / ``outage_exact_csi`` -- mean number of relays connected
  to both endpoints and the void-probability outage of selection under full
  channel knowledge.

All closed forms assume ``path_loss_exponent == 2`` (they complete a square
in the radial coordinate) and reject other exponents. ``theta == 0`` is
rejected wherever a ``1/theta`` prefactor appears; the homogeneous limits
are documented in the tests instead. Every function here is pure and
deterministic: identical inputs give bit-identical outputs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import replace

import numpy as np

from .model import CellGeometry, RadioParams, Thresholds, compute_thresholds
from .quadrature import DEFAULT_SPEC, QuadratureSpec, integrate_1d
from .specials import erf, erfc, erfcx  # noqa: F401  (erf/erfc re-exported as public API)

#: Variants of the k-th-nearest distance density, see :func:`f_k_pdf`.
F_K_FORMS = ("exact", "quadratic")

#: Variants of the doubly-connected mean measure, see :func:`outage_exact_csi`.
LAMBDA_Q_METHODS = ("closed", "quadrature")

# Budget for angular integrals nested inside a distance integral; tighter
# than the default so inner noise stays below outer tolerances.
_INNER_SPEC = QuadratureSpec(abs_tol=1e-13, rel_tol=1e-10, max_subdivisions=256)
# Default budget for the outer distance integral of p_fail_jth.
_PFAIL_SPEC = QuadratureSpec(abs_tol=1e-10, rel_tol=1e-8, max_subdivisions=512)


def _require_alpha_two(cell: CellGeometry, what: str) -> None:
    if cell.path_loss_exponent != 2.0:
        raise ValueError(f"{what} requires path_loss_exponent == 2, got {cell.path_loss_exponent}")


def _require_positive_theta(theta: float) -> None:
    if not (math.isfinite(theta) and theta > 0):
        raise ValueError("theta must be finite and > 0 (the closed forms carry a 1/theta factor)")


def _inner_core(
    r_jd: float, phi: np.ndarray, r_d: float, theta: float, log_scale: float
) -> np.ndarray:
    """``exp(log_scale) * integral_0^r_jd r exp(-theta (r^2 - a r)) dr`` with
    ``a = 2 r_d cos(phi)``, vectorized over ``phi``.

    Evaluated through the antiderivative:

        exp(log_scale) * [ (1 - exp(-theta (r_jd^2 - a r_jd))) / (2 theta)
          + sqrt(pi/theta) (a/4) exp(theta a^2/4)
            (erf(a sqrt(theta)/2) - erf(a sqrt(theta)/2 - sqrt(theta) r_jd)) ]

    The erf difference is computed through erfcx with analytic exponent
    recombination so that no digits are lost when both arguments are large,
    and so that ``log_scale = -theta (1 + r_d^2)`` keeps every exponent
    nonpositive (no overflow for any theta).
    """
    a = 2.0 * r_d * np.cos(phi)
    s = math.sqrt(theta)
    alf = 0.5 * a * s
    u = alf - s * r_jd
    with np.errstate(over="ignore"):
        big_a = math.exp(log_scale) if log_scale <= 709.0 else math.inf
        # exp(log_scale) - exp(log_scale - theta (r^2 - a r)) via expm1, so
        # the 1/(2 theta) amplification does not magnify rounding as theta -> 0
        term1 = big_a * -np.expm1(-theta * (r_jd * r_jd - a * r_jd)) / (2.0 * theta)
        e0 = log_scale + alf * alf  # = log_scale + theta a^2 / 4
        eu = np.exp(e0 - u * u)
        cx_u = erfcx(np.abs(u))
        cx_a = erfcx(np.abs(alf))
        # exp(e0) * (erfc(u) - erfc(alf)); note exp(e0 - alf^2) == big_a exactly.
        core = np.where(
            u >= 0.0,
            eu * cx_u - big_a * cx_a,
            np.where(
                alf >= 0.0,
                2.0 * np.exp(e0) - eu * cx_u - big_a * cx_a,
                big_a * cx_a - eu * cx_u,
            ),
        )
        term2 = np.sqrt(np.pi / theta) * 0.25 * a * core
    return term1 + term2


def inner_integral_I(r_jd: float, phi: float, r_d: float, theta: float) -> float:
    """Closed form of ``integral_0^r_jd r exp(-theta (r^2 - a r)) dr``,
    ``a = 2 r_d cos(phi)``.

    This is the radial slice, at fixed bearing ``phi`` from the destination,
    of the qualified-relay mean measure with the ``exp(-theta (1 + r_d^2))``
    prefactor left out. Matches direct quadrature of the integrand to
    relative error well below 1e-8 over the supported range. For very large
    ``theta * r_d^2`` (exponent above ~709) the unscaled value exceeds the
    double range and the result is ``inf``; :func:`lambda_prime` avoids that
    regime by folding the prefactor into the exponents.

    ``theta == 0`` is rejected; in that limit the integral is just
    ``r_jd^2 / 2``.
    """
    _require_positive_theta(theta)
    if not (math.isfinite(r_jd) and r_jd >= 0):
        raise ValueError("r_jd must be finite and >= 0")
    if not (math.isfinite(r_d) and r_d >= 0):
        raise ValueError("r_d must be finite and >= 0")
    return float(_inner_core(r_jd, np.atleast_1d(float(phi)), r_d, theta, 0.0)[0])


def lambda_prime(
    r_jd: float, cell: CellGeometry, theta: float, spec: QuadratureSpec | None = None
) -> float:
    """Expected number of qualified relays within ``r_jd`` of the destination.

    ``lam * exp(-theta (1 + r_d^2)) * integral_0^2pi I(r_jd, phi) dphi`` with
    the angular integral done numerically on [0, pi] and doubled (the
    integrand is symmetric under ``phi -> 2 pi - phi``). The qualified field
    is treated as extending beyond the cell edge, so this is exact for
    ``r_jd <= cell_radius - dest_distance`` and a slight overcount closer to
    the rim.

    Non-decreasing in ``r_jd`` and bounded by the total qualified mass
    ``pi lam exp(-theta) / theta``.
    """
    _require_alpha_two(cell, "lambda_prime")
    _require_positive_theta(theta)
    upper = cell.cell_radius + cell.dest_distance
    if not (0.0 <= r_jd <= upper * (1.0 + 1e-12)):
        raise ValueError(f"r_jd must lie in [0, cell_radius + dest_distance] = [0, {upper}]")
    if r_jd == 0.0:
        return 0.0
    r_d = cell.dest_distance
    scale = -theta * (1.0 + r_d * r_d)

    def integrand(phis: np.ndarray) -> np.ndarray:
        return _inner_core(r_jd, phis, r_d, theta, scale)

    val = 2.0 * cell.relay_intensity * integrate_1d(integrand, 0.0, math.pi, spec or _INNER_SPEC)
    return max(val, 0.0)


def lambda_prime_derivative(
    r_jd: float, cell: CellGeometry, theta: float, spec: QuadratureSpec | None = None
) -> float:
    """Radial derivative of :func:`lambda_prime`.

    Equals ``r_jd`` times the qualified intensity integrated over the circle
    of radius ``r_jd`` about the destination:

        r_jd * lam * integral_0^2pi exp(-theta (1 + r_d^2 + r_jd^2
                                        - 2 r_d r_jd cos(phi))) dphi
    """
    _require_alpha_two(cell, "lambda_prime_derivative")
    _require_positive_theta(theta)
    if not (math.isfinite(r_jd) and r_jd >= 0):
        raise ValueError("r_jd must be finite and >= 0")
    if r_jd == 0.0:
        return 0.0
    r_d = cell.dest_distance
    const = 1.0 + r_d * r_d + r_jd * r_jd

    def integrand(phis: np.ndarray) -> np.ndarray:
        return np.exp(-theta * (const - 2.0 * r_d * r_jd * np.cos(phis)))

    return (
        2.0
        * r_jd
        * cell.relay_intensity
        * integrate_1d(integrand, 0.0, math.pi, spec or _INNER_SPEC)
    )


def f_k_pdf(
    r_jd: float,
    k: int,
    cell: CellGeometry,
    theta: float,
    form: str = "exact",
    spec: QuadratureSpec | None = None,
) -> float:
    """Density of the distance from the destination to the k-th nearest
    qualified relay.

    ``form="exact"``
        The order-statistic density of a point process with mean measure
        ``M(r) = lambda_prime(r)``:

            exp(-M(r)) * M(r)^(k-1) / (k-1)! * dM/dr

        Its integral over [0, x] equals the probability of finding at least
        ``k`` qualified relays within ``x``, so the distribution is proper
        up to the (possibly defective) total mass.
    ``form="quadratic"``
        Same expression with ``dM/dr`` replaced by ``2 M(r) / r``:

            exp(-M(r)) * 2 M(r)^k / (r * (k-1)!)

        This substitution is exact only when ``M(r)`` grows quadratically
        (an unthinned homogeneous field); for a thinned field it inflates
        the tail. Kept selectable so the two variants can be compared
        against simulation.
    """
    if form not in F_K_FORMS:
        raise ValueError(f"form must be one of {F_K_FORMS}, got {form!r}")
    if not (isinstance(k, int) and k >= 1):
        raise ValueError("k must be an integer >= 1")
    if not r_jd > 0:
        raise ValueError("r_jd must be > 0 (both variants are densities in the open half-line)")
    mass = lambda_prime(r_jd, cell, theta, spec)
    fact = math.factorial(k - 1)
    if form == "quadratic":
        return math.exp(-mass) * 2.0 * mass**k / (r_jd * fact)
    deriv = lambda_prime_derivative(r_jd, cell, theta, spec)
    return math.exp(-mass) * mass ** (k - 1) / fact * deriv


def kth_nearest_cdf(
    x: float, k: int, cell: CellGeometry, theta: float, spec: QuadratureSpec | None = None
) -> float:
    """Probability of at least ``k`` qualified relays within ``x`` of the
    destination; the CDF matching ``f_k_pdf(form="exact")``.

    ``1 - exp(-M(x)) * sum_{i<k} M(x)^i / i!`` with ``M = lambda_prime``.
    """
    if not (isinstance(k, int) and k >= 1):
        raise ValueError("k must be an integer >= 1")
    if x <= 0.0:
        return 0.0
    mass = lambda_prime(x, cell, theta, spec)
    tail = sum(mass**i / math.factorial(i) for i in range(k))
    return 1.0 - math.exp(-mass) * tail


def p_fail_jth(
    j: int,
    cell: CellGeometry,
    thresholds: Thresholds,
    form: str = "exact",
    spec: QuadratureSpec | None = None,
) -> float:
    """Probability that the j-th nearest qualified relay fails to reach the
    destination.

    ``1 - integral_0^(R + r_d) exp(-theta_second (1 + r^2)) f_j(r) dr``.
    The j-th relay's distance density uses ``thresholds.theta_first`` for
    qualification; the decoding test at the destination uses
    ``theta_second``. With the ``"exact"`` density the formula also charges
    the event that fewer than ``j`` qualified relays exist (the defective
    mass), matching a protocol whose j-th slot stays silent in that case.

    ``spec`` controls the outer distance integral (default: abs 1e-10,
    rel 1e-8); the angular integrals inside the density run at a fixed
    tighter budget. Values outside [0, 1] by more than quadrature noise are
    clamped with a warning.
    """
    if not (isinstance(j, int) and j >= 1):
        raise ValueError("j must be an integer >= 1")
    _require_alpha_two(cell, "p_fail_jth")
    _require_positive_theta(thresholds.theta_first)
    theta2 = thresholds.theta_second
    upper = cell.cell_radius + cell.dest_distance

    def integrand(rs: np.ndarray) -> np.ndarray:
        out = np.empty_like(rs)
        for i, r in enumerate(rs):
            if r <= 0.0:
                out[i] = 0.0
            else:
                out[i] = math.exp(-theta2 * (1.0 + r * r)) * f_k_pdf(
                    float(r), j, cell, thresholds.theta_first, form, _INNER_SPEC
                )
        return out

    val = integrate_1d(integrand, 0.0, upper, spec or _PFAIL_SPEC)
    p = 1.0 - val
    if p < -1e-9 or p > 1.0 + 1e-9:
        warnings.warn(
            f"p_fail_jth(j={j}) outside [0, 1] by more than quadrature noise: {p!r}; clamping",
            RuntimeWarning,
            stacklevel=2,
        )
    return min(max(p, 0.0), 1.0)


def outage_stat(
    k: int,
    cell: CellGeometry,
    radio: RadioParams,
    form: str = "exact",
    first_hop: str = "frame_rate",
    spec: QuadratureSpec | None = None,
) -> float:
    """Outage probability of distance-ranked selection of ``k`` relays.

    The ``k`` selected relays fail independently, so the outage is the
    product of :func:`p_fail_jth` over ``j = 1 .. k``, with both thresholds
    derived for a ``k``-relay frame (``radio.num_relays`` is overridden by
    ``k``).
    """
    if not (isinstance(k, int) and k >= 1):
        raise ValueError("k must be an integer >= 1")
    thresholds = compute_thresholds(replace(radio, num_relays=k), first_hop)
    p = 1.0
    for j in range(1, k + 1):
        p *= p_fail_jth(j, cell, thresholds, form, spec)
    return p


def lambda_q_closed(cell: CellGeometry, theta: float) -> float:
    """Far-field mean number of relays decodable by both endpoints.

    ``pi lam / (2 theta) * exp(-theta (2 + r_d^2 / 2))`` -- the plane-wide
    Gaussian integral of the two-hop thinning kernel, i.e. the cell radius
    taken to infinity. Always an overcount of the finite-cell value
    (:func:`lambda_q_quadrature`); the excess is the kernel mass outside
    the cell and is negligible once ``theta * cell_radius^2 >> 1``.
    """
    _require_alpha_two(cell, "lambda_q_closed")
    _require_positive_theta(theta)
    r_d = cell.dest_distance
    return (
        math.pi
        * cell.relay_intensity
        / (2.0 * theta)
        * math.exp(-theta * (2.0 + r_d * r_d / 2.0))
    )


def lambda_q_quadrature(
    cell: CellGeometry, theta: float, spec: QuadratureSpec | None = None
) -> float:
    """Finite-cell mean number of relays decodable by both endpoints.

    ``integral_cell lam exp(-theta (1 + r^a)) exp(-theta (1 + r_jd^a)) dw``
    evaluated as nested adaptive quadrature in polar coordinates (angular
    outer on [0, pi], doubled; radial inner per angle). Unlike the closed
    form this supports any ``path_loss_exponent >= 2``.
    """
    _require_positive_theta(theta)
    lam = cell.relay_intensity
    r_d = cell.dest_distance
    big_r = cell.cell_radius
    alpha = cell.path_loss_exponent
    half = 0.5 * alpha

    def radial(phi: float) -> float:
        cosphi = math.cos(phi)

        def integrand(rs: np.ndarray) -> np.ndarray:
            r2 = rs * rs
            rjd2 = np.maximum(r2 + r_d * r_d - 2.0 * r_d * rs * cosphi, 0.0)
            return lam * rs * np.exp(-theta * (2.0 + r2**half + rjd2**half))

        return integrate_1d(integrand, 0.0, big_r, _INNER_SPEC)

    def outer(phis: np.ndarray) -> np.ndarray:
        return np.array([radial(float(p)) for p in phis])

    return 2.0 * integrate_1d(outer, 0.0, math.pi, spec or DEFAULT_SPEC)


def outage_exact_csi(
    cell: CellGeometry,
    radio: RadioParams,
    lambda_q: str = "quadrature",
    spec: QuadratureSpec | None = None,
) -> float:
    """Outage probability when relays know their instantaneous channels.

    With full channel knowledge an outage happens only when no relay decodes
    both hops, so the probability is the void probability
    ``exp(-Lambda_q)`` of the doubly-connected field. ``lambda_q`` selects
    the finite-cell ``"quadrature"`` mean (default; matches a simulation
    confined to the cell) or the far-field ``"closed"`` form.

    Defined for a single-relay frame (``num_relays == 1``), where the two
    hop thresholds coincide.
    """
    if radio.num_relays != 1:
        raise ValueError("outage_exact_csi is defined for num_relays == 1")
    if lambda_q not in LAMBDA_Q_METHODS:
        raise ValueError(f"lambda_q must be one of {LAMBDA_Q_METHODS}, got {lambda_q!r}")
    theta = compute_thresholds(radio).theta_second
    if lambda_q == "closed":
        mass = lambda_q_closed(cell, theta)
    else:
        mass = lambda_q_quadrature(cell, theta, spec)
    return math.exp(-mass)


def mean_count_from_bs(r: float, relay_intensity: float, theta: float) -> float:
    """Expected number of qualified relays within ``r`` of the source.

    Seen from the source the thinned field is isotropic and the mean measure
    is closed: ``pi lam / theta * exp(-theta) * (1 - exp(-theta r^2))``.
    Assumes squared-distance attenuation (the ``path_loss_exponent == 2``
    regime of the closed forms). Coincides with :func:`lambda_prime` when
    the destination sits at the source.
    """
    _require_positive_theta(theta)
    if not (math.isfinite(r) and r >= 0):
        raise ValueError("r must be finite and >= 0")
    if not relay_intensity > 0:
        raise ValueError("relay_intensity must be > 0")
    return (
        math.pi
        * relay_intensity
        / theta
        * math.exp(-theta)
        * (1.0 - math.exp(-theta * r * r))
    )

"""
Mediciones de posición y momento sobre las sondas comprimidas.

Las densidades se discretizan en bins del ancho de la grilla (p_i = |ψ(x_i)|²Δx,
renormalizadas); la información de Fisher clásica y el muestreo del estimador
de máxima verosimilitud usan exactamente ese modelo binado.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import numpy as np
from django.db.models import TextChoices
from django.utils.translation import gettext_lazy as _
from scipy import integrate, optimize

from .conf import get_setting
from .exceptions import (
    EstimationError,
    GridCoverageError,
    InvalidArgumentError,
    UnsupportedError,
)
from .fockcore import (
    SqueezedFockState,
    squeezed_mode_momentum_wavefunction,
    squeezed_mode_wavefunction,
)
from .metrology import (
    FisherMethod,
    FisherResult,
    ManyBodyProbe,
    Statistics,
    richardson_check,
)
from .models import squeeze_parameter

logger = logging.getLogger(__name__)

MIN_GRID_POINTS = 64
NORMALIZATION_TOL = 1e-8
PROBABILITY_FLOOR = 1e-14
EXCLUDED_MASS_ADVISORY = 1e-6
IMAGINARY_TOL = 1e-10
LOG_FLOOR = 1e-300
MIN_SAMPLES = 100
BRACKET_WIDTH = 10.0
BRACKET_EDGE = 1e-3


class Representation(TextChoices):
    POSITION = 'position', _('Posición')
    MOMENTUM = 'momentum', _('Momento')


@dataclass(frozen=True)
class Grid1D:
    """Grilla uniforme [x_min, x_max] con n_points nodos"""
    x_min: float
    x_max: float
    n_points: int

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < MIN_GRID_POINTS:
            raise InvalidArgumentError(f"La grilla necesita al menos {MIN_GRID_POINTS} puntos")
        if not self.x_max > self.x_min:
            raise InvalidArgumentError(f"Intervalo vacío [{self.x_min}, {self.x_max}]")

    @classmethod
    def symmetric(cls, half_width, n_points=None):
        return cls(-half_width, half_width, n_points or get_setting('GRID_POINTS'))

    @classmethod
    def for_state(cls, xi, n_max, params, representation=Representation.POSITION, n_points=None):
        """[-L, L] con L = (ancho en σ)·σ del modo n_max"""
        width = get_setting('GRID_WIDTH_SIGMAS')
        return cls.symmetric(width * mode_width(xi, n_max, params, representation), n_points)

    @property
    def points(self):
        return np.linspace(self.x_min, self.x_max, self.n_points)

    @property
    def spacing(self):
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def half_width(self):
        return min(-self.x_min, self.x_max)

    def refined(self):
        """Misma ventana con el doble de intervalos"""
        return Grid1D(self.x_min, self.x_max, 2 * self.n_points - 1)


@dataclass(frozen=True, eq=False)
class MeasurementDistribution:
    """Probabilidades binadas en una grilla 1D o en su producto 2D"""
    grid: Grid1D
    probabilities: np.ndarray
    representation: str = Representation.POSITION

    def __post_init__(self):
        probabilities = np.array(self.probabilities, dtype=float)
        if probabilities.shape not in ((self.grid.n_points,), (self.grid.n_points, self.grid.n_points)):
            raise InvalidArgumentError(f"Forma {probabilities.shape} incompatible con la grilla")
        if np.any(probabilities < 0):
            raise InvalidArgumentError("Probabilidades negativas")
        total = probabilities.sum()
        if abs(total - 1) > NORMALIZATION_TOL:
            raise InvalidArgumentError(f"Distribución no normalizada (Σp = {total:.12f})")
        probabilities.setflags(write=False)
        object.__setattr__(self, 'probabilities', probabilities)

    @property
    def ndim(self):
        return self.probabilities.ndim


@dataclass(frozen=True, eq=False)
class EstimationRun:
    true_Omega: float
    sample_count: int
    estimates: np.ndarray
    empirical_variance: float
    crb: float
    fisher: float
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.sample_count < MIN_SAMPLES:
            raise InvalidArgumentError(f"Se requieren al menos {MIN_SAMPLES} muestras por lote")

    @property
    def bias(self):
        return float(np.mean(self.estimates) - self.true_Omega)

    @property
    def efficiency(self):
        """CRB / varianza empírica; 1 si el estimador satura la cota"""
        return self.crb / self.empirical_variance


def mode_width(xi, n, params, representation=Representation.POSITION):
    """Desviación estándar de S(ξ)|n⟩ en posición o momento"""
    m_omega = params.mass * params.omega
    if representation == Representation.MOMENTUM:
        return math.exp(-xi) * math.sqrt((n + 0.5) * m_omega)
    return math.exp(xi) * math.sqrt((n + 0.5) / m_omega)


def _check_coverage(grid, width):
    required = get_setting('GRID_WIDTH_SIGMAS') * width
    if grid.half_width < required * (1 - 1e-9):
        raise GridCoverageError(
            f"La grilla cubre ±{grid.half_width:.4g} y se requieren ±{required:.4g}"
        )


def _mode_amplitude(state, grid, params, representation):
    if representation == Representation.MOMENTUM:
        return squeezed_mode_momentum_wavefunction(state, grid.points, params.mass, params.omega)
    return squeezed_mode_wavefunction(state, grid.points, params.mass, params.omega)


def _binned(amplitude, grid, representation):
    weights = amplitude ** 2 * grid.spacing ** amplitude.ndim
    return MeasurementDistribution(grid, weights / weights.sum(), representation)


def single_particle_density(state, grid, params, representation=Representation.POSITION, enforce_coverage=True):
    """p(x) = |ψ_n^ξ(x)|² (o en momento), normalizada en la grilla"""
    if enforce_coverage:
        _check_coverage(grid, mode_width(state.xi, state.n, params, representation))
    return _binned(_mode_amplitude(state, grid, params, representation), grid, representation)


def single_particle_momentum_density(state, grid, params, enforce_coverage=True):
    return single_particle_density(state, grid, params, Representation.MOMENTUM, enforce_coverage)


def _require_pair(probe):
    if probe.n_atoms != 2:
        raise UnsupportedError(f"Las correlaciones de pares requieren N = 2 (recibido {probe.n_atoms})")
    if probe.statistics == Statistics.BOSONIC_EXCITED:
        raise UnsupportedError("Las correlaciones de pares se definen para fermiones y TG")


def pair_wavefunction(probe, grid, params, representation=Representation.POSITION):
    """Ψ(x₁, x₂) = [ψ_a(x₁)ψ_b(x₂) - ψ_b(x₁)ψ_a(x₂)]/√2; TG toma el módulo"""
    _require_pair(probe)
    first, second = (
        _mode_amplitude(SqueezedFockState(mode, probe.xi), grid, params, representation)
        for mode in probe.mode_set
    )
    slater = (np.outer(first, second) - np.outer(second, first)) / math.sqrt(2)
    if probe.statistics == Statistics.TONKS_GIRARDEAU:
        return np.abs(slater)
    return slater


def pair_correlation_density(probe, grid, params, representation=Representation.POSITION, enforce_coverage=True):
    """p(x₁, x₂) = |Ψ(x₁, x₂)|² binada en la grilla producto"""
    _require_pair(probe)
    if enforce_coverage:
        _check_coverage(grid, mode_width(probe.xi, max(probe.mode_set), params, representation))
    return _binned(pair_wavefunction(probe, grid, params, representation), grid, representation)


class DistributionProvider:
    """Familia Ω → MeasurementDistribution sobre una grilla fija"""

    def __init__(self, params, grid, density):
        self.params = params
        self.grid = grid
        self.density = density

    def at(self, Omega):
        return self.params.replace(Omega=Omega)

    def __call__(self, Omega):
        return self.density(self.at(Omega))


def _squeeze_of(params):
    return squeeze_parameter(params.k, params.k_c)


def position_distribution_provider(params, n=0, grid=None, representation=Representation.POSITION):
    """Distribución de una partícula en S(ξ(Ω))|n⟩; la cobertura se verifica en el Ω central"""
    xi = _squeeze_of(params)
    grid = grid or Grid1D.for_state(xi, n, params, representation)
    _check_coverage(grid, mode_width(xi, n, params, representation))

    def density(current):
        state = SqueezedFockState(n, _squeeze_of(current))
        return single_particle_density(state, grid, current, representation, enforce_coverage=False)

    return DistributionProvider(params, grid, density)


def pair_distribution_provider(params, statistics=Statistics.FERMIONIC, mode_set=(0, 1), grid=None,
                               representation=Representation.POSITION):
    xi = _squeeze_of(params)
    _require_pair(ManyBodyProbe(len(mode_set), statistics, tuple(mode_set), xi))
    n_max = max(mode_set)
    grid = grid or Grid1D.for_state(xi, n_max, params, representation, get_setting('PAIR_GRID_POINTS'))
    _check_coverage(grid, mode_width(xi, n_max, params, representation))

    def density(current):
        probe = ManyBodyProbe(2, statistics, tuple(mode_set), _squeeze_of(current))
        return pair_correlation_density(probe, grid, current, representation, enforce_coverage=False)

    return DistributionProvider(params, grid, density)


def wavefunction_provider(params, statistics=None, n=0, grid=None, representation=Representation.POSITION):
    """
    Familia Ω → función de onda real en la grilla: una partícula en el modo n
    si `statistics` es None, o el par de modos 0 y 1 con la estadística dada.
    """
    xi = _squeeze_of(params)
    n_max = n if statistics is None else 1
    points = get_setting('GRID_POINTS') if statistics is None else get_setting('PAIR_GRID_POINTS')
    grid = grid or Grid1D.for_state(xi, n_max, params, representation, points)
    _check_coverage(grid, mode_width(xi, n_max, params, representation))

    def amplitude(current):
        xi_current = _squeeze_of(current)
        if statistics is None:
            return _mode_amplitude(SqueezedFockState(n, xi_current), grid, current, representation)
        return pair_wavefunction(ManyBodyProbe(2, statistics, (0, 1), xi_current), grid, current, representation)

    return DistributionProvider(params, grid, amplitude)


def classical_fisher_information(dist_provider, Omega, dOmega=None, floor=PROBABILITY_FLOOR):
    """F = Σ_η (∂_Ω p_η)²/p_η con diferencias centradas; excluye bins con p < floor"""
    step = dOmega or get_setting('DOMEGA_REL') * Omega
    center = dist_provider(Omega).probabilities
    keep = center >= floor
    excluded = float(center[~keep].sum())
    if excluded > EXCLUDED_MASS_ADVISORY:
        logger.warning("Masa excluida %.3e por bins con p < %.0e", excluded, floor)

    def estimate(h):
        derivative = (dist_provider(Omega + h).probabilities - dist_provider(Omega - h).probabilities) / (2 * h)
        return float(np.sum(derivative[keep] ** 2 / center[keep]))

    value, metadata = richardson_check(estimate, step)
    metadata.update({'excluded_mass': excluded, 'excluded_mass_advisory': excluded > EXCLUDED_MASS_ADVISORY})
    params = dist_provider.at(Omega) if hasattr(dist_provider, 'at') else None
    if hasattr(dist_provider, 'grid'):
        metadata['grid_points'] = dist_provider.grid.n_points
    return FisherResult(value, FisherMethod.CLASSICAL, params, metadata)


def _as_real(psi):
    psi = np.asarray(psi)
    if np.iscomplexobj(psi):
        residual = float(np.max(np.abs(psi.imag))) if psi.size else 0.0
        if residual >= IMAGINARY_TOL:
            raise InvalidArgumentError(f"La función de onda no es real (residuo {residual:.3e})")
        psi = psi.real
    return psi.astype(float)


def _integrate(values, spacing):
    for _axis in range(values.ndim):
        values = integrate.trapezoid(values, dx=spacing, axis=0)
    return float(values)


def grid_qfi_real_wavefunction(psi_provider, Omega, dOmega=None, grid=None):
    """I = 4[∫(∂_Ωψ)² - (∫ψ ∂_Ωψ)²] por cuadratura trapezoidal"""
    grid = grid or psi_provider.grid
    step = dOmega or get_setting('DOMEGA_REL') * Omega
    center = _as_real(psi_provider(Omega))
    overlaps = {}

    def estimate(h):
        derivative = (_as_real(psi_provider(Omega + h)) - _as_real(psi_provider(Omega - h))) / (2 * h)
        overlaps[h] = _integrate(center * derivative, grid.spacing)
        return 4 * (_integrate(derivative ** 2, grid.spacing) - overlaps[h] ** 2)

    value, metadata = richardson_check(estimate, step)
    metadata['overlap_term'] = overlaps[step]
    params = psi_provider.at(Omega) if hasattr(psi_provider, 'at') else None
    return FisherResult(max(value, 0.0), FisherMethod.GRID, params, metadata)


def _bracket(dist_provider, true_Omega, crb):
    spread = BRACKET_WIDTH * math.sqrt(crb)
    low, high = true_Omega - spread, true_Omega + spread
    params = getattr(dist_provider, 'params', None)
    if params is not None:
        # Ω > k²/ω mantiene la fase normal
        boundary = params.k ** 2 / params.omega
        low = max(low, boundary * (1 + 1e-6))
    return max(low, true_Omega * 1e-6), high


def mle_monte_carlo(dist_provider, true_Omega, sample_count, seed, batches=None, fisher=None,
                    bracket=None, max_workers=None):
    """
    Estimador de máxima verosimilitud sobre lotes independientes de
    `sample_count` muestras; compara la varianza empírica con 1/(nF).
    """
    if sample_count < MIN_SAMPLES:
        raise InvalidArgumentError(f"Se requieren al menos {MIN_SAMPLES} muestras por lote")
    batches = batches or get_setting('MLE_BATCHES')
    if batches < 2:
        raise InvalidArgumentError("Se necesitan al menos dos lotes para estimar la varianza")
    if fisher is None:
        fisher = classical_fisher_information(dist_provider, true_Omega).value
    if not fisher > 0:
        raise EstimationError("La distribución no contiene información sobre Ω")
    crb = 1.0 / (sample_count * fisher)
    low, high = bracket or _bracket(dist_provider, true_Omega, crb)
    tolerance = 1e-3 * math.sqrt(crb)

    cdf = np.cumsum(dist_provider(true_Omega).probabilities.ravel())
    cdf[-1] = 1.0

    def negative_log_likelihood(Omega, support, counts):
        probabilities = dist_provider(Omega).probabilities.ravel()[support]
        return -float(np.dot(counts, np.log(np.maximum(probabilities, LOG_FLOOR))))

    def estimate(seed_sequence):
        rng = np.random.default_rng(seed_sequence)
        outcomes = np.searchsorted(cdf, rng.random(sample_count), side='right')
        counts = np.bincount(np.minimum(outcomes, cdf.size - 1), minlength=cdf.size)
        support = np.flatnonzero(counts)
        result = optimize.minimize_scalar(
            negative_log_likelihood,
            bounds=(low, high),
            args=(support, counts[support]),
            method='bounded',
            options={'xatol': tolerance},
        )
        margin = BRACKET_EDGE * (high - low)
        if not result.success or result.x - low < margin or high - result.x < margin:
            raise EstimationError(
                f"Máximo de verosimilitud en el borde del intervalo [{low:.6g}, {high:.6g}]: {result.x:.6g}"
            )
        return result.x

    seeds = np.random.SeedSequence(seed).spawn(batches)
    with ThreadPoolExecutor(max_workers=max_workers or get_setting('MAX_WORKERS')) as pool:
        estimates = np.array(list(pool.map(estimate, seeds)))

    variance = float(np.var(estimates, ddof=1))
    logger.info(
        "MLE Ω=%.6g: %d lotes de %d muestras, varianza %.4e frente a CRB %.4e",
        true_Omega, batches, sample_count, variance, crb,
    )
    return EstimationRun(
        true_Omega=true_Omega,
        sample_count=sample_count,
        estimates=estimates,
        empirical_variance=variance,
        crb=crb,
        fisher=fisher,
        metadata={'seed': seed, 'batches': batches, 'bracket': [low, high]},
    )

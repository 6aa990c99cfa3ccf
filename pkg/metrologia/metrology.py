"""
Información de Fisher cuántica para la sonda Ω.

Convención única: I = 4(⟨∂ψ|∂ψ⟩ - |⟨ψ|∂ψ⟩|²) = 4Δ²Ĥ para estados puros,
de modo que la ruta de derivadas y la de varianza del generador coinciden.
"""
import itertools
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping, Optional

import numpy as np
from django.db.models import TextChoices
from django.utils.translation import gettext_lazy as _

from .conf import get_setting
from .exceptions import (
    ConvergenceError,
    InvalidArgumentError,
    NumericalError,
    UnsupportedError,
)
from .fockcore import FockOperator, converge_cutoff, ladder_operators, variance
from .models import (
    ModelParams,
    adiabatic_sweep_time,
    ground_state_provider,
    mean_excitations,
    squeeze_parameter,
)

logger = logging.getLogger(__name__)

RICHARDSON_TOL = 0.01
SPECTRAL_FLOOR = 1e-15
COMBINATORIAL_MAX_ATOMS = 12
TENSOR_MAX_ATOMS = 4
NEGATIVE_CLAMP = -1e-14


class Statistics(TextChoices):
    FERMIONIC = 'fermionic', _('Fermiónica (determinante de Slater)')
    BOSONIC_EXCITED = 'symmetric-bosonic-excited', _('Bosónica simétrica excitada')
    TONKS_GIRARDEAU = 'tonks-girardeau', _('Tonks-Girardeau')


class FisherMethod(TextChoices):
    ANALYTIC = 'analytic', _('Analítica')
    GENERATOR_VARIANCE = 'generator-variance', _('Varianza del generador')
    FINITE_DIFFERENCE = 'finite-difference', _('Diferencias finitas')
    MIXED_SPECTRAL = 'mixed-spectral', _('Suma espectral de estado mixto')
    GRID = 'grid', _('Cuadratura en grilla')
    CLASSICAL = 'classical', _('Fisher clásica')


@dataclass(frozen=True)
class ManyBodyProbe:
    """N átomos en los modos `mode_set`, todos con el mismo ξ"""
    n_atoms: int
    statistics: str = Statistics.FERMIONIC
    mode_set: Optional[tuple] = None
    xi: float = 0.0

    def __post_init__(self):
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise InvalidArgumentError(f"N debe ser un entero >= 1 (recibido {self.n_atoms})")
        if self.statistics not in Statistics.values:
            raise InvalidArgumentError(f"Estadística desconocida: {self.statistics}")
        modes = tuple(range(self.n_atoms)) if self.mode_set is None else tuple(int(m) for m in self.mode_set)
        if len(modes) != self.n_atoms:
            raise InvalidArgumentError(f"Se esperaban {self.n_atoms} modos, no {len(modes)}")
        if any(m < 0 for m in modes):
            raise InvalidArgumentError("Los índices de modo deben ser >= 0")
        if self.antisymmetric and len(set(modes)) != len(modes):
            raise InvalidArgumentError("Modos repetidos en una sonda fermiónica o TG")
        if not math.isfinite(self.xi) or self.xi < 0:
            raise InvalidArgumentError(f"ξ debe ser real finito y >= 0 (recibido {self.xi})")
        object.__setattr__(self, 'mode_set', modes)
        object.__setattr__(self, 'statistics', Statistics(self.statistics))

    @property
    def antisymmetric(self):
        return self.statistics != Statistics.BOSONIC_EXCITED


@dataclass(frozen=True)
class FisherResult:
    value: float
    method: str
    params: Optional[ModelParams] = None
    metadata: Mapping[str, Any] = field(default_factory=dict)
    time_normalized: Optional[float] = None

    def __post_init__(self):
        if not self.value >= 0:
            raise NumericalError(f"Información de Fisher negativa: {self.value}")


@dataclass(frozen=True)
class ThresholdReport:
    """Márgenes frente al límite cuántico estándar y al de Heisenberg"""
    sql_margin: float
    beats_sql: bool
    hl_margin: float
    beats_hl: bool
    n_ceiling: float
    mean_excitations: float
    within_squeezing_ceiling: bool
    k_f_ceiling_ratio: float
    n_min: float
    exceeds_n_min: bool
    notes: tuple = ()


def _prefactor(params):
    """(k/k_c)⁴ / (Ω²(1 - k²/k_c²)²)"""
    squeeze_parameter(params.k, params.k_c)
    r = params.ratio_sq
    return r ** 2 / (params.Omega ** 2 * (1 - r) ** 2)


def richardson_check(estimate, step, tolerance=RICHARDSON_TOL):
    """Evalúa con paso h y 2h; informa la discrepancia relativa y la extrapolación"""
    value = estimate(step)
    coarse = estimate(2 * step)
    scale = max(abs(value), abs(coarse))
    disagreement = abs(value - coarse) / scale if scale > 0 else 0.0
    advisory = disagreement > tolerance
    if advisory:
        logger.warning(
            "Paso dΩ=%.3e: discrepancia de Richardson %.2f%% (> %.0f%%)",
            step, 100 * disagreement, 100 * tolerance,
        )
    return value, {
        'step': step,
        'richardson_value': (4 * value - coarse) / 3,
        'richardson_disagreement': disagreement,
        'step_advisory': advisory,
    }


def _clamp(value):
    if value < 0:
        if value > NEGATIVE_CLAMP:
            return 0.0
        raise NumericalError(f"Información de Fisher negativa ({value:.3e})")
    return value


def local_generator(params, cutoff):
    """ĥ = (k/k_c)²·i/((k/k_c)² - 1)·(1/8Ω)·(a†a† - aa)"""
    squeeze_parameter(params.k, params.k_c)
    r = params.ratio_sq
    coefficient = r / ((r - 1) * 8 * params.Omega)
    a, ad = ladder_operators(cutoff)
    pair = ad.data @ ad.data - a.data @ a.data
    data = 1j * coefficient * pair
    return FockOperator(
        cutoff, 1, (data + data.conj().T) / 2, hermitian=True,
        metadata={'coefficient': coefficient, 'cutoff': cutoff},
    )


def qfi_single_particle_analytic(params):
    return FisherResult(_prefactor(params) / 8, FisherMethod.ANALYTIC, params, {'formula': 'single-particle'})


def qfi_fermionic_analytic(params):
    """I = N²·(k/k_c)⁴ / (8Ω²(1 - k²/k_c²)²)"""
    n = params.n_atoms
    return FisherResult(n ** 2 * _prefactor(params) / 8, FisherMethod.ANALYTIC, params, {'formula': 'fermionic'})


def fermionic_contribution_polynomials(n_atoms):
    """Numeradores enteros (sobre 24) de los términos por modo y de intercambio"""
    n = int(n_atoms)
    return n * (n * n + 2), -(n - 2) * (n - 1) * n


def qfi_fermionic_contributions(params):
    """Término por modo y término de intercambio; su suma es la forma N²"""
    first, second = fermionic_contribution_polynomials(params.n_atoms)
    prefactor = _prefactor(params)
    return first * prefactor / 24, second * prefactor / 24


def bosonic_excited_polynomial(n_atoms):
    """(N³/2 - 6N²/8 + N)/6"""
    n = n_atoms
    return (n ** 3 / 2 - 6 * n ** 2 / 8 + n) / 6


def qfi_bosonic_excited_analytic(params):
    value = _prefactor(params) * bosonic_excited_polynomial(params.n_atoms)
    asymptotic = _prefactor(params) * params.n_atoms ** 3 / 24
    ratio = value / asymptotic if asymptotic > 0 else None
    return FisherResult(
        value, FisherMethod.ANALYTIC, params,
        {'formula': 'bosonic-excited', 'asymptotic_ratio': ratio},
    )


def qfi_bosonic_excited_asymptotic(params, k_f=None):
    """
    Forma de N grande con el tiempo de barrido:
    γ²ω²(k/k_c)⁴N³T²/(6Ω²(1 - k_f²/k_c²)).
    """
    k_f = params.k if k_f is None else k_f
    sweep = adiabatic_sweep_time(params, k_f)
    r_f = (k_f / params.k_c) ** 2
    value = (
        params.gamma ** 2 * params.omega ** 2 * r_f ** 2 * params.n_atoms ** 3 * sweep ** 2
        / (6 * params.Omega ** 2 * (1 - r_f))
    )
    return FisherResult(
        value, FisherMethod.ANALYTIC, params,
        {'formula': 'bosonic-asymptotic', 'sweep_time': sweep},
        time_normalized=value / sweep ** 2,
    )


def qfi_generator_variance(state, generator):
    """4·Δ²ĥ sobre un estado puro explícito"""
    value = _clamp(4 * variance(generator, state))
    return FisherResult(value, FisherMethod.GENERATOR_VARIANCE, metadata={'cutoff': state.dim})


def _permutation_sign(permutation):
    inversions = sum(
        1 for i in range(len(permutation)) for j in range(i + 1, len(permutation))
        if permutation[i] > permutation[j]
    )
    return -1 if inversions % 2 else 1


def _tensor_product_variance(probe, h):
    size = h.shape[0]
    n = probe.n_atoms
    psi = np.zeros((size,) * n, dtype=complex)
    for permutation in itertools.permutations(range(n)):
        sign = _permutation_sign(permutation) if probe.antisymmetric else 1
        index = tuple(probe.mode_set[p] for p in permutation)
        psi[index] += sign
    psi /= np.linalg.norm(psi)
    applied = np.zeros_like(psi)
    for axis in range(n):
        applied += np.moveaxis(np.tensordot(h, psi, axes=([1], [axis])), 0, axis)
    mean = np.vdot(psi, applied)
    return float(np.vdot(applied, applied).real - abs(mean) ** 2)


def qfi_collective_variance(probe, params, cutoff=None, route='combinatorial'):
    """
    4·Δ²(Σ_j ĥ_j) sobre la sonda de N cuerpos.

    La ruta combinatoria suma los términos por modo ⟨ĥ²⟩_n - ⟨ĥ⟩_n² y los de
    intercambio |⟨n|ĥ|m⟩|² con signo - (fermiones, TG) o + (bosones). ĥ es
    proporcional al generador de S(ξ), por lo que los elementos de matriz en la
    base comprimida son los de Fock. La ruta `tensor` construye el estado
    (anti)simetrizado explícito y sirve de oráculo.
    """
    squeeze_parameter(params.k, params.k_c)
    n = probe.n_atoms
    if route == 'combinatorial':
        if n > COMBINATORIAL_MAX_ATOMS:
            raise UnsupportedError(f"N = {n} supera la ruta combinatoria (N <= {COMBINATORIAL_MAX_ATOMS})")
        if not probe.antisymmetric and len(set(probe.mode_set)) != n:
            raise UnsupportedError("La ruta combinatoria requiere modos bosónicos distintos")
    elif route == 'tensor':
        if n > TENSOR_MAX_ATOMS:
            raise UnsupportedError(f"N = {n} supera el oráculo tensorial (N <= {TENSOR_MAX_ATOMS})")
    else:
        raise InvalidArgumentError(f"Ruta desconocida: {route}")

    required = max(probe.mode_set) + 3
    cutoff = required if cutoff is None else cutoff
    if cutoff < required:
        raise ConvergenceError(f"Corte {cutoff} insuficiente para los modos {probe.mode_set} (mínimo {required})")
    h = local_generator(params, cutoff).data
    modes = list(probe.mode_set)

    squared = h @ h
    per_mode = [float(squared[m, m].real - abs(h[m, m]) ** 2) for m in modes]
    block = h[np.ix_(modes, modes)]
    exchange = float(np.sum(np.abs(block) ** 2) - np.sum(np.abs(np.diag(block)) ** 2))
    sign = -1 if probe.antisymmetric else 1

    if route == 'combinatorial':
        collective = sum(per_mode) + sign * exchange
    else:
        collective = _tensor_product_variance(probe, h)

    r = params.ratio_sq
    printed = [
        (1 + m + m * m) / (64 * params.Omega ** 2) * r ** 2 / (1 - r) ** 2 for m in modes
    ]
    coefficient_ratio = per_mode[0] / printed[0] if printed[0] > 0 else None
    metadata = {
        'route': route,
        'cutoff': cutoff,
        'statistics': probe.statistics.value,
        'mode_set': list(modes),
        'per_mode_terms': per_mode,
        'printed_per_mode_terms': printed,
        'printed_coefficient_ratio': coefficient_ratio,
        'printed_coefficient_consistent': coefficient_ratio is None or abs(coefficient_ratio - 1) < 1e-12,
        'exchange_sum': exchange,
        'exchange_sign': sign,
    }
    return FisherResult(_clamp(4 * collective), FisherMethod.GENERATOR_VARIANCE, params, metadata)


def qfi_finite_difference(state_provider, params, dOmega=None):
    """4(⟨∂ψ|∂ψ⟩ - |⟨ψ|∂ψ⟩|²) con diferencias centradas en Ω"""
    step = dOmega or get_setting('DOMEGA_REL') * params.Omega
    center = state_provider(params)

    def estimate(h):
        plus = state_provider(params.replace(Omega=params.Omega + h))
        minus = state_provider(params.replace(Omega=params.Omega - h))
        for neighbour in (plus, minus):
            if np.vdot(center.amplitudes, neighbour.amplitudes).real <= 0:
                raise NumericalError("Salto de fase entre estados vecinos en Ω")
        derivative = (plus.amplitudes - minus.amplitudes) / (2 * h)
        overlap = np.vdot(center.amplitudes, derivative)
        return 4 * (np.vdot(derivative, derivative).real - abs(overlap) ** 2)

    value, metadata = richardson_check(estimate, step)
    metadata['cutoff'] = center.dim
    return FisherResult(_clamp(value), FisherMethod.FINITE_DIFFERENCE, params, metadata)


def qfi_ground_state(builder, params, cutoff=None, dOmega=None):
    """QFI del estado fundamental de `builder`, con corte adaptativo si no se fija"""
    if cutoff is not None:
        return qfi_finite_difference(ground_state_provider(builder, cutoff), params, dOmega)
    convergence = converge_cutoff(
        lambda size: qfi_finite_difference(ground_state_provider(builder, size), params, dOmega),
        start=get_setting('DEFAULT_CUTOFF'),
        max_cutoff=get_setting('MAX_DENSE_DIMENSION') // 2,
        key=lambda result: result.value,
    )
    result = convergence.result
    return replace(
        result,
        metadata={**result.metadata, 'cutoff': convergence.cutoff, 'cutoff_history': list(convergence.history)},
    )


def qfi_mixed_spectral(rho, generator):
    """I = 2Σ (p_n - p_m)²/(p_n + p_m)·|⟨b_n|ĥ|b_m⟩|²"""
    probabilities = rho.probabilities
    if np.any(probabilities < -SPECTRAL_FLOOR) or abs(probabilities.sum() - 1) > 1e-10:
        raise InvalidArgumentError(f"ρ no normalizada: Σp = {probabilities.sum():.12f}")
    if generator.side != rho.matrix.side:
        raise InvalidArgumentError("ĥ y ρ tienen dimensiones distintas")
    basis = rho.basis.data if rho.basis is not None else np.eye(rho.matrix.side)
    rotated = basis.conj().T @ generator.data @ basis
    p_n, p_m = np.meshgrid(probabilities, probabilities, indexing='ij')
    total = p_n + p_m
    keep = total >= SPECTRAL_FLOOR
    weights = np.zeros_like(total)
    weights[keep] = (p_n[keep] - p_m[keep]) ** 2 / total[keep]
    value = 2 * float(np.sum(weights * np.abs(rotated) ** 2))
    return FisherResult(
        _clamp(value), FisherMethod.MIXED_SPECTRAL,
        metadata={**rho.metadata, 'skipped_pairs': int(np.count_nonzero(~keep))},
    )


def thermal_enhancement_factor(beta_omega):
    """2(1 + q)²/(1 + q²) con q = e^{-βω}; tiende a 2 a temperatura cero"""
    q = 0.0 if math.isinf(beta_omega) else math.exp(-beta_omega)
    return 2 * (1 + q) ** 2 / (1 + q * q)


def thermal_enhancement_factor_printed(beta_omega):
    """(tanh βω + 1)/tanh²(βω/2), equivalente al anterior sin normalizar las poblaciones"""
    if math.isinf(beta_omega):
        return 2.0
    return (math.tanh(beta_omega) + 1) / math.tanh(beta_omega / 2) ** 2


def qfi_thermal_closed_form(params):
    beta_omega = params.beta_omega
    factor = thermal_enhancement_factor(beta_omega)
    printed = thermal_enhancement_factor_printed(beta_omega)
    prefactor = _prefactor(params) / 16
    return FisherResult(
        prefactor * factor, FisherMethod.ANALYTIC, params,
        {
            'formula': 'thermal',
            'beta_omega': beta_omega,
            'enhancement_factor': factor,
            'printed_factor': printed,
            'printed_value': prefactor * printed,
            'printed_ratio': printed / factor,
        },
    )


def time_normalized_qfi(params, k_f=None, sweep_time=None):
    """
    QFI tras el barrido hasta k_f y su valor por unidad de T².

    Con T del barrido adiabático la potencia de (1 - k_f²/k_c²) baja de 2 a 1;
    con T externo el estado es el mismo y I/T² no depende de γ.
    """
    k_f = params.k if k_f is None else k_f
    target = params.replace(k=k_f)
    r_f = target.ratio_sq
    n = params.n_atoms
    if sweep_time is None:
        sweep = adiabatic_sweep_time(params, k_f)
        value = (
            params.gamma ** 2 * params.omega ** 2 * r_f ** 2 * n ** 2 * sweep ** 2
            / (2 * params.Omega ** 2 * (1 - r_f))
        )
        source = 'adiabatic-sweep'
    else:
        if not sweep_time > 0:
            raise InvalidArgumentError(f"T debe ser positivo (recibido {sweep_time})")
        sweep = sweep_time
        value = qfi_fermionic_analytic(target).value
        source = 'external'
    return FisherResult(
        value, FisherMethod.ANALYTIC, target,
        {'formula': 'time-normalized', 'sweep_time': sweep, 'sweep_source': source},
        time_normalized=value / sweep ** 2,
    )


def sql_hl_thresholds(params, k_f=None):
    """
    Márgenes frente a SQL y HL; son indicadores de orden de magnitud
    (las desigualdades valen salvo factores numéricos).
    """
    k_f = params.k if k_f is None else k_f
    k_c = params.k_c
    squeeze_parameter(k_f, k_c)
    r_f = (k_f / k_c) ** 2
    g2w2 = params.gamma ** 2 * params.omega ** 2
    n = params.n_atoms
    sql_margin = g2w2 * n / (2 * params.Omega ** 2 * (1 - r_f))
    hl_margin = g2w2 * r_f ** 2 * n / (6 * params.Omega ** 2 * (1 - r_f))
    n_ceiling = (params.Omega / params.omega) ** (1 / 3)
    excitations = mean_excitations(k_f, k_c).approximate
    k_f_ceiling = math.sqrt(max(0.0, 1 - 1 / (16 * n_ceiling ** 2)))
    n_min = params.Omega ** (4 / 3) / (params.gamma ** 2 * params.omega ** (4 / 3))
    return ThresholdReport(
        sql_margin=sql_margin,
        beats_sql=sql_margin > 1,
        hl_margin=hl_margin,
        beats_hl=hl_margin > 1,
        n_ceiling=n_ceiling,
        mean_excitations=excitations,
        within_squeezing_ceiling=excitations < n_ceiling,
        k_f_ceiling_ratio=k_f_ceiling,
        n_min=n_min,
        exceeds_n_min=n > n_min,
        notes=(
            'Margen SQL en la forma aproximada con (k_f/k_c)⁴ ≈ 1.',
            'Margen HL con la forma asintótica bosónica por unidad de N²T².',
            'N_min vale salvo factores numéricos.',
        ),
    )

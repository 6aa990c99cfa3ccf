"""
Hamiltonianos del gas con acoplamiento espín-órbita y cantidades derivadas.

Se trabaja en unidades naturales ħ = m = 1 y en el marco rotado (forma de
Rabi), donde Ω acopla por σ_z. El único dato físico del acoplamiento es el
cociente k/k_c con k_c = √(Ωω); λ = (k/k_c)·√(Ωω)/2 es la constante de Rabi
que reproduce, en el límite ω/Ω → 0, el bloque ↓ con estado fundamental S(ξ)|0⟩.
"""
import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np
from scipy import linalg

from .conf import get_setting
from .exceptions import (
    ConvergenceError,
    InvalidArgumentError,
    NumericalError,
    OutOfPhaseError,
    UnsupportedError,
)
from .fockcore import (
    SPIN_DOWN,
    DensityMatrix,
    FockOperator,
    StateVector,
    identity,
    ladder_operators,
    number_operator,
    pauli_matrices,
    phase_fix,
    squeeze_operator,
    squeezed_support_cutoff,
    tensor,
)

logger = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-8
RESIDUAL_FLOOR = 1.0
GAP_FLOOR = 1e-12
THERMAL_TAIL = 1e-12
MIN_THERMAL_CUTOFF = 4
SWEEP_GAMMA_ADVISORY = 0.2


@dataclass(frozen=True)
class ModelParams:
    """Parámetros físicos (ω, Ω, m, k, γ, N, β) en unidades naturales"""
    omega: float = 1.0
    Omega: float = 100.0
    mass: float = 1.0
    k: float = 0.0
    gamma: float = 0.1
    n_atoms: int = 1
    beta: float = math.inf

    def __post_init__(self):
        if not self.omega > 0 or not math.isfinite(self.omega):
            raise InvalidArgumentError(f"ω debe ser positivo (recibido {self.omega})")
        if not self.Omega > 0 or not math.isfinite(self.Omega):
            raise InvalidArgumentError(f"Ω debe ser positivo (recibido {self.Omega})")
        if not self.mass > 0:
            raise InvalidArgumentError(f"La masa debe ser positiva (recibido {self.mass})")
        if not self.k >= 0 or not math.isfinite(self.k):
            raise InvalidArgumentError(f"k debe ser >= 0 (recibido {self.k})")
        if not 0 < self.gamma < 1:
            raise InvalidArgumentError(f"γ debe estar en (0, 1) (recibido {self.gamma})")
        if int(self.n_atoms) != self.n_atoms or self.n_atoms < 1:
            raise InvalidArgumentError(f"N debe ser un entero >= 1 (recibido {self.n_atoms})")
        if not self.beta > 0:
            raise InvalidArgumentError(f"β debe ser positivo o infinito (recibido {self.beta})")
        if self.polarization_advisory:
            logger.warning(
                "Nω = %.3g >= Ω = %.3g: el gas deja de estar polarizado en espín",
                self.n_atoms * self.omega, self.Omega,
            )

    @classmethod
    def from_ratio(cls, k_over_kc, **kwargs):
        """Construye los parámetros a partir de k/k_c"""
        omega = kwargs.get('omega', cls.omega)
        Omega = kwargs.get('Omega', cls.Omega)
        return cls(k=k_over_kc * math.sqrt(Omega * omega), **kwargs)

    @property
    def k_c(self):
        return critical_coupling(self)

    @property
    def ratio(self):
        """k/k_c"""
        return self.k / self.k_c

    @property
    def ratio_sq(self):
        return self.ratio ** 2

    @property
    def polarization_advisory(self):
        return self.n_atoms * self.omega >= self.Omega

    @property
    def beta_omega(self):
        return self.beta * self.omega

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def with_ratio(self, k_over_kc):
        """Mismos parámetros con k ajustado a k/k_c"""
        return self.replace(k=k_over_kc * self.k_c)

    def as_dict(self):
        return dataclasses.asdict(self)


@dataclass(frozen=True, eq=False)
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: list
    cutoff: int
    metadata: Mapping[str, Any] = field(default_factory=dict)

    @property
    def ground(self):
        return self.eigenvectors[0]


@dataclass(frozen=True)
class MeanExcitations:
    """⟨n̂⟩ exacto (sinh²ξ) y su aproximación cerca de k_c"""
    exact: float
    approximate: float

    @property
    def relative_gap(self):
        return abs(self.exact - self.approximate) / max(abs(self.approximate), GAP_FLOOR)


def critical_coupling(params):
    """k_c = √(Ωω) con la convención m = 1"""
    if params.mass != 1.0:
        logger.warning(
            "k_c usa la convención m = 1; con m = %.3g sólo el cociente k/k_c tiene sentido", params.mass
        )
    return math.sqrt(params.Omega * params.omega)


def _require_normal_phase(k, k_c):
    if k < 0:
        raise InvalidArgumentError(f"k debe ser >= 0 (recibido {k})")
    if k >= k_c:
        raise OutOfPhaseError(f"k = {k:.6g} >= k_c = {k_c:.6g}: fase de franjas no modelada")


def squeeze_parameter(k, k_c):
    """ξ = -¼ ln(1 - (k/k_c)²)"""
    _require_normal_phase(k, k_c)
    return -0.25 * math.log1p(-(k / k_c) ** 2)


def _check_dimension(side):
    limit = get_setting('MAX_DENSE_DIMENSION')
    if side > limit:
        raise UnsupportedError(f"Dimensión {side} supera el máximo denso {limit}")


def build_rabi_hamiltonian(params, cutoff):
    """
    H = ω a†a + λ(a + a†)σ_x + (Ω/2)σ_z, λ = (k/k_c)√(Ωω)/2.

    En k = 0 el espectro es {nω ± Ω/2}.
    """
    _require_normal_phase(params.k, params.k_c)
    _check_dimension(2 * cutoff)
    a, ad = ladder_operators(cutoff)
    sx, _, sz = pauli_matrices()
    coupling = params.ratio * math.sqrt(params.Omega * params.omega) / 2
    position = FockOperator(cutoff, 1, a.data + ad.data, hermitian=True)
    hamiltonian = (
        tensor(number_operator(cutoff)) * params.omega
        + tensor(position, sx) * coupling
        + tensor(identity(cutoff), sz) * (params.Omega / 2)
    )
    return FockOperator(
        cutoff, 2, hamiltonian.data, hermitian=True,
        metadata={'model': 'rabi', 'cutoff': cutoff, 'coupling': coupling},
    )


def build_effective_hamiltonian(params, cutoff):
    """
    H = ω a†a + (Ω/2)σ_z + (ω/4)(k/k_c)²(a + a†)²σ_z.

    Diagonal por bloques de espín; el bloque ↓ es cuadrático y su estado
    fundamental es S(ξ)|0⟩.
    """
    _require_normal_phase(params.k, params.k_c)
    _check_dimension(2 * cutoff)
    a, ad = ladder_operators(cutoff)
    _, _, sz = pauli_matrices()
    position = a.data + ad.data
    squared = FockOperator(cutoff, 1, position @ position, hermitian=True)
    hamiltonian = (
        tensor(number_operator(cutoff)) * params.omega
        + tensor(identity(cutoff), sz) * (params.Omega / 2)
        + tensor(squared, sz) * (params.omega * params.ratio_sq / 4)
    )
    return FockOperator(
        cutoff, 2, hamiltonian.data, hermitian=True,
        metadata={'model': 'effective', 'cutoff': cutoff},
    )


def spin_block(hamiltonian, spin=SPIN_DOWN):
    """Bloque de Fock de un sector de espín"""
    if hamiltonian.spin_dim != 2:
        raise InvalidArgumentError("El operador no tiene grado de libertad de espín")
    block = hamiltonian.data[spin::2, spin::2]
    return FockOperator(hamiltonian.dim, 1, block, hermitian=hamiltonian.hermitian)


def diagonalize(hamiltonian, n_states=None):
    """Diagonalización densa; autovectores con fase fijada y residuo verificado"""
    side = hamiltonian.side
    _check_dimension(side)
    if not hamiltonian.hermitian:
        raise InvalidArgumentError("Sólo se diagonalizan operadores hermíticos")
    n_states = side if n_states is None else min(n_states, side)
    values, vectors = linalg.eigh(hamiltonian.data, subset_by_index=[0, n_states - 1])
    # residuo relativo a la escala de la matriz, con piso absoluto
    tolerance = RESIDUAL_TOL * max(RESIDUAL_FLOOR, float(np.max(np.abs(hamiltonian.data))))
    states = []
    for index in range(n_states):
        vector = vectors[:, index]
        residual = np.linalg.norm(hamiltonian.data @ vector - values[index] * vector)
        if residual >= tolerance:
            raise NumericalError(f"Residuo {residual:.3e} en el autopar {index}")
        states.append(StateVector.from_amplitudes(hamiltonian.dim, hamiltonian.spin_dim, phase_fix(vector)))
    return SpectrumResult(values, states, hamiltonian.dim, dict(hamiltonian.metadata))


def ground_state(hamiltonian):
    return diagonalize(hamiltonian, n_states=1).ground


def ground_state_provider(builder, cutoff):
    """Familia params → estado fundamental de `builder(params, cutoff)`"""
    def provider(params):
        return ground_state(builder(params, cutoff))
    return provider


def adiabatic_sweep_time(params, k_f=None):
    """T = 1/(2γω√(1 - k_f²/k_c²)); por defecto k_f = params.k"""
    k_f = params.k if k_f is None else k_f
    k_c = params.k_c
    _require_normal_phase(k_f, k_c)
    if params.gamma > SWEEP_GAMMA_ADVISORY:
        logger.warning("γ = %.3g: el barrido deja de ser adiabático (γ ≪ 1)", params.gamma)
    return 1.0 / (2 * params.gamma * params.omega * math.sqrt(1 - (k_f / k_c) ** 2))


def mean_excitations(k, k_c):
    """⟨n̂⟩ = sinh²ξ y la forma (4√(1 - k²/k_c²))⁻¹ válida cerca de k_c"""
    xi = squeeze_parameter(k, k_c)
    approximate = 1.0 / (4 * math.sqrt(1 - (k / k_c) ** 2))
    return MeanExcitations(math.sinh(xi) ** 2, approximate)


def thermal_cutoff(beta_omega):
    """Corte mínimo con cola geométrica q^D < 1e-12"""
    if math.isinf(beta_omega):
        return MIN_THERMAL_CUTOFF
    return max(MIN_THERMAL_CUTOFF, math.ceil(math.log(THERMAL_TAIL) / -beta_omega))


def thermal_state(params, cutoff=None):
    """
    ρ = Σ p_n S(ξ)|n⟩⟨n|S†(ξ) con p_n ∝ e^{-βnω}.

    Se ocupan los niveles necesarios para una cola térmica < 1e-12; la
    dimensión cubre además el soporte de S(ξ)|n⟩ para esos niveles. Sin
    corte explícito se usa el mínimo que cumple ambas condiciones; un corte
    explícito insuficiente se rechaza.
    """
    xi = squeeze_parameter(params.k, params.k_c)
    beta_omega = params.beta_omega
    populated = 1 if math.isinf(beta_omega) else thermal_cutoff(beta_omega)
    required = max(MIN_THERMAL_CUTOFF, squeezed_support_cutoff(xi, populated - 1))
    if cutoff is None:
        cutoff = required
        limit = get_setting('MAX_DENSE_DIMENSION')
        if cutoff > limit:
            raise ConvergenceError(
                f"El estado térmico a βω = {beta_omega:.3g} requiere {cutoff} estados (máximo {limit})"
            )
    elif cutoff < MIN_THERMAL_CUTOFF:
        raise InvalidArgumentError(f"Corte térmico {cutoff} menor que {MIN_THERMAL_CUTOFF}")
    elif cutoff < required:
        raise ConvergenceError(
            f"Corte {cutoff} insuficiente a βω = {beta_omega:.3g} y ξ = {xi:.4f} "
            f"(se requieren {required} estados)"
        )
    probabilities = np.zeros(cutoff)
    if math.isinf(beta_omega):
        probabilities[0] = 1.0
        tail = 0.0
    else:
        q = math.exp(-beta_omega)
        tail = q ** populated
        probabilities[:populated] = q ** np.arange(populated, dtype=float)
        probabilities /= probabilities.sum()
    basis = squeeze_operator(xi, cutoff, n_max=populated - 1)
    logger.debug("Estado térmico βω=%.3g: %d niveles ocupados, corte %d", beta_omega, populated, cutoff)
    return DensityMatrix.from_probabilities(
        probabilities,
        basis=basis,
        metadata={
            'beta_omega': beta_omega, 'cutoff': cutoff, 'populated_levels': populated,
            'tail': tail, 'xi': xi,
        },
    )

"""
Álgebra de operadores en el espacio de Fock truncado ⊗ espín 1/2.

Orden del producto tensorial: Fock ⊗ espín, índice = n * spin_dim + s, con
s = 0 para |↑⟩ y s = 1 para |↓⟩ (autovalores +1 y -1 de σ_z).

Convención de compresión: S(ξ) = exp{(ξ/2)(a†)² - (ξ/2)a²} con ξ real
ensancha la posición: ⟨x̂²⟩ = e^{2ξ}/(2mω) sobre S(ξ)|0⟩ y
⟨x|S(ξ)|n⟩ = e^{-ξ/2} φ_n(e^{-ξ} x).
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Optional

import numpy as np
from scipy import linalg

from .conf import get_setting
from .exceptions import (
    ConvergenceError,
    InvalidArgumentError,
    NumericalError,
    UnsupportedError,
)

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-10
MAX_HERMITE_ORDER = 500
SUPPORT_SIGMAS = 12
SUPPORT_TAIL = 1e-14

SPIN_UP = 0
SPIN_DOWN = 1


def _frozen(values, dtype=complex):
    data = np.array(values, dtype=dtype)
    data.setflags(write=False)
    return data


def _hermitian_part(data):
    return (data + data.conj().T) / 2


@dataclass(frozen=True, eq=False)
class FockOperator:
    """Matriz compleja sobre Fock truncado (dim estados) ⊗ espín (spin_dim)"""
    dim: int
    spin_dim: int
    data: np.ndarray
    hermitian: bool = False
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 1:
            raise InvalidArgumentError(f"dim debe ser positivo (recibido {self.dim})")
        if self.spin_dim not in (1, 2):
            raise InvalidArgumentError(f"spin_dim debe ser 1 o 2 (recibido {self.spin_dim})")
        data = _frozen(self.data)
        side = self.dim * self.spin_dim
        if data.shape != (side, side):
            raise InvalidArgumentError(
                f"La matriz debe ser cuadrada de lado {side}, no {data.shape}"
            )
        if self.hermitian:
            asymmetry = np.max(np.abs(data - data.conj().T))
            if asymmetry >= HERMITIAN_TOL:
                raise NumericalError(f"Operador marcado hermítico con |A - A†| = {asymmetry:.3e}")
        object.__setattr__(self, 'data', data)

    @property
    def side(self):
        return self.dim * self.spin_dim

    def dagger(self):
        return FockOperator(self.dim, self.spin_dim, self.data.conj().T, self.hermitian)

    def _check_shape(self, other):
        if (self.dim, self.spin_dim) != (other.dim, other.spin_dim):
            raise InvalidArgumentError(
                f"Operadores incompatibles: ({self.dim}, {self.spin_dim}) vs ({other.dim}, {other.spin_dim})"
            )

    def __matmul__(self, other):
        self._check_shape(other)
        return FockOperator(self.dim, self.spin_dim, self.data @ other.data)

    def __add__(self, other):
        self._check_shape(other)
        hermitian = self.hermitian and other.hermitian
        data = self.data + other.data
        return FockOperator(self.dim, self.spin_dim, _hermitian_part(data) if hermitian else data, hermitian)

    def __sub__(self, other):
        return self + other * -1.0

    def __mul__(self, scalar):
        hermitian = self.hermitian and np.isreal(scalar)
        return FockOperator(self.dim, self.spin_dim, self.data * scalar, hermitian)

    __rmul__ = __mul__


@dataclass(frozen=True, eq=False)
class StateVector:
    """Vector de estado normalizado sobre Fock truncado ⊗ espín"""
    dim: int
    spin_dim: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amplitudes = _frozen(self.amplitudes).reshape(-1)
        if amplitudes.size != self.dim * self.spin_dim:
            raise InvalidArgumentError(
                f"Se esperaban {self.dim * self.spin_dim} amplitudes, no {amplitudes.size}"
            )
        norm = np.linalg.norm(amplitudes)
        if abs(norm - 1.0) >= NORM_TOL:
            raise InvalidArgumentError(f"Estado no normalizado: ‖ψ‖ = {norm:.12f}")
        object.__setattr__(self, 'amplitudes', amplitudes)

    @classmethod
    def from_amplitudes(cls, dim, spin_dim, amplitudes):
        """Normaliza y construye; falla si el vector es nulo"""
        amplitudes = np.asarray(amplitudes, dtype=complex).reshape(-1)
        norm = np.linalg.norm(amplitudes)
        if norm == 0:
            raise InvalidArgumentError("No se puede normalizar un vector nulo")
        return cls(dim, spin_dim, amplitudes / norm)


@dataclass(frozen=True)
class SqueezedFockState:
    """Etiqueta del autoestado S(ξ)|n⟩ de una partícula"""
    n: int
    xi: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise InvalidArgumentError(f"n debe ser un entero no negativo (recibido {self.n})")
        if not math.isfinite(self.xi) or self.xi < 0:
            raise InvalidArgumentError(f"ξ debe ser real finito y >= 0 (recibido {self.xi})")

    def materialize(self, cutoff, spin=None):
        """Vector S(ξ)|n⟩ (⊗ |spin⟩ si se indica) en el corte dado"""
        if self.n >= cutoff:
            raise InvalidArgumentError(f"n = {self.n} no cabe en el corte {cutoff}")
        squeeze = squeeze_operator(self.xi, cutoff, n_max=self.n)
        column = squeeze.data[:, self.n]
        if spin is None:
            return StateVector.from_amplitudes(cutoff, 1, column)
        return StateVector.from_amplitudes(cutoff, 2, np.kron(column, _spin_vector(spin)))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Mezcla ρ = Σ p_n |b_n⟩⟨b_n| con b_n las columnas de `basis`"""
    matrix: FockOperator
    probabilities: np.ndarray
    basis: Optional[FockOperator] = None
    metadata: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        probabilities = _frozen(self.probabilities, dtype=float).reshape(-1)
        if probabilities.size != self.matrix.side:
            raise InvalidArgumentError("El vector de probabilidades no coincide con la dimensión de ρ")
        object.__setattr__(self, 'probabilities', probabilities)

    @classmethod
    def from_probabilities(cls, probabilities, basis=None, dim=None, metadata=None):
        probabilities = np.asarray(probabilities, dtype=float)
        if basis is None:
            dim = dim or probabilities.size
            basis = FockOperator(dim, 1, np.eye(dim))
        matrix = (basis.data * probabilities) @ basis.data.conj().T
        return cls(
            FockOperator(basis.dim, basis.spin_dim, _hermitian_part(matrix), hermitian=True),
            probabilities,
            basis,
            metadata or {},
        )

    @property
    def trace(self):
        return float(np.trace(self.matrix.data).real)


@dataclass(frozen=True)
class CutoffConvergence:
    result: Any
    cutoff: int
    history: tuple


def _spin_vector(spin):
    vector = np.zeros(2)
    vector[spin] = 1.0
    return vector


def ladder_operators(cutoff):
    """Devuelve (a, a†) con a|n⟩ = √n |n-1⟩ en el corte dado"""
    if int(cutoff) != cutoff or cutoff < 2:
        raise InvalidArgumentError(f"El corte debe ser un entero >= 2 (recibido {cutoff})")
    lowering = np.diag(np.sqrt(np.arange(1, cutoff, dtype=float)), k=1)
    return FockOperator(cutoff, 1, lowering), FockOperator(cutoff, 1, lowering.T)


def number_operator(cutoff):
    if cutoff < 1:
        raise InvalidArgumentError(f"El corte debe ser positivo (recibido {cutoff})")
    return FockOperator(cutoff, 1, np.diag(np.arange(cutoff, dtype=float)), hermitian=True)


def identity(dim, spin_dim=1):
    return FockOperator(dim, spin_dim, np.eye(dim * spin_dim), hermitian=True)


def quadratures(cutoff, m=1.0, omega=1.0):
    """x̂ = (a + a†)/√(2mω) y p̂ = i√(mω/2)(a† - a)"""
    if m <= 0 or omega <= 0:
        raise InvalidArgumentError(f"m y ω deben ser positivos (m={m}, ω={omega})")
    a, ad = ladder_operators(cutoff)
    x = (a.data + ad.data) / math.sqrt(2 * m * omega)
    p = 1j * math.sqrt(m * omega / 2) * (ad.data - a.data)
    return (
        FockOperator(cutoff, 1, _hermitian_part(x), hermitian=True),
        FockOperator(cutoff, 1, _hermitian_part(p), hermitian=True),
    )


def pauli_matrices():
    """(σ_x, σ_y, σ_z) en la base (|↑⟩, |↓⟩)"""
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    return tuple(FockOperator(1, 2, s, hermitian=True) for s in (sx, sy, sz))


def tensor(fock_op, spin_op=None):
    """Producto Fock ⊗ espín; sin `spin_op` se usa la identidad de espín"""
    if fock_op.spin_dim != 1:
        raise InvalidArgumentError("El primer factor debe ser un operador de Fock puro")
    spin_data = np.eye(2) if spin_op is None else spin_op.data
    if spin_op is not None and (spin_op.dim, spin_op.spin_dim) != (1, 2):
        raise InvalidArgumentError("El segundo factor debe ser un operador de espín 2x2")
    hermitian = fock_op.hermitian and (spin_op is None or spin_op.hermitian)
    return FockOperator(fock_op.dim, 2, np.kron(fock_op.data, spin_data), hermitian)


def squeeze_generator(cutoff):
    """K = ((a†)² - a²)/2, antihermítico; S(ξ) = exp(ξK)"""
    a, ad = ladder_operators(cutoff)
    return FockOperator(cutoff, 1, (ad.data @ ad.data - a.data @ a.data) / 2)


def expm_operator(op, factor=1.0):
    """exp(factor·A) por escalamiento y cuadratura con aproximante de Padé"""
    return FockOperator(op.dim, op.spin_dim, linalg.expm(factor * op.data))


def squeezed_support_cutoff(xi, n_max=0, tail=SUPPORT_TAIL):
    """
    Dimensión que contiene S(ξ)|n⟩ para todo n <= n_max: media de ocupación
    más SUPPORT_SIGMAS desviaciones, más la cola geométrica tanh^D|ξ| < tail.
    """
    if not math.isfinite(xi):
        raise InvalidArgumentError(f"ξ debe ser finito (recibido {xi})")
    if xi == 0:
        return n_max + 1
    mean = n_max * math.cosh(2 * xi) + math.sinh(xi) ** 2
    sigma = math.sqrt((n_max ** 2 + n_max + 1) / 2) * abs(math.sinh(2 * xi))
    geometric = math.log(tail) / math.log(math.tanh(abs(xi)))
    return max(n_max + 1, math.ceil(mean + SUPPORT_SIGMAS * sigma + geometric))


def squeeze_operator(xi, cutoff, n_max=0):
    """S(ξ) truncado; `metadata` indica si el corte es holgado para estados hasta n_max"""
    spread = squeezed_support_cutoff(xi, n_max)
    advisory = spread > cutoff
    if advisory:
        logger.warning(
            "Corte %d insuficiente para ξ=%.4f, n_max=%d (se requieren %d)", cutoff, xi, n_max, spread
        )
    generator = squeeze_generator(cutoff)
    squeeze = expm_operator(generator, xi)
    return FockOperator(
        cutoff,
        1,
        squeeze.data,
        metadata={'xi': xi, 'cutoff': cutoff, 'spread': spread, 'cutoff_advisory': advisory},
    )


def fock_state(n, cutoff, spin=None):
    """|n⟩ (⊗ |spin⟩ si se indica)"""
    if n < 0 or n >= cutoff:
        raise InvalidArgumentError(f"n = {n} fuera del corte {cutoff}")
    column = np.zeros(cutoff)
    column[n] = 1.0
    if spin is None:
        return StateVector(cutoff, 1, column)
    return StateVector(cutoff, 2, np.kron(column, _spin_vector(spin)))


def expectation(op, state):
    return complex(np.vdot(state.amplitudes, op.data @ state.amplitudes))


def variance(op, state):
    """Δ²A = ‖Aψ‖² - |⟨A⟩|² para A hermítico"""
    applied = op.data @ state.amplitudes
    mean = np.vdot(state.amplitudes, applied)
    return float(np.vdot(applied, applied).real - abs(mean) ** 2)


def phase_fix(amplitudes, rtol=1e-10):
    """Rota el vector para que su componente de mayor módulo sea real positiva"""
    amplitudes = np.asarray(amplitudes, dtype=complex)
    magnitudes = np.abs(amplitudes)
    order = np.argsort(magnitudes)
    largest = magnitudes[order[-1]]
    if largest == 0:
        raise NumericalError("Vector nulo: no hay fase que fijar")
    if magnitudes.size > 1 and magnitudes[order[-2]] >= largest * (1 - rtol):
        raise NumericalError("Componente dominante degenerada: la fase queda indeterminada")
    pivot = amplitudes[order[-1]]
    return amplitudes * (abs(pivot) / pivot)


def trace_distance(first, second):
    """Distancia de traza entre estados puros: √(1 - |⟨a|b⟩|²)"""
    overlap = abs(np.vdot(first.amplitudes, second.amplitudes)) ** 2
    return math.sqrt(max(0.0, 1.0 - overlap))


def interior_block(op, margin):
    """Bloque de Fock alejado del borde de truncamiento"""
    if op.spin_dim != 1:
        raise InvalidArgumentError("El bloque interior se define sobre operadores de Fock puros")
    size = op.dim - margin
    if size < 1:
        raise InvalidArgumentError(f"Margen {margin} demasiado grande para el corte {op.dim}")
    return op.data[:size, :size]


def converge_cutoff(compute: Callable[[int], Any], start=None, rtol=None, max_cutoff=None,
                    key: Callable[[Any], float] = float):
    """
    Recalcula en los cortes D y ⌈1.5·D⌉ hasta que el cambio relativo sea
    menor que `rtol`; devuelve el último resultado con el corte usado.
    """
    cutoff = int(start or get_setting('DEFAULT_CUTOFF'))
    rtol = get_setting('CUTOFF_RTOL') if rtol is None else rtol
    max_cutoff = max_cutoff or get_setting('MAX_DENSE_DIMENSION')
    result = compute(cutoff)
    history = [(cutoff, key(result))]
    while True:
        next_cutoff = math.ceil(1.5 * cutoff)
        if next_cutoff > max_cutoff:
            raise ConvergenceError(
                f"Sin convergencia en el corte hasta {cutoff}: historial {history}"
            )
        next_result = compute(next_cutoff)
        previous, current = history[-1][1], key(next_result)
        history.append((next_cutoff, current))
        if abs(current - previous) <= rtol * abs(current):
            return CutoffConvergence(next_result, next_cutoff, tuple(history))
        cutoff, result = next_cutoff, next_result


def hermite_functions(n_max, x, m=1.0, omega=1.0):
    """
    Funciones φ_0..φ_{n_max} evaluadas en x, con la recurrencia normalizada
    φ_{n+1} = y√(2/(n+1)) φ_n - √(n/(n+1)) φ_{n-1}, y = √(mω)·x.
    Forma (n_max + 1, *x.shape).
    """
    if n_max < 0:
        raise InvalidArgumentError(f"n debe ser >= 0 (recibido {n_max})")
    if n_max > MAX_HERMITE_ORDER:
        raise UnsupportedError(f"n = {n_max} supera el rango estable de la recurrencia ({MAX_HERMITE_ORDER})")
    if m <= 0 or omega <= 0:
        raise InvalidArgumentError(f"m y ω deben ser positivos (m={m}, ω={omega})")
    y = math.sqrt(m * omega) * np.asarray(x, dtype=float)
    values = np.empty((n_max + 1,) + y.shape)
    values[0] = (m * omega / math.pi) ** 0.25 * np.exp(-y ** 2 / 2)
    if n_max >= 1:
        values[1] = math.sqrt(2.0) * y * values[0]
    for n in range(1, n_max):
        values[n + 1] = math.sqrt(2.0 / (n + 1)) * y * values[n] - math.sqrt(n / (n + 1)) * values[n - 1]
    return values


def oscillator_wavefunction(n, x, m=1.0, omega=1.0):
    """φ_n(x) del oscilador armónico; acepta escalares o arreglos"""
    value = hermite_functions(n, x, m, omega)[n]
    return float(value) if np.ndim(value) == 0 else value


def squeezed_mode_wavefunction(state, x, m=1.0, omega=1.0):
    """⟨x|S(ξ)|n⟩ = e^{-ξ/2} φ_n(e^{-ξ} x), real"""
    scale = math.exp(-state.xi)
    x = np.asarray(x, dtype=float)
    return math.sqrt(scale) * oscillator_wavefunction(state.n, scale * x, m, omega)


def squeezed_mode_momentum_wavefunction(state, p, m=1.0, omega=1.0):
    """
    Amplitud en momento de S(ξ)|n⟩ sin la fase global (-i)^n:
    e^{ξ/2} φ_n(e^{ξ} p) con mω → 1/(mω).
    """
    scale = math.exp(state.xi)
    p = np.asarray(p, dtype=float)
    return math.sqrt(scale) * oscillator_wavefunction(state.n, scale * p, 1.0 / (m * omega), 1.0)

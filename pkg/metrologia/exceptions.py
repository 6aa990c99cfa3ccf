"""Errores del paquete; cada clase corresponde a un tipo de falla reportable."""


class MetrologyError(Exception):
    """Base de todos los errores de la librería"""


class InvalidArgumentError(MetrologyError, ValueError):
    """Argumento fuera del dominio permitido"""


class OutOfPhaseError(InvalidArgumentError):
    """Acoplamiento k >= k_c: la fase de franjas no está modelada"""


class GridCoverageError(InvalidArgumentError):
    """La grilla no cubre el estado con la holgura exigida"""


class UnsupportedError(MetrologyError):
    """Caso fuera del alcance de la ruta numérica elegida"""


class ConvergenceError(MetrologyError):
    """El truncamiento o la discretización no convergió"""


class NumericalError(MetrologyError):
    """Resultado numérico inconsistente (fase, signo, residuo)"""


class EstimationError(NumericalError):
    """La maximización de la verosimilitud no quedó acotada"""

from django.db.models import TextChoices
from django.utils.translation import gettext_lazy as _


class Scenario(TextChoices):
    FIG2 = 'fig2', _('CFI de posición frente a QFI para N = 2')
    SCALING = 'scaling', _('Escalamiento de la QFI con N')
    THERMAL = 'thermal', _('QFI a temperatura finita')
    LIMITS = 'limits', _('Comparación con SQL y HL')
    TRIANGLE = 'triangle', _('Triángulo de oráculos de una partícula')
    EFFECTIVE = 'effective', _('Modelo de Rabi frente al efectivo')
    MLE = 'mle', _('Saturación de Cramér-Rao por máxima verosimilitud')


class SweepSpacing(TextChoices):
    LINEAR = 'linear', _('Lineal')
    LOG = 'log', _('Logarítmico')


class SweepParameter(TextChoices):
    K_OVER_KC = 'k_over_kc', _('k/k_c')
    N_ATOMS = 'n_atoms', _('Número de átomos')
    BETA_OMEGA = 'beta_omega', _('βω')
    OMEGA_OVER_OMEGA = 'omega_over_Omega', _('ω/Ω')


class OutputFormat(TextChoices):
    CSV = 'csv', _('CSV')
    JSON = 'json', _('JSON')

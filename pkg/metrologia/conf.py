"""
Valores numéricos por defecto de la app.

Los valores de `settings.SOC_METROLOGY` tienen prioridad; si Django no está
configurado (uso como librería) se usan los valores de `DEFAULTS`.
"""
from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

DEFAULTS = {
    'DEFAULT_CUTOFF': 40,
    'MAX_DENSE_DIMENSION': 4000,
    'CUTOFF_RTOL': 1e-6,
    'GRID_POINTS': 1024,
    'PAIR_GRID_POINTS': 256,
    'GRID_WIDTH_SIGMAS': 6.0,
    'DOMEGA_REL': 1e-4,
    'MLE_BATCHES': 200,
    'MAX_WORKERS': 4,
    'OUTPUT_DIR': 'resultados',
    'DEFAULT_SEED': 20240101,
}


def get_setting(name):
    """Devuelve un parámetro numérico con la precedencia settings > DEFAULTS"""
    if name not in DEFAULTS:
        raise KeyError(f"Parámetro desconocido: {name}")
    try:
        overrides = getattr(settings, 'SOC_METROLOGY', {})
    except ImproperlyConfigured:
        overrides = {}
    return overrides.get(name, DEFAULTS[name])

from pathlib import Path
import os
from dotenv import load_dotenv

# 1. Configuración de rutas base
BASE_DIR = Path(__file__).resolve().parent.parent

# Cargar variables desde `.env`
load_dotenv()

# 2. Seguridad (¡No exponer `SECRET_KEY` directamente!)
SECRET_KEY = os.getenv("DJANGO_SECRET_KEY", "valor_por_defecto_inseguro")
DEBUG = os.getenv("DJANGO_DEBUG", "False") == "True"
ALLOWED_HOSTS = []

# 3. Aplicaciones instaladas
INSTALLED_APPS = [
    'rest_framework',  # Serializadores y renderizado JSON
    'metrologia',  # App principal
]

# 4. Sin base de datos: los resultados se escriben como archivos CSV/JSON
DATABASES = {}

# 5. Internacionalización
LANGUAGE_CODE = 'es-cl'
USE_I18N = True
USE_TZ = True
TIME_ZONE = 'UTC'

# 6. Configuración de Django REST Framework (DRF)
REST_FRAMEWORK = {
    'STRICT_JSON': True,
    'UNICODE_JSON': True,
    'COMPACT_JSON': False,
}

# 7. Logging
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{asctime} {levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'metrologia': {
            'handlers': ['console'],
            'level': os.getenv("SOC_LOG_LEVEL", "INFO"),
            'propagate': False,
        },
    },
}

# 8. Parámetros numéricos por defecto (sobrescribibles desde `.env`)
SOC_METROLOGY = {
    'DEFAULT_CUTOFF': int(os.getenv("SOC_DEFAULT_CUTOFF", "40")),
    'MAX_DENSE_DIMENSION': int(os.getenv("SOC_MAX_DENSE_DIMENSION", "4000")),
    'CUTOFF_RTOL': float(os.getenv("SOC_CUTOFF_RTOL", "1e-6")),
    'GRID_POINTS': int(os.getenv("SOC_GRID_POINTS", "1024")),
    'PAIR_GRID_POINTS': int(os.getenv("SOC_PAIR_GRID_POINTS", "256")),
    'GRID_WIDTH_SIGMAS': float(os.getenv("SOC_GRID_WIDTH_SIGMAS", "6")),
    'DOMEGA_REL': float(os.getenv("SOC_DOMEGA_REL", "1e-4")),
    'MLE_BATCHES': int(os.getenv("SOC_MLE_BATCHES", "200")),
    'MAX_WORKERS': int(os.getenv("SOC_MAX_WORKERS", "4")),
    'OUTPUT_DIR': os.getenv("SOC_OUTPUT_DIR", str(BASE_DIR / 'resultados')),
    'DEFAULT_SEED': int(os.getenv("SOC_DEFAULT_SEED", "20240101")),
}

import logging

from django.apps import AppConfig

logger = logging.getLogger(__name__)


class MetrologiaConfig(AppConfig):
    name = 'metrologia'
    verbose_name = 'Metrología espín-órbita'

    def ready(self):
        from .conf import get_setting
        logger.debug("Dimensión densa máxima: %s", get_setting('MAX_DENSE_DIMENSION'))

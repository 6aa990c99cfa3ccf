import json
import logging

from django.core.management.base import BaseCommand, CommandError
from rest_framework import serializers

from metrologia.choices import Scenario
from metrologia.exceptions import (
    ConvergenceError,
    InvalidArgumentError,
    NumericalError,
    UnsupportedError,
)
from metrologia.scenarios import build_document, load_run_config, run_scenario

logger = logging.getLogger(__name__)

EXIT_INVALID_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


class Command(BaseCommand):
    help = "Ejecuta un escenario de metrología y escribe los resultados en CSV y JSON"

    def add_arguments(self, parser):
        parser.add_argument('scenario', choices=Scenario.values, help="Escenario a ejecutar")
        parser.add_argument('--config', help="Documento JSON de configuración")
        parser.add_argument('--out', help="Directorio de salida")
        parser.add_argument('--seed', type=int, help="Semilla (entero de 64 bits sin signo)")
        parser.add_argument(
            '--param', action='append', default=[], metavar='CLAVE=VALOR',
            help="Sobrescribe un campo; admite claves con puntos (numerics.cutoff=60)",
        )

    def _read_config(self, path):
        if not path:
            return {}
        try:
            with open(path, encoding='utf-8') as handle:
                document = json.load(handle)
        except OSError as exc:
            raise CommandError(f"No se pudo leer {path}: {exc}", returncode=EXIT_IO)
        except json.JSONDecodeError as exc:
            raise CommandError(f"JSON inválido en {path}: {exc}", returncode=EXIT_INVALID_CONFIG)
        if not isinstance(document, dict):
            raise CommandError("La configuración debe ser un objeto JSON", returncode=EXIT_INVALID_CONFIG)
        return document

    def handle(self, *args, **options):
        file_document = self._read_config(options['config'])
        try:
            document = build_document(
                options['scenario'], file_document, options['param'], options['seed'], options['out'],
            )
            config = load_run_config(document)
        except serializers.ValidationError as exc:
            raise CommandError(f"Configuración inválida: {exc.detail}", returncode=EXIT_INVALID_CONFIG)
        except (ValueError, InvalidArgumentError) as exc:
            raise CommandError(f"Configuración inválida: {exc}", returncode=EXIT_INVALID_CONFIG)

        try:
            written = run_scenario(config)
        except InvalidArgumentError as exc:
            raise CommandError(str(exc), returncode=EXIT_INVALID_CONFIG)
        except (ConvergenceError, NumericalError, UnsupportedError) as exc:
            logger.error("Escenario %s sin convergencia: %s", config.scenario, exc)
            raise CommandError(str(exc), returncode=EXIT_NUMERICAL)
        except OSError as exc:
            raise CommandError(f"Error de escritura: {exc}", returncode=EXIT_IO)

        for path in written:
            self.stdout.write(self.style.SUCCESS(f"Escrito {path}"))

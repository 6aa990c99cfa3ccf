#!/usr/bin/env python
"""Utilidad de línea de comandos: tareas de Django y escenarios de metrología."""
import os
import sys


def main():
    """Ejecuta tareas administrativas o un escenario (`manage.py fig2 ...`)."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'soc_core.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Are you sure it's installed and "
            "available on your PYTHONPATH environment variable? Did you "
            "forget to activate a virtual environment?"
        ) from exc

    from metrologia.choices import Scenario

    argv = list(sys.argv)
    # Atajo: `manage.py <escenario>` equivale a `manage.py soc_metrology <escenario>`
    if len(argv) > 1 and argv[1] in Scenario.values:
        argv.insert(1, 'soc_metrology')
    execute_from_command_line(argv)


if __name__ == '__main__':
    main()

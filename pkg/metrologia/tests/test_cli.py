import json
import tempfile
from io import StringIO
from pathlib import Path

import pandas as pd
from django.apps import apps
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase


class SocMetrologyCommandTests(SimpleTestCase):
    def setUp(self):
        directory = tempfile.TemporaryDirectory()
        self.addCleanup(directory.cleanup)
        self.out = Path(directory.name)

    def run_command(self, scenario, out=None, **options):
        call_command('soc_metrology', scenario, out=str(out or self.out), stdout=StringIO(), **options)

    def read_table(self, name, out=None):
        return pd.read_csv((out or self.out) / f"{name}.csv", comment='#')

    def read_report(self, name, out=None):
        return json.loads(((out or self.out) / f"{name}.json").read_text(encoding='utf-8'))

    def assertExitCode(self, code, scenario, **options):
        with self.assertRaises(CommandError) as context:
            self.run_command(scenario, **options)
        self.assertEqual(context.exception.returncode, code)

    def test_fig2(self):
        self.run_command('fig2')
        table = self.read_table('fig2')
        self.assertEqual(len(table), 9)
        self.assertTrue((table['relative_gap'] < 0.01).all())
        header = (self.out / 'fig2.csv').read_text(encoding='utf-8').splitlines()
        self.assertTrue(header[0].startswith('# scenario: fig2'))
        self.assertTrue(any(line.startswith('# config_sha256: ') for line in header))

        report = self.read_report('fig2')
        self.assertEqual(set(report), {'config', 'results', 'diagnostics'})
        self.assertLess(report['results']['max_relative_gap'], 0.01)
        self.assertEqual(report['config']['scenario'], 'fig2')

    def test_fig2_sin_acoplamiento(self):
        self.run_command('fig2', param=['sweep.values=[0.0, 0.5]'])
        table = self.read_table('fig2')
        row = table[table['k_over_kc'] == 0.0].iloc[0]
        self.assertEqual(row['qfi_analytic'], 0.0)
        self.assertEqual(row['cfi_position'], 0.0)
        self.assertEqual(row['relative_gap'], 0.0)
        self.assertEqual(row['mean_excitations'], 0.0)
        self.assertGreater(table[table['k_over_kc'] == 0.5]['mean_excitations'].iloc[0], 0.0)

    def test_corridas_reproducibles(self):
        second = self.out / 'segunda'
        self.run_command('fig2')
        self.run_command('fig2', out=second)
        for name in ('fig2.csv', 'fig2.json'):
            self.assertEqual((self.out / name).read_bytes(), (second / name).read_bytes())

    def test_scaling(self):
        self.run_command('scaling')
        slopes = self.read_report('scaling')['results']['log_log_slopes']
        self.assertAlmostEqual(slopes['fermionic'], 2.0, places=6)
        self.assertAlmostEqual(slopes['tonks-girardeau'], 2.0, places=6)
        self.assertAlmostEqual(slopes['symmetric-bosonic-excited'], 3.0, delta=0.05)
        self.assertEqual(len(self.read_table('scaling')), 8)

    def test_thermal(self):
        self.run_command('thermal')
        report = self.read_report('thermal')
        self.assertTrue(report['results']['monotone_decreasing_in_beta'])
        self.assertLess(report['results']['max_relative_gap'], 0.01)
        self.assertIn(139, report['diagnostics']['populated_levels'])

    def test_limits(self):
        self.run_command('limits', param=['params.Omega=1000'])
        thresholds = self.read_report('limits')['results']['thresholds']
        self.assertAlmostEqual(thresholds['n_ceiling'], 10.0)
        self.assertFalse(thresholds['beats_sql'])
        self.assertEqual(self.read_report('limits')['results']['params']['Omega'], 1000.0)
        fisher = self.read_report('limits')['results']['fisher']
        self.assertEqual(fisher['method'], 'analytic')
        self.assertEqual(fisher['metadata'], {'formula': 'fermionic'})
        self.assertGreater(fisher['value'], 0.0)
        self.assertIsNone(fisher['time_normalized'])
        self.assertEqual(fisher['params']['Omega'], 1000.0)
        self.assertFalse((self.out / 'limits.csv').exists())

    def test_triangle(self):
        self.run_command('triangle')
        self.assertLess(self.read_report('triangle')['results']['max_pairwise_gap'], 0.01)
        self.assertEqual(len(self.read_table('triangle')), 5)

    def test_effective(self):
        self.run_command('effective')
        self.assertTrue(self.read_report('effective')['results']['deviation_decreases_with_omega_over_Omega'])

    def test_mle(self):
        self.run_command('mle', seed=5, param=['numerics.samples=2000', 'numerics.batches=200'])
        report = self.read_report('mle')
        self.assertEqual(report['results']['estimation']['sample_count'], 2000)
        self.assertAlmostEqual(report['results']['variance_over_crb'], 1.0, delta=0.35)
        self.assertEqual(len(self.read_table('mle')), 200)

    def test_semilla_en_la_cabecera(self):
        self.run_command('limits', seed=42, param=['numerics.cutoff=30'])
        self.assertEqual(self.read_report('limits')['config']['numerics']['seed'], 42)

    def test_configuracion_invalida(self):
        self.assertExitCode(2, 'limits', param=['numerics.cutoff=abc'])
        self.assertExitCode(2, 'limits', param=['Omega'])
        self.assertExitCode(2, 'limits', param=['k_over_kc=1.2'])

        config = self.out / 'config.json'
        config.write_text(json.dumps({'params': {'k': 5, 'k_over_kc': 0.5}}), encoding='utf-8')
        self.assertExitCode(2, 'limits', config=str(config))
        config.write_text('{no es json', encoding='utf-8')
        self.assertExitCode(2, 'limits', config=str(config))

    def test_corte_insuficiente(self):
        self.assertExitCode(3, 'thermal', param=['numerics.cutoff=20'])

    def test_errores_de_archivo(self):
        self.assertExitCode(4, 'limits', config=str(self.out / 'no_existe.json'))
        blocker = self.out / 'archivo'
        blocker.write_text('', encoding='utf-8')
        self.assertExitCode(4, 'limits', out=blocker / 'salida')


class AppConfigTests(SimpleTestCase):
    def test_sin_aplicaciones_de_base_de_datos(self):
        self.assertTrue(apps.is_installed('metrologia'))
        self.assertFalse(apps.is_installed('django.contrib.auth'))
        self.assertFalse(apps.is_installed('django.contrib.contenttypes'))
        config = apps.get_app_config('metrologia')
        self.assertNotIn('default_auto_field', vars(type(config)))

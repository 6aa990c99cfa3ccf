import math

import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from metrologia.exceptions import (
    ConvergenceError,
    InvalidArgumentError,
    NumericalError,
    OutOfPhaseError,
    UnsupportedError,
)
from metrologia.fockcore import DensityMatrix, SqueezedFockState, squeeze_generator
from metrologia.metrology import (
    FisherMethod,
    FisherResult,
    ManyBodyProbe,
    Statistics,
    fermionic_contribution_polynomials,
    local_generator,
    qfi_bosonic_excited_analytic,
    qfi_bosonic_excited_asymptotic,
    qfi_collective_variance,
    qfi_fermionic_analytic,
    qfi_fermionic_contributions,
    qfi_finite_difference,
    qfi_generator_variance,
    qfi_ground_state,
    qfi_mixed_spectral,
    qfi_single_particle_analytic,
    qfi_thermal_closed_form,
    sql_hl_thresholds,
    thermal_enhancement_factor,
    thermal_enhancement_factor_printed,
    time_normalized_qfi,
)
from metrologia.models import (
    ModelParams,
    build_effective_hamiltonian,
    build_rabi_hamiltonian,
    ground_state_provider,
    thermal_state,
)


def params_at(ratio, **kwargs):
    kwargs.setdefault('Omega', 10.0)
    return ModelParams.from_ratio(ratio, **kwargs)


class LocalGeneratorTests(SimpleTestCase):
    def test_cero_sin_acoplamiento(self):
        self.assertEqual(np.max(np.abs(local_generator(params_at(0.0), 10).data)), 0.0)

    def test_estructura(self):
        h = local_generator(params_at(0.5), 12)
        self.assertTrue(h.hermitian)
        assert_allclose(np.diag(h.data), np.zeros(12), atol=1e-15)
        mask = np.abs(np.subtract.outer(np.arange(12), np.arange(12))) != 2
        self.assertEqual(np.max(np.abs(h.data[mask])), 0.0)

    def test_elemento_de_matriz(self):
        h = local_generator(params_at(0.5), 6)
        expected = 0.0625 / 0.5625 * 2 / (64 * 100)
        self.assertAlmostEqual(abs(h.data[2, 0]) ** 2 / expected, 1.0, places=12)
        self.assertAlmostEqual(abs(h.data[2, 0]) ** 2, 3.4722e-5, places=8)

    def test_conmuta_con_la_compresion(self):
        h = local_generator(params_at(0.7), 15).data
        generator = squeeze_generator(15).data
        assert_allclose(h @ generator - generator @ h, np.zeros((15, 15)), atol=1e-12)

    def test_fuera_de_fase(self):
        with self.assertRaises(OutOfPhaseError):
            local_generator(ModelParams(Omega=100.0, k=10.0), 6)


class AnalyticFormTests(SimpleTestCase):
    def test_una_particula(self):
        self.assertEqual(qfi_single_particle_analytic(params_at(0.0)).value, 0.0)
        self.assertAlmostEqual(qfi_single_particle_analytic(params_at(0.5)).value, 1.3889e-4, places=8)
        ratio = qfi_single_particle_analytic(params_at(0.9)).value / qfi_single_particle_analytic(params_at(0.5)).value
        self.assertAlmostEqual(ratio, 163.5707, places=3)

    def test_fermiones(self):
        single = qfi_single_particle_analytic(params_at(0.5)).value
        self.assertAlmostEqual(qfi_fermionic_analytic(params_at(0.5, n_atoms=1)).value, single)
        self.assertAlmostEqual(qfi_fermionic_analytic(params_at(0.5, n_atoms=2)).value, 5.5556e-4, places=8)
        for n in (3, 7):
            ratio = qfi_fermionic_analytic(params_at(0.3, n_atoms=2 * n)).value / qfi_fermionic_analytic(params_at(0.3, n_atoms=n)).value
            self.assertAlmostEqual(ratio, 4.0, places=12)

    def test_cancelacion_de_terminos_cubicos(self):
        self.assertEqual(fermionic_contribution_polynomials(10), (1020, -720))
        self.assertEqual(fermionic_contribution_polynomials(1)[1], 0)
        for n in range(1, 10001):
            first, second = fermionic_contribution_polynomials(n)
            self.assertEqual(first + second, 3 * n * n)

    def test_contribuciones_suman_la_forma_cuadratica(self):
        for n in (1, 2, 10, 137, 10000):
            params = params_at(0.6, n_atoms=n, Omega=1e5)
            first, second = qfi_fermionic_contributions(params)
            # los términos crecen como N³ y se cancelan: el error relativo escala con N·ε
            self.assertAlmostEqual((first + second) / qfi_fermionic_analytic(params).value, 1.0, delta=1e-10)

    def test_bosones_excitados(self):
        prefactor = 0.0625 / (100 * 0.5625)
        single = qfi_single_particle_analytic(params_at(0.5)).value
        self.assertAlmostEqual(qfi_bosonic_excited_analytic(params_at(0.5, n_atoms=1)).value, single, places=15)
        self.assertAlmostEqual(qfi_bosonic_excited_analytic(params_at(0.5, n_atoms=2)).value / prefactor, 0.5)
        self.assertAlmostEqual(qfi_bosonic_excited_analytic(params_at(0.5, n_atoms=3)).value / prefactor, 39 / 24)

    def test_pendientes_log_log(self):
        fermions = np.arange(2, 101)
        values = [qfi_fermionic_analytic(params_at(0.5, n_atoms=int(n), Omega=1e4)).value for n in fermions]
        self.assertAlmostEqual(np.polyfit(np.log(fermions), np.log(values), 1)[0], 2.0, delta=0.01)
        bosons = np.arange(50, 501, 10)
        values = [qfi_bosonic_excited_analytic(params_at(0.5, n_atoms=int(n), Omega=1e4)).value for n in bosons]
        self.assertAlmostEqual(np.polyfit(np.log(bosons), np.log(values), 1)[0], 3.0, delta=0.02)

    def test_forma_asintotica_bosonica(self):
        params = params_at(0.5, n_atoms=10000)
        exact = qfi_bosonic_excited_analytic(params)
        self.assertAlmostEqual(exact.metadata['asymptotic_ratio'], 2.0, places=3)
        asymptotic = qfi_bosonic_excited_asymptotic(params)
        prefactor = 0.0625 / (100 * 0.5625)
        self.assertAlmostEqual(asymptotic.value / (prefactor * 10000 ** 3 / 24), 1.0, places=12)
        self.assertAlmostEqual(asymptotic.time_normalized, asymptotic.value / asymptotic.metadata['sweep_time'] ** 2)

    def test_valor_negativo(self):
        with self.assertRaises(NumericalError):
            FisherResult(-1.0, FisherMethod.ANALYTIC)


class CollectiveVarianceTests(SimpleTestCase):
    def test_una_particula(self):
        params = params_at(0.5)
        single = qfi_single_particle_analytic(params).value
        for statistics in Statistics.values:
            value = qfi_collective_variance(ManyBodyProbe(1, statistics), params).value
            self.assertAlmostEqual(value / single, 1.0, places=8)

    def test_dos_fermiones_y_oraculo_tensorial(self):
        params = params_at(0.5, n_atoms=2)
        probe = ManyBodyProbe(2, Statistics.FERMIONIC)
        combinatorial = qfi_collective_variance(probe, params).value
        tensor = qfi_collective_variance(probe, params, route='tensor').value
        self.assertAlmostEqual(combinatorial / 5.5556e-4, 1.0, places=4)
        self.assertAlmostEqual(combinatorial / qfi_fermionic_analytic(params).value, 1.0, places=8)
        self.assertAlmostEqual(tensor / combinatorial, 1.0, places=8)

    def test_tres_bosones_y_oraculo_tensorial(self):
        params = params_at(0.5, n_atoms=3)
        probe = ManyBodyProbe(3, Statistics.BOSONIC_EXCITED)
        combinatorial = qfi_collective_variance(probe, params)
        tensor = qfi_collective_variance(probe, params, route='tensor').value
        analytic = qfi_bosonic_excited_analytic(params).value
        self.assertAlmostEqual(combinatorial.value / analytic, 1.0, places=8)
        self.assertAlmostEqual(tensor / analytic, 1.0, places=8)

    def test_tres_fermiones_y_oraculo_tensorial(self):
        params = params_at(0.5, n_atoms=3)
        probe = ManyBodyProbe(3, Statistics.FERMIONIC)
        tensor = qfi_collective_variance(probe, params, route='tensor').value
        self.assertAlmostEqual(tensor / qfi_fermionic_analytic(params).value, 1.0, places=8)

    def test_coeficiente_por_modo_impreso(self):
        result = qfi_collective_variance(ManyBodyProbe(2, Statistics.FERMIONIC), params_at(0.5))
        self.assertAlmostEqual(result.metadata['printed_coefficient_ratio'], 2.0, places=12)
        self.assertFalse(result.metadata['printed_coefficient_consistent'])

    def test_dicotomia_de_intercambio(self):
        params = params_at(0.5)
        h20 = abs(local_generator(params, 6).data[2, 0]) ** 2
        values = {}
        for statistics in (Statistics.FERMIONIC, Statistics.BOSONIC_EXCITED):
            probe = ManyBodyProbe(2, statistics, mode_set=(0, 2))
            values[statistics] = qfi_collective_variance(probe, params).value
            oracle = qfi_collective_variance(probe, params, route='tensor').value
            self.assertAlmostEqual(oracle / values[statistics], 1.0, places=8)
        self.assertLess(values[Statistics.FERMIONIC], values[Statistics.BOSONIC_EXCITED])
        difference = values[Statistics.BOSONIC_EXCITED] - values[Statistics.FERMIONIC]
        self.assertAlmostEqual(difference / (16 * h20), 1.0, places=10)
        # ĥ no acopla los modos 0 y 1: sin término de intercambio
        adjacent = [
            qfi_collective_variance(ManyBodyProbe(2, statistics), params).value
            for statistics in (Statistics.FERMIONIC, Statistics.BOSONIC_EXCITED)
        ]
        self.assertAlmostEqual(adjacent[0], adjacent[1], places=15)

    def test_tonks_girardeau_igual_a_fermiones(self):
        params = params_at(0.7, n_atoms=5)
        fermions = qfi_collective_variance(ManyBodyProbe(5, Statistics.FERMIONIC), params).value
        tonks = qfi_collective_variance(ManyBodyProbe(5, Statistics.TONKS_GIRARDEAU), params).value
        self.assertEqual(fermions, tonks)

    def test_limites_de_las_rutas(self):
        params = params_at(0.5)
        with self.assertRaises(UnsupportedError):
            qfi_collective_variance(ManyBodyProbe(13), params)
        with self.assertRaises(UnsupportedError):
            qfi_collective_variance(ManyBodyProbe(5), params, route='tensor')
        with self.assertRaises(ConvergenceError):
            qfi_collective_variance(ManyBodyProbe(4), params, cutoff=4)

    def test_sonda_invalida(self):
        with self.assertRaises(InvalidArgumentError):
            ManyBodyProbe(2, Statistics.FERMIONIC, mode_set=(1, 1))
        with self.assertRaises(InvalidArgumentError):
            ManyBodyProbe(2, mode_set=(0, 1, 2))
        self.assertEqual(ManyBodyProbe(3).mode_set, (0, 1, 2))


class OracleTriangleTests(SimpleTestCase):
    def test_tres_rutas_de_una_particula(self):
        cutoff = 40
        for ratio in (0.1, 0.3, 0.5, 0.7, 0.9):
            params = ModelParams.from_ratio(ratio, omega=1.0, Omega=100.0)
            analytic = qfi_single_particle_analytic(params).value
            finite = qfi_ground_state(build_effective_hamiltonian, params, cutoff).value
            state = SqueezedFockState(0, -0.25 * math.log1p(-ratio ** 2)).materialize(cutoff)
            variance = qfi_generator_variance(state, local_generator(params, cutoff)).value
            for value in (finite, variance):
                self.assertAlmostEqual(value / analytic, 1.0, delta=0.01)

    def test_diferencias_finitas_sin_acoplamiento(self):
        provider = ground_state_provider(build_effective_hamiltonian, 20)
        result = qfi_finite_difference(provider, ModelParams(Omega=100.0))
        self.assertAlmostEqual(result.value, 0.0, places=12)
        self.assertIn('richardson_disagreement', result.metadata)
        self.assertAlmostEqual(result.metadata['step'], 1e-2)

    def test_corte_adaptativo(self):
        params = ModelParams.from_ratio(0.5, Omega=100.0)
        result = qfi_ground_state(build_effective_hamiltonian, params)
        self.assertGreaterEqual(result.metadata['cutoff'], 60)
        self.assertAlmostEqual(result.value / qfi_single_particle_analytic(params).value, 1.0, delta=0.01)


class RabiConvergenceTests(SimpleTestCase):
    def test_rabi_frente_a_la_forma_efectiva(self):
        params = ModelParams.from_ratio(0.5, omega=1.0, Omega=1000.0)
        rabi = qfi_ground_state(build_rabi_hamiltonian, params, cutoff=30).value
        analytic = qfi_single_particle_analytic(params).value
        self.assertAlmostEqual(rabi / analytic, 1.0, delta=0.02)

    def test_desviacion_decrece_con_omega_sobre_Omega(self):
        deviations = []
        for omega_over_Omega in (0.1, 0.03, 0.01):
            params = ModelParams.from_ratio(0.5, omega=1.0, Omega=1 / omega_over_Omega)
            rabi = qfi_ground_state(build_rabi_hamiltonian, params, cutoff=40).value
            analytic = qfi_single_particle_analytic(params).value
            deviations.append(abs(rabi - analytic) / analytic)
        self.assertTrue(np.all(np.diff(deviations) < 0))


class ThermalTests(SimpleTestCase):
    def test_estado_puro(self):
        params = params_at(0.5)
        rho = DensityMatrix.from_probabilities([1.0, 0, 0, 0, 0, 0])
        value = qfi_mixed_spectral(rho, local_generator(params, 6)).value
        self.assertAlmostEqual(value / qfi_single_particle_analytic(params).value, 1.0, places=12)

    def test_estado_puro_frente_a_diferencias_finitas(self):
        params = ModelParams.from_ratio(0.5, Omega=100.0)
        mixed = qfi_mixed_spectral(thermal_state(params, cutoff=40), local_generator(params, 40)).value
        finite = qfi_ground_state(build_effective_hamiltonian, params, 40).value
        self.assertAlmostEqual(mixed / finite, 1.0, delta=0.01)

    def test_suma_espectral_frente_a_forma_cerrada(self):
        values = []
        for beta_omega in (0.2, 0.5, 1, 2, 5, 50):
            params = params_at(0.5, beta=beta_omega)
            rho = thermal_state(params)
            spectral = qfi_mixed_spectral(rho, local_generator(params, rho.metadata['cutoff'])).value
            closed = qfi_thermal_closed_form(params).value
            self.assertAlmostEqual(spectral / closed, 1.0, delta=1e-6)
            values.append(closed)
        self.assertTrue(np.all(np.diff(values) < 0))
        zero_temperature = qfi_single_particle_analytic(params_at(0.5)).value
        self.assertAlmostEqual(values[-1] / zero_temperature, 1.0, delta=1e-8)

    def test_factores_de_aumento(self):
        self.assertAlmostEqual(thermal_enhancement_factor(50), 2.0, places=10)
        self.assertAlmostEqual(thermal_enhancement_factor_printed(50), 2.0, places=10)
        self.assertAlmostEqual(thermal_enhancement_factor_printed(1.0), 8.249, places=3)
        self.assertAlmostEqual(thermal_enhancement_factor(1.0), 3.2961, places=4)
        q = math.exp(-1.0)
        ratio = thermal_enhancement_factor_printed(1.0) / thermal_enhancement_factor(1.0)
        self.assertAlmostEqual(ratio, 1 / (1 - q) ** 2, places=10)
        self.assertGreater(
            qfi_thermal_closed_form(params_at(0.5, beta=0.5)).value,
            qfi_thermal_closed_form(params_at(0.5, beta=1.0)).value,
        )

    def test_densidad_no_normalizada(self):
        rho = DensityMatrix.from_probabilities([0.5, 0.2, 0.0, 0.0])
        with self.assertRaises(InvalidArgumentError):
            qfi_mixed_spectral(rho, local_generator(params_at(0.5), 4))


class SweepTimeTests(SimpleTestCase):
    def test_identidad_de_sustitucion(self):
        params = ModelParams(gamma=0.1, omega=1.0, Omega=100.0, n_atoms=4)
        k_f = 0.5 * params.k_c
        result = time_normalized_qfi(params, k_f)
        raw = qfi_fermionic_analytic(params.replace(k=k_f)).value
        self.assertAlmostEqual(result.value / raw, 1.0, places=12)
        self.assertAlmostEqual(result.time_normalized * result.metadata['sweep_time'] ** 2, result.value)

    def test_sin_acoplamiento_final(self):
        self.assertEqual(time_normalized_qfi(ModelParams(), 0.0).value, 0.0)

    def test_tiempo_externo(self):
        k_f = 0.6 * ModelParams().k_c
        slow = time_normalized_qfi(ModelParams(gamma=0.05), k_f, sweep_time=3.0)
        fast = time_normalized_qfi(ModelParams(gamma=0.1), k_f, sweep_time=3.0)
        self.assertEqual(slow.time_normalized, fast.time_normalized)


class ThresholdTests(SimpleTestCase):
    def test_numero_minimo_de_atomos(self):
        report = sql_hl_thresholds(ModelParams(gamma=0.1, omega=1.0, Omega=100.0))
        self.assertAlmostEqual(report.n_min / 4.6416e4, 1.0, places=4)
        self.assertFalse(report.exceeds_n_min)

    def test_techo_de_excitaciones(self):
        report = sql_hl_thresholds(ModelParams(omega=1.0, Omega=1000.0))
        self.assertAlmostEqual(report.n_ceiling, 10.0, places=10)
        self.assertAlmostEqual(report.k_f_ceiling_ratio, math.sqrt(1 - 1 / 1600), places=12)

    def test_margen_sql(self):
        params = ModelParams.from_ratio(0.9, gamma=0.1, omega=1.0, Omega=100.0)
        report = sql_hl_thresholds(params)
        self.assertAlmostEqual(report.sql_margin / 2.6316e-6, 1.0, places=4)
        self.assertFalse(report.beats_sql)
        self.assertFalse(report.beats_hl)

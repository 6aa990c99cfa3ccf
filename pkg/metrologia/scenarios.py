"""
Escenarios reproducibles: cada uno evalúa un barrido, valida los resultados
y escribe `<salida>/<escenario>.csv` y `<salida>/<escenario>.json`.

Precedencia de la configuración: --param > archivo JSON > valores del escenario.
"""
import copy
import hashlib
import io
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Mapping, Optional

import numpy as np
import pandas as pd
from rest_framework import serializers
from rest_framework.renderers import JSONRenderer

from . import __version__
from .choices import OutputFormat, Scenario, SweepParameter, SweepSpacing
from .conf import get_setting
from .exceptions import MetrologyError, NumericalError
from .fockcore import SqueezedFockState
from .measurement import (
    Grid1D,
    classical_fisher_information,
    mle_monte_carlo,
    pair_correlation_density,
    pair_distribution_provider,
    position_distribution_provider,
)
from .metrology import (
    ManyBodyProbe,
    Statistics,
    local_generator,
    qfi_bosonic_excited_analytic,
    qfi_fermionic_analytic,
    qfi_generator_variance,
    qfi_ground_state,
    qfi_mixed_spectral,
    qfi_single_particle_analytic,
    qfi_thermal_closed_form,
    sql_hl_thresholds,
)
from .models import (
    ModelParams,
    build_effective_hamiltonian,
    build_rabi_hamiltonian,
    mean_excitations,
    squeeze_parameter,
    thermal_state,
)
from .serializers import (
    EstimationRunSerializer,
    FisherResultSerializer,
    ParamsEchoSerializer,
    RunConfigSerializer,
    ThresholdReportSerializer,
)

logger = logging.getLogger(__name__)

FIG2_CAP = 0.99
DENSITY_DUMP_POINTS = 128
FERMIONIC_FIT_MAX_N = 100
BOSONIC_FIT_MIN_N = 100

SCENARIO_DEFAULTS = {
    Scenario.FIG2: {
        'params': {'Omega': 100.0, 'n_atoms': 2, 'k_over_kc': 0.5},
        'sweep': {'parameter': 'k_over_kc', 'start': 0.1, 'stop': 0.9, 'points': 9},
    },
    Scenario.SCALING: {
        'params': {'Omega': 100.0, 'k_over_kc': 0.5},
        'sweep': {'parameter': 'n_atoms', 'values': [2, 5, 10, 20, 50, 100, 200, 500]},
    },
    Scenario.THERMAL: {
        'params': {'Omega': 100.0, 'k_over_kc': 0.5},
        'sweep': {'parameter': 'beta_omega', 'values': [0.2, 0.5, 1, 2, 5, 50]},
    },
    Scenario.LIMITS: {
        'params': {'Omega': 100.0, 'k_over_kc': 0.9, 'gamma': 0.1},
        'sweep': None,
    },
    Scenario.TRIANGLE: {
        'params': {'Omega': 100.0},
        'sweep': {'parameter': 'k_over_kc', 'values': [0.1, 0.3, 0.5, 0.7, 0.9]},
    },
    Scenario.EFFECTIVE: {
        'params': {'k_over_kc': 0.5},
        'sweep': {'parameter': 'omega_over_Omega', 'values': [0.1, 0.03, 0.01]},
    },
    Scenario.MLE: {
        'params': {'Omega': 100.0, 'k_over_kc': 0.7},
        'sweep': None,
    },
}


SCENARIO_SWEEPS = {
    Scenario.FIG2: SweepParameter.K_OVER_KC,
    Scenario.SCALING: SweepParameter.N_ATOMS,
    Scenario.THERMAL: SweepParameter.BETA_OMEGA,
    Scenario.TRIANGLE: SweepParameter.K_OVER_KC,
    Scenario.EFFECTIVE: SweepParameter.OMEGA_OVER_OMEGA,
}


@dataclass(frozen=True)
class SweepSpec:
    parameter: str
    values: tuple
    spacing: str = SweepSpacing.LINEAR


@dataclass(frozen=True)
class RunConfig:
    """Configuración validada de una corrida"""
    scenario: str
    params: ModelParams
    sweep: Optional[SweepSpec]
    numerics: Mapping[str, Any]
    output_dir: Path
    formats: tuple
    document: Mapping[str, Any] = field(default_factory=dict)

    @property
    def seed(self):
        seed = self.numerics.get('seed')
        return get_setting('DEFAULT_SEED') if seed is None else seed

    @property
    def config_hash(self):
        canonical = json.dumps(self.document, sort_keys=True, default=str)
        return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


@dataclass
class ScenarioReport:
    table: Optional[pd.DataFrame]
    results: Dict[str, Any]
    diagnostics: Dict[str, Any] = field(default_factory=dict)
    extra_tables: Dict[str, pd.DataFrame] = field(default_factory=dict)
    distributions: list = field(default_factory=list)


def parse_assignment(assignment):
    """'numerics.seed=3' → (['numerics', 'seed'], 3)"""
    if '=' not in assignment:
        raise ValueError(f"Asignación sin '=': {assignment}")
    key, raw = assignment.split('=', 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    path = [part for part in key.strip().split('.') if part]
    if not path:
        raise ValueError(f"Clave vacía en: {assignment}")
    if len(path) == 1:
        path = ['params', path[0]]
    return path, value


def _merge(base, overlay):
    merged = copy.deepcopy(base)
    for key, value in overlay.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            if key == 'params':
                # k y k/k_c son excluyentes: la capa superior decide
                for pair in (('k', 'k_over_kc'), ('k_over_kc', 'k')):
                    if pair[0] in value and pair[1] not in value:
                        merged[key].pop(pair[1], None)
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = copy.deepcopy(value)
    return merged


def build_document(scenario, file_document=None, assignments=(), seed=None, out=None):
    """Combina las capas de configuración en un único documento sin validar"""
    document = _merge({'scenario': scenario, **SCENARIO_DEFAULTS[Scenario(scenario)]}, file_document or {})
    document['scenario'] = scenario
    for assignment in assignments:
        path, value = parse_assignment(assignment)
        overlay = value
        for key in reversed(path):
            overlay = {key: overlay}
        document = _merge(document, overlay)
    if seed is not None:
        document = _merge(document, {'numerics': {'seed': seed}})
    if out:
        document = _merge(document, {'output': {'path': str(out)}})
    return document


def _sweep_values(spec):
    if spec.get('values'):
        values = spec['values']
    elif spec['spacing'] == SweepSpacing.LOG:
        values = np.geomspace(spec['start'], spec['stop'], spec['points']).tolist()
    else:
        values = np.linspace(spec['start'], spec['stop'], spec['points']).tolist()
    if spec['parameter'] == SweepParameter.N_ATOMS:
        values = [int(round(v)) for v in values]
    return tuple(values)


def load_run_config(document):
    """Valida el documento con RunConfigSerializer y construye RunConfig"""
    serializer = RunConfigSerializer(data=document)
    serializer.is_valid(raise_exception=True)
    data = serializer.validated_data
    defaults = RunConfigSerializer().fields
    params_data = dict(data.get('params') or defaults['params'].run_validation({}))
    expected = SCENARIO_SWEEPS.get(data['scenario'])
    if expected and (not data.get('sweep') or data['sweep']['parameter'] != expected):
        raise serializers.ValidationError({'sweep': f"El escenario {data['scenario']} requiere un barrido de {expected}"})
    sweep_data = data.get('sweep')
    sweep = None
    if sweep_data:
        sweep = SweepSpec(sweep_data['parameter'], _sweep_values(sweep_data), sweep_data['spacing'])
    numerics = dict(data.get('numerics') or defaults['numerics'].run_validation({}))
    output = dict(data.get('output') or defaults['output'].run_validation({}))
    output_dir = Path(output.get('path') or get_setting('OUTPUT_DIR'))
    return RunConfig(
        scenario=data['scenario'],
        params=ModelParams(**params_data),
        sweep=sweep,
        numerics=numerics,
        output_dir=output_dir,
        formats=tuple(output['formats']),
        document={key: value for key, value in serializer.data.items() if key != 'output'},
    )


def run_sweep(values, evaluate: Callable[[Any], dict], parameter='valor', max_workers=None):
    """Evalúa los puntos en paralelo y conserva el orden del barrido"""
    def guarded(value):
        try:
            return evaluate(value)
        except MetrologyError as exc:
            raise type(exc)(f"Punto {parameter} = {value}: {exc}") from exc

    with ThreadPoolExecutor(max_workers=max_workers or get_setting('MAX_WORKERS')) as pool:
        return list(pool.map(guarded, values))


def _relative_gap(reference, value):
    if reference == 0 and value == 0:
        return 0.0
    return abs(value - reference) / max(abs(reference), abs(value))


def _log_slope(x, y):
    slope, _intercept = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


def scenario_fig2(config):
    """CFI de posición del par fermiónico frente a la QFI de N = 2"""
    base = config.params.replace(n_atoms=2)
    diagnostics = {'deviations': []}
    if config.params.n_atoms != 2:
        diagnostics['deviations'].append(f"N = {config.params.n_atoms} reemplazado por N = 2")
    ratios = []
    for ratio in config.sweep.values:
        if ratio > FIG2_CAP:
            logger.warning("k/k_c = %.6g acotado a %.2f", ratio, FIG2_CAP)
            diagnostics['deviations'].append(f"k/k_c = {ratio} acotado a {FIG2_CAP}")
            ratio = FIG2_CAP
        ratios.append(ratio)
    diagnostics['deviations'].append(f"Extremo del barrido acotado a k/k_c <= {FIG2_CAP}")
    grid_points = config.numerics.get('grid_points') or get_setting('PAIR_GRID_POINTS')

    def evaluate(ratio):
        params = base.with_ratio(ratio)
        provider = pair_distribution_provider(params, Statistics.FERMIONIC)
        if grid_points != provider.grid.n_points:
            provider = pair_distribution_provider(
                params, Statistics.FERMIONIC, grid=Grid1D.symmetric(provider.grid.half_width, grid_points)
            )
        analytic = qfi_fermionic_analytic(params).value
        cfi = classical_fisher_information(provider, params.Omega, config.numerics.get('dOmega'))
        return {
            'k_over_kc': ratio,
            'qfi_analytic': analytic,
            'cfi_position': cfi.value,
            'relative_gap': _relative_gap(analytic, cfi.value),
            'mean_excitations': mean_excitations(params.k, params.k_c).exact,
            'grid_points': provider.grid.n_points,
        }

    rows = run_sweep(ratios, evaluate, 'k/k_c')
    table = pd.DataFrame(rows)
    diagnostics['grid_points'] = grid_points
    report = ScenarioReport(
        table[['k_over_kc', 'qfi_analytic', 'cfi_position', 'relative_gap', 'mean_excitations']],
        {'max_relative_gap': float(table['relative_gap'].max())},
        diagnostics,
    )
    for ratio in config.numerics.get('density_ratios', []):
        params = base.with_ratio(ratio)
        xi = squeeze_parameter(params.k, params.k_c)
        grid = Grid1D.for_state(xi, 1, params, n_points=DENSITY_DUMP_POINTS)
        density = pair_correlation_density(ManyBodyProbe(2, Statistics.FERMIONIC, xi=xi), grid, params)
        x1, x2 = np.meshgrid(grid.points, grid.points, indexing='ij')
        report.extra_tables[f"density_k{ratio:.2f}"] = pd.DataFrame({
            'x1': x1.ravel(), 'x2': x2.ravel(), 'probability': density.probabilities.ravel(),
        })
        report.distributions.append(density)
    return report


def scenario_scaling(config):
    """QFI analítica frente a N para cada estadística y pendientes log-log"""
    statistics = config.numerics.get('statistics') or list(Statistics.values)
    columns = {
        Statistics.FERMIONIC: lambda params: qfi_fermionic_analytic(params).value,
        Statistics.BOSONIC_EXCITED: lambda params: qfi_bosonic_excited_analytic(params).value,
        # TG comparte la varianza del generador con los fermiones
        Statistics.TONKS_GIRARDEAU: lambda params: qfi_fermionic_analytic(params).value,
    }

    def evaluate(n_atoms):
        params = config.params.replace(n_atoms=n_atoms)
        row = {'n_atoms': n_atoms}
        for name in statistics:
            row[name] = columns[name](params)
        return row

    table = pd.DataFrame(run_sweep(config.sweep.values, evaluate, 'N'))
    slopes = {}
    for name in statistics:
        if name == Statistics.BOSONIC_EXCITED:
            subset = table[table['n_atoms'] >= BOSONIC_FIT_MIN_N]
        else:
            subset = table[table['n_atoms'] <= FERMIONIC_FIT_MAX_N]
        if len(subset) >= 2 and (subset[name] > 0).all():
            slopes[name] = _log_slope(subset['n_atoms'], subset[name])
    return ScenarioReport(
        table,
        {'log_log_slopes': slopes},
        {'fit_ranges': {'fermionic_max_n': FERMIONIC_FIT_MAX_N, 'bosonic_min_n': BOSONIC_FIT_MIN_N}},
    )


def scenario_thermal(config):
    """Forma cerrada y suma espectral de la QFI térmica frente a βω"""
    omega = config.params.omega

    def evaluate(beta_omega):
        params = config.params.replace(beta=beta_omega / omega)
        closed = qfi_thermal_closed_form(params)
        rho = thermal_state(params, config.numerics.get('cutoff'))
        cutoff = rho.metadata['cutoff']
        spectral = qfi_mixed_spectral(rho, local_generator(params, cutoff))
        return {
            'beta_omega': beta_omega,
            'qfi_closed_form': closed.value,
            'qfi_spectral': spectral.value,
            'relative_gap': _relative_gap(closed.value, spectral.value),
            'printed_closed_form': closed.metadata['printed_value'],
            'cutoff': cutoff,
            'populated_levels': rho.metadata['populated_levels'],
        }

    table = pd.DataFrame(run_sweep(config.sweep.values, evaluate, 'βω'))
    ordered = table.sort_values('beta_omega')
    monotone = bool(np.all(np.diff(ordered['qfi_closed_form'].to_numpy()) < 0))
    return ScenarioReport(
        table.drop(columns=['cutoff', 'populated_levels']),
        {'monotone_decreasing_in_beta': monotone, 'max_relative_gap': float(table['relative_gap'].max())},
        {'cutoffs': table['cutoff'].tolist(), 'populated_levels': table['populated_levels'].tolist()},
    )


def scenario_limits(config):
    """Márgenes frente a SQL y HL en k_f = k de los parámetros"""
    report = sql_hl_thresholds(config.params)
    return ScenarioReport(
        None,
        {
            'thresholds': ThresholdReportSerializer(report).data,
            'fisher': FisherResultSerializer(qfi_fermionic_analytic(config.params)).data,
            'params': ParamsEchoSerializer(config.params).data,
        },
    )


def scenario_triangle(config):
    """Analítica, diferencias finitas y 4·Var(ĥ) para una partícula"""
    cutoff = config.numerics.get('cutoff') or get_setting('DEFAULT_CUTOFF')

    def evaluate(ratio):
        params = config.params.replace(n_atoms=1).with_ratio(ratio)
        analytic = qfi_single_particle_analytic(params).value
        finite = qfi_ground_state(build_effective_hamiltonian, params, cutoff, config.numerics.get('dOmega')).value
        state = SqueezedFockState(0, squeeze_parameter(params.k, params.k_c)).materialize(cutoff)
        variance = qfi_generator_variance(state, local_generator(params, cutoff)).value
        values = (analytic, finite, variance)
        gap = max(_relative_gap(a, b) for a in values for b in values)
        return {
            'k_over_kc': ratio,
            'qfi_analytic': analytic,
            'qfi_finite_difference': finite,
            'qfi_generator_variance': variance,
            'max_pairwise_gap': gap,
        }

    table = pd.DataFrame(run_sweep(config.sweep.values, evaluate, 'k/k_c'))
    return ScenarioReport(table, {'max_pairwise_gap': float(table['max_pairwise_gap'].max())}, {'cutoffs': [cutoff]})


def scenario_effective(config):
    """QFI del estado fundamental de Rabi frente a la analítica efectiva"""
    cutoff = config.numerics.get('cutoff')
    ratio = config.params.ratio

    def evaluate(omega_over_Omega):
        params = config.params.replace(n_atoms=1, Omega=config.params.omega / omega_over_Omega).with_ratio(ratio)
        rabi = qfi_ground_state(build_rabi_hamiltonian, params, cutoff, config.numerics.get('dOmega'))
        analytic = qfi_single_particle_analytic(params).value
        return {
            'omega_over_Omega': omega_over_Omega,
            'qfi_rabi': rabi.value,
            'qfi_effective_analytic': analytic,
            'relative_deviation': _relative_gap(analytic, rabi.value),
            'cutoff': rabi.metadata['cutoff'],
        }

    table = pd.DataFrame(run_sweep(config.sweep.values, evaluate, 'ω/Ω'))
    ordered = table.sort_values('omega_over_Omega', ascending=False)
    monotone = bool(np.all(np.diff(ordered['relative_deviation'].to_numpy()) < 0))
    return ScenarioReport(
        table.drop(columns=['cutoff']),
        {'deviation_decreases_with_omega_over_Omega': monotone},
        {'cutoffs': table['cutoff'].tolist()},
    )


def scenario_mle(config):
    """Varianza del estimador de máxima verosimilitud frente a la cota de Cramér-Rao"""
    params = config.params.replace(n_atoms=1)
    provider = position_distribution_provider(params)
    fisher = classical_fisher_information(provider, params.Omega, config.numerics.get('dOmega'))
    run = mle_monte_carlo(
        provider,
        params.Omega,
        config.numerics['samples'],
        config.seed,
        batches=config.numerics.get('batches'),
        fisher=fisher.value,
    )
    table = pd.DataFrame({'batch': np.arange(run.estimates.size), 'estimate': run.estimates})
    return ScenarioReport(
        table,
        {'estimation': EstimationRunSerializer(run).data, 'variance_over_crb': run.empirical_variance / run.crb},
        {'grid_points': provider.grid.n_points},
        distributions=[provider(params.Omega)],
    )


SCENARIOS = {
    Scenario.FIG2: scenario_fig2,
    Scenario.SCALING: scenario_scaling,
    Scenario.THERMAL: scenario_thermal,
    Scenario.LIMITS: scenario_limits,
    Scenario.TRIANGLE: scenario_triangle,
    Scenario.EFFECTIVE: scenario_effective,
    Scenario.MLE: scenario_mle,
}


def validate_report(report):
    """Revisión final antes de escribir: valores finitos, FI no negativas, distribuciones normalizadas"""
    tables = ([report.table] if report.table is not None else []) + list(report.extra_tables.values())
    for table in tables:
        numeric = table.select_dtypes(include='number').to_numpy(dtype=float)
        if not np.all(np.isfinite(numeric)):
            raise NumericalError("La tabla contiene valores no finitos")
        for column in table.columns:
            if column.startswith(('qfi', 'cfi')) and (table[column] < 0).any():
                raise NumericalError(f"Información de Fisher negativa en la columna {column}")
    for distribution in report.distributions:
        if abs(distribution.probabilities.sum() - 1) > 1e-8 or np.any(distribution.probabilities < 0):
            raise NumericalError("Distribución no normalizada en el reporte")


def _json_safe(value):
    if isinstance(value, dict):
        return {key: _json_safe(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_json_safe(item) for item in value]
    if isinstance(value, np.ndarray):
        return _json_safe(value.tolist())
    if isinstance(value, (float, np.floating)) and not math.isfinite(value):
        return str(float(value))
    if isinstance(value, np.generic):
        return value.item()
    return value


def metadata_header(config, diagnostics):
    lines = [
        f"scenario: {config.scenario}",
        f"version: {__version__}",
        f"config_sha256: {config.config_hash}",
        f"seed: {config.seed}",
        f"cutoffs: {diagnostics.get('cutoffs', 'n/a')}",
    ]
    for deviation in diagnostics.get('deviations', []):
        lines.append(f"deviation: {deviation}")
    return ''.join(f"# {line}\n" for line in lines)


def render_csv(config, diagnostics, table):
    buffer = io.StringIO()
    buffer.write(metadata_header(config, diagnostics))
    table.to_csv(buffer, index=False, lineterminator='\n', float_format=lambda value: repr(float(value)))
    return buffer.getvalue().encode('utf-8')


def render_json(config, report):
    payload = {
        'config': config.document,
        'results': report.results,
        'diagnostics': {**report.diagnostics, 'version': __version__, 'config_sha256': config.config_hash},
    }
    return JSONRenderer().render(_json_safe(payload), renderer_context={'indent': 2}) + b'\n'


def write_report(config, report):
    """Escribe los archivos del escenario y devuelve sus rutas"""
    config.output_dir.mkdir(parents=True, exist_ok=True)
    written = []
    if OutputFormat.CSV in config.formats:
        tables = {} if report.table is None else {config.scenario: report.table}
        tables.update({f"{config.scenario}_{name}": table for name, table in report.extra_tables.items()})
        for name, table in tables.items():
            path = config.output_dir / f"{name}.csv"
            path.write_bytes(render_csv(config, report.diagnostics, table))
            written.append(path)
    if OutputFormat.JSON in config.formats:
        path = config.output_dir / f"{config.scenario}.json"
        path.write_bytes(render_json(config, report))
        written.append(path)
    return written


def run_scenario(config):
    logger.info("Escenario %s (config %s)", config.scenario, config.config_hash[:12])
    report = SCENARIOS[Scenario(config.scenario)](config)
    validate_report(report)
    return write_report(config, report)

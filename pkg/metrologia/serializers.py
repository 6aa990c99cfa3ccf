import math

from rest_framework import serializers

from .choices import OutputFormat, Scenario, SweepParameter, SweepSpacing
from .exceptions import InvalidArgumentError
from .metrology import Statistics
from .models import ModelParams


class InfiniteFloatField(serializers.FloatField):
    """Número real que además acepta y emite 'inf' (JSON estricto no admite Infinity)"""

    def to_internal_value(self, data):
        if isinstance(data, str) and data.strip().lower() in ('inf', 'infinity'):
            return math.inf
        return super().to_internal_value(data)

    def to_representation(self, value):
        if math.isinf(value):
            return 'inf' if value > 0 else '-inf'
        return super().to_representation(value)


class ModelParamsSerializer(serializers.Serializer):
    """Serializador para los parámetros físicos; acepta k o k/k_c, no ambos"""
    omega = serializers.FloatField(min_value=0, default=1.0)
    Omega = serializers.FloatField(min_value=0, default=100.0)
    mass = serializers.FloatField(min_value=0, default=1.0)
    k = serializers.FloatField(min_value=0, required=False)
    k_over_kc = serializers.FloatField(min_value=0, required=False)
    gamma = serializers.FloatField(min_value=0, max_value=1, default=0.1)
    n_atoms = serializers.IntegerField(min_value=1, default=1)
    beta = InfiniteFloatField(default=math.inf)

    def validate(self, attrs):
        if 'k' in attrs and 'k_over_kc' in attrs:
            raise serializers.ValidationError("Indique k o k_over_kc, no ambos")
        ratio = attrs.pop('k_over_kc', None)
        if ratio is not None:
            attrs['k'] = ratio * math.sqrt(attrs['Omega'] * attrs['omega'])
        try:
            params = ModelParams(**attrs)
        except InvalidArgumentError as exc:
            raise serializers.ValidationError(str(exc))
        if params.ratio >= 1:
            raise serializers.ValidationError(f"k/k_c = {params.ratio:.6g} fuera de la fase normal")
        return attrs


class ParamsEchoSerializer(serializers.Serializer):
    """Eco de ModelParams en los reportes, con k/k_c y k_c derivados"""
    omega = serializers.FloatField()
    Omega = serializers.FloatField()
    mass = serializers.FloatField()
    k = serializers.FloatField()
    k_over_kc = serializers.FloatField(source='ratio')
    k_c = serializers.FloatField()
    gamma = serializers.FloatField()
    n_atoms = serializers.IntegerField()
    beta = InfiniteFloatField()


class SweepSerializer(serializers.Serializer):
    """Barrido de un parámetro: lista explícita o (start, stop, points)"""
    parameter = serializers.ChoiceField(choices=SweepParameter.choices)
    start = serializers.FloatField(required=False)
    stop = serializers.FloatField(required=False)
    points = serializers.IntegerField(min_value=2, required=False)
    spacing = serializers.ChoiceField(choices=SweepSpacing.choices, default=SweepSpacing.LINEAR)
    values = serializers.ListField(child=serializers.FloatField(), min_length=2, required=False)

    def validate(self, attrs):
        if 'values' not in attrs:
            missing = [name for name in ('start', 'stop', 'points') if name not in attrs]
            if missing:
                raise serializers.ValidationError(f"Faltan campos del barrido: {', '.join(missing)}")
            if attrs['spacing'] == SweepSpacing.LOG and min(attrs['start'], attrs['stop']) <= 0:
                raise serializers.ValidationError("Un barrido logarítmico requiere extremos positivos")
        bounds = attrs.get('values') or [attrs['start'], attrs['stop']]
        parameter = attrs['parameter']
        if parameter == SweepParameter.K_OVER_KC and not all(0 <= v < 1 for v in bounds):
            raise serializers.ValidationError("El barrido de k/k_c debe quedar en [0, 1)")
        if parameter == SweepParameter.N_ATOMS and not all(v >= 1 for v in bounds):
            raise serializers.ValidationError("El barrido de N requiere N >= 1")
        if parameter in (SweepParameter.BETA_OMEGA, SweepParameter.OMEGA_OVER_OMEGA) and not all(v > 0 for v in bounds):
            raise serializers.ValidationError(f"El barrido de {parameter} requiere valores positivos")
        return attrs


class NumericsSerializer(serializers.Serializer):
    """Política numérica; los campos vacíos usan SOC_METROLOGY"""
    cutoff = serializers.IntegerField(min_value=2, required=False, allow_null=True)
    grid_points = serializers.IntegerField(min_value=64, required=False, allow_null=True)
    dOmega = serializers.FloatField(min_value=0, required=False, allow_null=True)
    seed = serializers.IntegerField(min_value=0, max_value=2 ** 64 - 1, required=False, allow_null=True)
    samples = serializers.IntegerField(min_value=100, default=10000)
    batches = serializers.IntegerField(min_value=2, required=False, allow_null=True)
    density_ratios = serializers.ListField(
        child=serializers.FloatField(min_value=0, max_value=0.99), default=list
    )
    statistics = serializers.ListField(
        child=serializers.ChoiceField(choices=Statistics.choices), default=list
    )


class OutputSerializer(serializers.Serializer):
    path = serializers.CharField(required=False, allow_blank=True, default='')
    formats = serializers.ListField(
        child=serializers.ChoiceField(choices=OutputFormat.choices),
        default=lambda: [OutputFormat.CSV.value, OutputFormat.JSON.value],
    )


class RunConfigSerializer(serializers.Serializer):
    """Serializador para la configuración completa de una corrida"""
    scenario = serializers.ChoiceField(choices=Scenario.choices)
    params = ModelParamsSerializer(required=False)
    sweep = SweepSerializer(required=False, allow_null=True)
    numerics = NumericsSerializer(required=False)
    output = OutputSerializer(required=False)


class FisherResultSerializer(serializers.Serializer):
    value = serializers.FloatField()
    method = serializers.CharField()
    time_normalized = serializers.FloatField(allow_null=True)
    params = ParamsEchoSerializer(allow_null=True)
    metadata = serializers.JSONField()


class EstimationRunSerializer(serializers.Serializer):
    true_Omega = serializers.FloatField()
    sample_count = serializers.IntegerField()
    empirical_variance = serializers.FloatField()
    crb = serializers.FloatField()
    fisher = serializers.FloatField()
    bias = serializers.FloatField()
    efficiency = serializers.FloatField()
    metadata = serializers.JSONField()


class ThresholdReportSerializer(serializers.Serializer):
    sql_margin = serializers.FloatField()
    beats_sql = serializers.BooleanField()
    hl_margin = serializers.FloatField()
    beats_hl = serializers.BooleanField()
    n_ceiling = serializers.FloatField()
    mean_excitations = serializers.FloatField()
    within_squeezing_ceiling = serializers.BooleanField()
    k_f_ceiling_ratio = serializers.FloatField()
    n_min = serializers.FloatField()
    exceeds_n_min = serializers.BooleanField()
    notes = serializers.ListField(child=serializers.CharField())

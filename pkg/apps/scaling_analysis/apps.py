from django.apps import AppConfig


class ScalingAnalysisConfig(AppConfig):
    name = "apps.scaling_analysis"
    verbose_name = "Scaling analysis"

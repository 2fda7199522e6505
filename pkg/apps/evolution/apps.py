from django.apps import AppConfig


class EvolutionAppConfig(AppConfig):
    name = "apps.evolution"
    verbose_name = "Evolution"

from django.apps import AppConfig


class FunctionalsConfig(AppConfig):
    name = "apps.functionals"
    verbose_name = "Functionals"

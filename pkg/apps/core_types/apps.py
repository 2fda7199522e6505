from django.apps import AppConfig


class CoreTypesConfig(AppConfig):
    name = "apps.core_types"
    verbose_name = "Core types"

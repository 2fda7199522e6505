from django.apps import AppConfig


class GroundstateConfig(AppConfig):
    name = "apps.groundstate"
    verbose_name = "Ground states"

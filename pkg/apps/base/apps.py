from django.apps import AppConfig


class BaseConfig(AppConfig):
    """Errors, columnar I/O and numeric helpers shared by the other apps"""

    name = "apps.base"
    verbose_name = "Shared plumbing"

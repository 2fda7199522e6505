import os

import django

os.environ.setdefault("DJANGO_SETTINGS_MODULE", "nlslab.settings")
django.setup()

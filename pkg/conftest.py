import os

import django

os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'soc_core.settings')
django.setup()

"""
robinlab URL Configuration
The admin is the only web surface; it browses the experiment run ledger.
"""

from django.contrib import admin
from django.urls import path

admin.site.site_header = 'robinlab run ledger'
admin.site.site_title = 'robinlab'

urlpatterns = [
    path('admin/', admin.site.urls),
]

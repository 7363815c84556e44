from django.contrib import admin
from django.utils.html import format_html
from .models import ExperimentRun, GenericityTrial


class GenericityTrialInline(admin.TabularInline):
    model = GenericityTrial
    extra = 0
    fields = ('index', 'critical_count', 'min_abs_eigenvalue', 'nondegenerate', 'error')
    readonly_fields = fields
    can_delete = False


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    """
    Admin for the experiment run ledger
    """
    list_display = (
        'id',
        'experiment',
        'seed',
        'nodes',
        'status_badge',
        'exit_code',
        'short_hash',
        'started_at',
    )
    list_filter = ('experiment', 'status')
    search_fields = ('config_hash', 'output_dir', 'message')
    ordering = ('-started_at',)
    readonly_fields = ('config_hash', 'started_at', 'finished_at')
    inlines = [GenericityTrialInline]

    fieldsets = (
        ('Run', {
            'fields': ('experiment', 'seed', 'nodes', 'config_hash'),
            'classes': ('wide',)
        }),
        ('Outcome', {
            'fields': ('status', 'exit_code', 'message', 'output_dir'),
            'classes': ('wide',)
        }),
        ('Payload', {
            'fields': ('config', 'summary'),
            'classes': ('collapse',)
        }),
        ('Timestamps', {
            'fields': ('started_at', 'finished_at'),
        }),
    )

    def status_badge(self, obj):
        colors = {
            'succeeded': '#10B981',
            'breached': '#F59E0B',
            'failed': '#EF4444',
            'running': '#6B7280',
        }
        return format_html(
            '<span style="color: {}; font-weight: bold;">{}</span>',
            colors.get(obj.status, '#6B7280'),
            obj.get_status_display(),
        )
    status_badge.short_description = 'Status'

    def short_hash(self, obj):
        return obj.config_hash[:12]
    short_hash.short_description = 'Config'


@admin.register(GenericityTrial)
class GenericityTrialAdmin(admin.ModelAdmin):
    list_display = ('run', 'index', 'critical_count', 'min_abs_eigenvalue', 'nondegenerate_badge')
    list_filter = ('nondegenerate',)
    ordering = ('run', 'index')

    def nondegenerate_badge(self, obj):
        if obj.error:
            return format_html('<span style="color: #6B7280; font-weight: bold;">✗ Error</span>')
        if obj.nondegenerate:
            return format_html('<span style="color: #10B981; font-weight: bold;">✓ Nondegenerate</span>')
        return format_html('<span style="color: #EF4444; font-weight: bold;">✗ Degenerate</span>')
    nondegenerate_badge.short_description = 'Outcome'

#!/usr/bin/env python
"""robinlab command-line entry point (experiments run as `manage.py robin ...`)."""
import os
import sys


def main():
    """Dispatch to a Django management command."""
    os.environ.setdefault('DJANGO_SETTINGS_MODULE', 'config.settings')
    try:
        from django.core.management import execute_from_command_line
    except ImportError as exc:
        raise ImportError(
            "Couldn't import Django. Install the packages in requirements.txt "
            "into the active environment first."
        ) from exc
    execute_from_command_line(sys.argv)


if __name__ == '__main__':
    main()

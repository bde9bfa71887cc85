import logging
from typing import Optional

from rich.console import Console
from rich.logging import RichHandler

from median_adversary.config import settings

# Diagnostics go to stderr; stdout carries records and reports
stderr_console = Console(stderr=True)


def configure_logging(level: Optional[str] = None) -> None:
    """Configure logging once for the CLI process"""
    logging.basicConfig(
        level=getattr(logging, (level or settings.log_level).upper()),
        format="%(message)s" if stderr_console.is_terminal else settings.log_format,
        handlers=[RichHandler(console=stderr_console, show_path=False, rich_tracebacks=True)],
        force=True,
    )
    logging.getLogger(__name__).debug(f"{settings.app_name} {settings.app_version} logging configured")

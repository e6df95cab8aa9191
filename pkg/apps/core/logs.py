"""Bootstrap de logging a partir de config.settings.LOGGING."""

import logging.config

_configured = False


def configure_logging(force: bool = False) -> None:
    """Aplica o dictConfig do settings uma única vez por processo."""
    global _configured
    if _configured and not force:
        return

    from config import settings

    logging.config.dictConfig(settings.LOGGING)
    _configured = True

# ==================================================================================================
#                                   Logging
# ==================================================================================================
#
# Tiny logging bootstrap used by the CLI entry point. Library modules only ever
# call `logging.getLogger(__name__)`; handlers are configured here, once.

import logging

LOG_FORMAT: str = "%(asctime)s | %(levelname)s | %(name)s | %(message)s"


def configure_logging(level: int | str = logging.INFO) -> None:
    """
    Configure global logging once.

    Parameters
    ----------
    level
        Logging level, numeric or by name ("DEBUG", "INFO", ...).

    Usage example
    -------------
        configure_logging("DEBUG")
        logging.getLogger(__name__).debug("iteration 1")
    """
    if isinstance(level, str):
        resolved = logging.getLevelName(level.upper())
        if not isinstance(resolved, int):
            raise ValueError(f"Unknown logging level: {level!r}")
        level = resolved

    # Without force=True repeated calls keep the first handler set, which is
    # what embedding environments (pytest, notebooks) expect.
    logging.basicConfig(level=level, format=LOG_FORMAT)

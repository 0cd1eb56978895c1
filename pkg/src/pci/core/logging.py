"""Structured logging for PCI (structlog).

Configures structlog once at process start so every module can do::

    import structlog
    logger = structlog.get_logger()
    logger.info("series_converged", kind="inv_r12", shells=7, value=0.4215)

Output is JSON by default (``PCI_LOG_JSON=true``) for machine consumption,
with a human-friendly console renderer available for development
(``PCI_LOG_JSON=false``).

Numerical code hands numpy scalars, small arrays and the occasional NaN
to the logger.  A sanitising processor turns those into plain JSON values
before rendering.
"""

from __future__ import annotations

import logging
import math
import sys
from collections.abc import Mapping, MutableMapping
from typing import Any

import numpy as np
import structlog

# Arrays longer than this are summarised instead of dumped.
_MAX_LOGGED_ELEMENTS = 16


def _plain(value: Any) -> Any:
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if math.isnan(value) else ("inf" if value > 0 else "-inf")
    if isinstance(value, complex):
        return {"re": _plain(value.real), "im": _plain(value.imag)}
    if isinstance(value, np.ndarray):
        if value.size > _MAX_LOGGED_ELEMENTS:
            return {"shape": list(value.shape), "dtype": str(value.dtype)}
        return [_plain(v) for v in value.ravel().tolist()]
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _numeric_sanitiser(
    _logger: Any,
    _method: str,
    event_dict: MutableMapping[str, Any],
) -> Mapping[str, Any]:
    """Make every numeric log value JSON-safe.

    - numpy scalars become Python numbers.
    - Non-finite floats become the strings ``"nan"``, ``"inf"``, ``"-inf"``.
    - Arrays up to ``_MAX_LOGGED_ELEMENTS`` become lists; larger ones are
      replaced by their shape and dtype.
    """
    for k, v in event_dict.items():
        event_dict[k] = _plain(v)
    return event_dict


def configure_logging(*, level: str = "INFO", json_output: bool = True) -> None:
    """Set up structlog + stdlib integration.

    Parameters
    ----------
    level:
        Root log level (``DEBUG``, ``INFO``, ``WARNING``, etc.).
    json_output:
        If *True*, render as JSON lines.  If *False*, use coloured console
        output (dev mode).
    """
    log_level = getattr(logging, level.upper(), logging.INFO)

    shared_processors: list[structlog.types.Processor] = [
        structlog.contextvars.merge_contextvars,
        structlog.stdlib.add_log_level,
        structlog.stdlib.add_logger_name,
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.UnicodeDecoder(),
        # requests and MC chunks run on worker threads
        structlog.processors.CallsiteParameterAdder({structlog.processors.CallsiteParameter.THREAD_NAME}),
        _numeric_sanitiser,
    ]

    if json_output:
        renderer: structlog.types.Processor = structlog.processors.JSONRenderer()
    else:
        renderer = structlog.dev.ConsoleRenderer(colors=sys.stderr.isatty())

    structlog.configure(
        processors=[
            *shared_processors,
            structlog.stdlib.ProcessorFormatter.wrap_for_formatter,
        ],
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=True,
    )

    formatter = structlog.stdlib.ProcessorFormatter(
        processors=[
            structlog.stdlib.ProcessorFormatter.remove_processors_meta,
            renderer,
        ],
        foreign_pre_chain=shared_processors,
    )

    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(formatter)

    root = logging.getLogger()
    root.handlers.clear()
    root.addHandler(handler)
    root.setLevel(log_level)

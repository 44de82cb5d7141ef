import sys

from loguru import logger

from app.core.config import settings


def setup_logging(level: str | None = None, serialize: bool | None = None) -> None:
    """
    Route all toolkit logs to stderr; stdout is reserved for JSON reports.
    """
    logger.remove()
    logger.add(
        sys.stderr,
        level=(level or settings.LOG_LEVEL).upper(),
        serialize=settings.LOG_SERIALIZE if serialize is None else serialize,
        format="<green>{time:HH:mm:ss.SSS}</green> | <level>{level: <8}</level> | "
        "<cyan>{name}</cyan>:<cyan>{function}</cyan> - <level>{message}</level>",
    )

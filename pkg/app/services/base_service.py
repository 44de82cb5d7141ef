from app.core.config import Settings
from app.core.config import settings as default_settings


class BaseService:
    """
    Base service class holding the run configuration
    """

    def __init__(self, settings: Settings | None = None, threads: int | None = None):
        self.settings = settings or default_settings
        self.threads = self.settings.THREADS if threads is None else threads

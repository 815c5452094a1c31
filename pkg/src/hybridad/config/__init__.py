from hybridad.config.settings import Settings, settings

__all__ = ["Settings", "settings"]

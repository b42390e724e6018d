from .server import ModelService, ServerConfig, create_app

__version__ = "0.1.0"

__all__ = ["ModelService", "ServerConfig", "create_app"]

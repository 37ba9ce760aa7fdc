__all__ = [
    "addressing",
    "cli",
    "config",
    "construction",
    "dimension",
    "export",
    "geometry",
    "logging_config",
    "models",
    "replicas",
    "schemas",
    "verify",
]

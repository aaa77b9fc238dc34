from .export import ExportSpec, WeightsUnavailableError, export

__all__ = ["ExportSpec", "WeightsUnavailableError", "export"]
__version__ = "0.1.0"

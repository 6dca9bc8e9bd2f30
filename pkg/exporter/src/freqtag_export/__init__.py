"""Checkpoint exporter: PyTorch state dicts -> freqtag graph + tensor files."""

from .export import ExportError, ExportSummary, export, verify_roundtrip
from .templates import ExportMapping, GraphModule, get_template, template_ids

__version__ = "0.1.0"

__all__ = ["ExportError", "ExportMapping", "ExportSummary", "GraphModule",
           "export", "get_template", "template_ids", "verify_roundtrip"]

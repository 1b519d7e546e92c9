"""Model files, expression parsing, reports and the ``varboot`` command."""

from .model import ModelSpec, load_model, read_model
from .parser import Indexed, parse_expression
from .report import Report

__all__ = ["Indexed", "ModelSpec", "Report", "load_model", "parse_expression", "read_model"]

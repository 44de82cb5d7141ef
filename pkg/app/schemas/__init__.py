# ruff: noqa: F401 I001
from .report import Certification, RunReport, render_json

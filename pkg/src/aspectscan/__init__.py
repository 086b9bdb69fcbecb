"""Static aspect analysis of Python procedures over symbolic control-flow graphs."""

from .engine import AnalysisResult, analyze, merge_default, order_traversals
from .errors import AspectScanError
from .frontend import parse_procedure
from .report import render_report
from .sable import parse_sable, parse_source_annotation
from .scfg import build_scfg

__version__ = "0.1.0"

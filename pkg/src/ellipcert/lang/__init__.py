"""Controller language: parsing, printing, annotation and interpretation."""

from .facts import FALSE, TRUE, FactSyntaxError, parse_fact, parse_facts, render_fact, render_facts
from .interp import InterpError, interpret
from .parser import Diagnostic, ParseError, parse
from .printer import emit_annotated, format_affine, pretty_print, read_annotated
from .syntax import Affine, Assign, Guard, Input, Output, Program, Skip

__all__ = [
    "Affine", "Assign", "Diagnostic", "FALSE", "FactSyntaxError", "Guard", "Input",
    "InterpError", "Output", "ParseError", "Program", "Skip", "TRUE", "emit_annotated",
    "format_affine", "interpret", "parse", "parse_fact", "parse_facts", "pretty_print",
    "read_annotated", "render_fact", "render_facts",
]

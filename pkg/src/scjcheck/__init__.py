"""Executable semantics and explicit-state checker for SCJ Level 2 style
mission programs: process-algebra kernel, monitor model, framework model,
application DSL, checker, and animation server."""

__version__ = "0.1.0"

"""Simulator for proactive (agent, core, hybrid) and reactive (checkpoint,
restart) fault tolerance of parallel reduction jobs."""

__version__ = "0.1.0"

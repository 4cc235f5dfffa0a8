"""Agent-based urban mobility simulation with language-model-assisted population and schedules."""

__version__ = "0.1.0"

"""choiceval: multiple-choice LLM benchmarking harness and server."""

__version__ = "0.1.0"

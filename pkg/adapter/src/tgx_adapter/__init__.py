"""Reference model adapter: serves a torch graph-GRU over the line protocol."""

__version__ = "0.1.0"

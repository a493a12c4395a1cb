"""mgl: learning closed monotone operators through graph distances."""

__version__ = "0.1.0"

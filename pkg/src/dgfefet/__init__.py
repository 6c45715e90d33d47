"""Double-gate FeFET neuromorphic hardware simulator."""

__version__ = "0.1.0"

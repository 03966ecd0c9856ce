"""Principal eigenvalues of fractional Laplacians with large divergence-free drift."""

from __future__ import annotations

__version__ = "0.1.0"

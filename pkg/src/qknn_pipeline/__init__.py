"""Simulate and benchmark a quantum k-NN + quantum cosine classifier pipeline."""

from importlib.metadata import PackageNotFoundError, version

try:
    __version__ = version("artifact")
except PackageNotFoundError:
    __version__ = "0.1.0"

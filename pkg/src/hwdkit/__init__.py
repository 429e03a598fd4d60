"""hwdkit: handwriting-aware distances and a verification harness for
styled text-image generation."""

__version__ = "0.1.0"

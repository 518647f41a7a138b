"""cpad: controllable image denoising steered by camera parameters."""

__version__ = "0.1.0"

"""Few-step class-conditional generation in a spherical latent space."""

__version__ = "0.1.0"

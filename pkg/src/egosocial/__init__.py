"""Camera-wearer pose-sequence generation with latent diffusion and social conditioning."""

__version__ = "0.1.0"

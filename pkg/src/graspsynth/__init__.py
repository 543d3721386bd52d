"""Full-body grasp pose synthesis by latent search over frozen decoders."""

__version__ = "0.1.0"

"""pac-sim: piecewise affine curvature statics for tendon-driven soft arms."""

__version__ = "0.1.0"

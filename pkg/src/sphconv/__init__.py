"""Compactly supported covariance models on the sphere from step-kernel convolution."""

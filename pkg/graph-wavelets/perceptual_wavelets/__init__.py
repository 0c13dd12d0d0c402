"""Perceptual graph wavelet analysis and restoration of color images."""


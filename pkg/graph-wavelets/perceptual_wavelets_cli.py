"""Thin wrapper to execute the packaged graph wavelet CLI."""

from __future__ import annotations

from perceptual_wavelets.cli import main


if __name__ == "__main__":
    raise SystemExit(main())

"""Downloader for the emoji-prediction dataset splits."""

__version__ = "0.1.0"

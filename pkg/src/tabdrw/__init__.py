"""Frequency-domain watermarking for mixed-type tabular data."""

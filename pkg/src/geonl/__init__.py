"""Affinely-rigid bodies, Born-Infeld fields and teleparallel frames."""

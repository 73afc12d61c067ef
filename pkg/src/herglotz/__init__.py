"""Herglotz representations and boundary measure recovery."""

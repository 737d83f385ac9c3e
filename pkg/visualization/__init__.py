"""Visualization modules for session traces and the attack matrix."""

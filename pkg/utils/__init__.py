"""Utility modules for message encoding, validation and scenario files."""

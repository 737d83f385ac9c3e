"""Core modules for the TLS downgrade attack lab."""

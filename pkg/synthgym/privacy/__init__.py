"""Disclosure risk assessment."""

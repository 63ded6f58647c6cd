"""Shared utilities for Steamflex."""

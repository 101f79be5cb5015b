"""Constants, errors and logging setup."""

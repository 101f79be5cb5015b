"""Three-stage validation of synthetic panels."""

"""Schema, panels, pre-processing, configuration and the pipeline."""

"""Evidential multi-modal fusion with supervised contrastive features."""
__version__ = "0.1.0"

"""Learned fault-diagnosis-capability metric for FL-oriented test selection and generation."""
__version__ = "0.1.0"

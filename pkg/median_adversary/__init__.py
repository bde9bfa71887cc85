"""Adversarial lower-bound harness for metric 1-median query complexity"""

__version__ = "0.1.0"

"""Scenario-driven verification front end."""

from .constants import ConstantsLedger, predicted_constants

__all__ = ["ConstantsLedger", "predicted_constants"]

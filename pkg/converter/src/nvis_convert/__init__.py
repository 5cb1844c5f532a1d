"""Keras-to-NVIS checkpoint converter with logit-parity verification."""

from .convert import ConversionError, convert, convert_keras_model
from .verify import VerificationError, verify

__all__ = ["ConversionError", "convert", "convert_keras_model", "VerificationError", "verify"]

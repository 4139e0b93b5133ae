"""tsfm-bridge: inference sidecar speaking the shared forecasting wire protocol."""

from .app import create_app
from .models import ModelSlot, register_loader

__version__ = "0.1.0"

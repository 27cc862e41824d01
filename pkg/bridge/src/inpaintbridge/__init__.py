"""HTTP server for the inpainting wire protocol used by hullpaint."""

from .app import create_app
from .codec import decode_mask, decode_rgb, encode_rgb
from .config import MODEL_SELECTORS, BridgeConfig
from .models import InpaintModel, ReferenceInpaintModel, TextInpaintModel, load_model

__all__ = [
    "BridgeConfig",
    "InpaintModel",
    "MODEL_SELECTORS",
    "ReferenceInpaintModel",
    "TextInpaintModel",
    "create_app",
    "decode_mask",
    "decode_rgb",
    "encode_rgb",
    "load_model",
]

"""Inpainting model adapters behind one call signature.

The real adapters wrap pipelines from the `diffusers` package and import it
lazily, so the server module stays importable (and the tests run with an
injected fake) on machines without the model stack.
"""

from __future__ import annotations

from typing import Protocol

import numpy as np

from .config import BridgeConfig


class InpaintModel(Protocol):
    """Anything that can fill the masked region of an RGB image."""

    def inpaint(
        self,
        image: np.ndarray,
        mask: np.ndarray,
        *,
        prompt: str | None,
        reference: np.ndarray | None,
        strength: float,
        steps: int,
        seed: int,
    ) -> np.ndarray: ...


def _mask_to_pil(mask: np.ndarray):
    from PIL import Image

    return Image.fromarray(np.where(mask, 255, 0).astype(np.uint8), mode="L")


class TextInpaintModel:
    """Text-guided diffusion inpainting."""

    checkpoint = "stabilityai/stable-diffusion-2-inpainting"

    def __init__(self, config: BridgeConfig):
        try:
            import torch
            from diffusers import StableDiffusionInpaintPipeline
        except ImportError as exc:  # keep the server usable with a fake model
            raise RuntimeError(
                "the text-inpaint model needs the 'torch' and 'diffusers' packages "
                "(pip install 'inpaintbridge[models]')"
            ) from exc
        self._torch = torch
        self.device = config.device
        self.pipe = StableDiffusionInpaintPipeline.from_pretrained(self.checkpoint)
        self.pipe = self.pipe.to(config.device)

    def inpaint(self, image, mask, *, prompt, reference, strength, steps, seed):
        from PIL import Image

        generator = self._torch.Generator(self.device).manual_seed(seed)
        out = self.pipe(
            prompt=prompt or "",
            image=Image.fromarray(image),
            mask_image=_mask_to_pil(mask),
            strength=strength,
            num_inference_steps=max(steps, 1),
            generator=generator,
        ).images[0]
        return np.asarray(out.convert("RGB"), dtype=np.uint8)


class ReferenceInpaintModel:
    """Exemplar-guided inpainting: the masked region is filled to resemble a
    reference image instead of a text prompt."""

    checkpoint = "Fantasy-Studio/Paint-by-Example"

    def __init__(self, config: BridgeConfig):
        try:
            import torch
            from diffusers import PaintByExamplePipeline
        except ImportError as exc:
            raise RuntimeError(
                "the reference-inpaint model needs the 'torch' and 'diffusers' "
                "packages (pip install 'inpaintbridge[models]')"
            ) from exc
        self._torch = torch
        self.device = config.device
        self.pipe = PaintByExamplePipeline.from_pretrained(self.checkpoint)
        self.pipe = self.pipe.to(config.device)

    def inpaint(self, image, mask, *, prompt, reference, strength, steps, seed):
        from PIL import Image

        generator = self._torch.Generator(self.device).manual_seed(seed)
        out = self.pipe(
            image=Image.fromarray(image),
            mask_image=_mask_to_pil(mask),
            example_image=Image.fromarray(reference),
            num_inference_steps=max(steps, 1),
            generator=generator,
        ).images[0]
        return np.asarray(out.convert("RGB"), dtype=np.uint8)


_REGISTRY = {
    "text-inpaint": TextInpaintModel,
    "reference-inpaint": ReferenceInpaintModel,
}


def load_model(config: BridgeConfig) -> InpaintModel:
    """Instantiate the one model the selector names (loaded exactly once)."""
    return _REGISTRY[config.model](config)

"""Server configuration."""

from __future__ import annotations

from dataclasses import dataclass

MODEL_SELECTORS = ("text-inpaint", "reference-inpaint")


@dataclass(frozen=True)
class BridgeConfig:
    """Which model to serve and how to run it.

    Strength maps to a denoising step count as round(strength * base_steps);
    an explicit "steps" field on a request overrides the mapping. Zero steps
    means no denoising at all, so the input image is returned unchanged.
    """

    model: str = "text-inpaint"
    device: str = "cpu"
    max_concurrency: int = 1
    base_steps: int = 50

    def __post_init__(self):
        if self.model not in MODEL_SELECTORS:
            raise ValueError(f"model must be one of {MODEL_SELECTORS}, got '{self.model}'")
        if self.max_concurrency < 1:
            raise ValueError("max_concurrency must be at least 1")
        if self.base_steps < 1:
            raise ValueError("base_steps must be at least 1")

    def steps_for(self, strength: float) -> int:
        return round(strength * self.base_steps)

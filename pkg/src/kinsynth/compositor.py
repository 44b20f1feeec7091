"""Low-quality synthetic face generation by facial-component exchange.

Components selected by the control vector are swapped between the two parent
faces: the male-based composite receives the female's component wherever the
bit is 1, and the female-based composite receives the male's component at the
same bits. Swapping the profile bit exchanges the full canvases first; the
four inner components are then re-applied according to their own bits, so a
pixel always comes from the parent its owning box designates.

Pasted patches are color-corrected toward the receiving face: the patch is
divided by a Gaussian blur of itself and multiplied by a Gaussian blur of the
receiver's region, which transfers low-frequency color while keeping texture.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ComponentLayout, ControlVector, component_ownership

# sigma for the correction blur, as a fraction of the shorter patch side.
DEFAULT_SIGMA_FRACTION = 0.08
DEFAULT_EPSILON = 1e-4


class CompositorError(ValueError):
    pass


@dataclass(frozen=True)
class BlurSpec:
    """Gaussian blur parameters for color correction.

    Kernel radius is ceil(3*sigma); epsilon stabilizes the division.
    """

    sigma: float
    epsilon: float = DEFAULT_EPSILON

    def __post_init__(self):
        if self.sigma <= 0:
            raise CompositorError(f"sigma must be positive, got {self.sigma}")
        if self.epsilon <= 0:
            raise CompositorError(f"epsilon must be positive, got {self.epsilon}")

    @property
    def radius(self) -> int:
        return math.ceil(3.0 * self.sigma)

    @classmethod
    def for_patch(cls, height: int, width: int, epsilon: float = DEFAULT_EPSILON) -> "BlurSpec":
        return cls(sigma=DEFAULT_SIGMA_FRACTION * min(height, width), epsilon=epsilon)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D Gaussian kernel over [-radius, radius], normalized to sum 1."""
    radius = math.ceil(3.0 * sigma)
    ks = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(ks**2) / (2.0 * sigma**2))
    return kernel / kernel.sum()


def gaussian_blur(image: np.ndarray, spec: BlurSpec) -> np.ndarray:
    """Separable Gaussian blur with edge replication."""
    img = np.asarray(image, dtype=np.float64)
    if img.ndim == 2:
        img = img[..., None]
        squeeze = True
    else:
        squeeze = False
    kernel = gaussian_kernel(spec.sigma)
    r = spec.radius
    padded = np.pad(img, ((r, r), (0, 0), (0, 0)), mode="edge")
    out = np.zeros_like(img)
    for k, wk in enumerate(kernel):
        out += wk * padded[k : k + img.shape[0]]
    padded = np.pad(out, ((0, 0), (r, r), (0, 0)), mode="edge")
    out = np.zeros_like(img)
    for k, wk in enumerate(kernel):
        out += wk * padded[:, k : k + img.shape[1]]
    return out[..., 0] if squeeze else out


def color_correct(patch: np.ndarray, target_region: np.ndarray, spec: BlurSpec) -> np.ndarray:
    """patch / (blur(patch) + eps) * blur(target), clipped to [0, 1]."""
    patch = np.asarray(patch, dtype=np.float64)
    target = np.asarray(target_region, dtype=np.float64)
    if patch.shape != target.shape:
        raise CompositorError(
            f"patch shape {patch.shape} does not match target shape {target.shape}"
        )
    out = patch / (gaussian_blur(patch, spec) + spec.epsilon) * gaussian_blur(target, spec)
    return np.clip(out, 0.0, 1.0)


def ownership_map(layout: ComponentLayout, v: ControlVector) -> np.ndarray:
    """Per-pixel parent index (0 male, 1 female) for the composite that
    follows v: each pixel takes the bit of its owning component."""
    bits = np.array([0] + list(v.bits), dtype=np.int8)
    return bits[component_ownership(layout)]


def _check_face(face: np.ndarray, canvas_size: int, name: str) -> np.ndarray:
    face = np.asarray(face, dtype=np.float64)
    if face.shape != (canvas_size, canvas_size, 3):
        raise CompositorError(
            f"{name} has shape {face.shape}, expected ({canvas_size}, {canvas_size}, 3)"
        )
    return face


def exchange_components(
    face_m: np.ndarray,
    face_f: np.ndarray,
    layout: ComponentLayout,
    v: ControlVector,
    spec: BlurSpec | None = None,
    color_correct_enabled: bool = True,
) -> tuple[np.ndarray, np.ndarray]:
    """Swap facial components between two aligned parents.

    Returns (synthetic_m, synthetic_f). synthetic_m keeps the male's pixels
    except inside boxes whose bit is 1 (female pixels, corrected toward the
    male face); synthetic_f mirrors this with the roles reversed, so the two
    composites carry complementary component sets and a second application
    with the same vector restores the original pair.

    `spec` overrides the per-patch default blur (sigma = 0.08 * shorter side).
    """
    s = layout.canvas_size
    face_m = _check_face(face_m, s, "male face")
    face_f = _check_face(face_f, s, "female face")

    def build(receiver: np.ndarray, donor: np.ndarray, bits: ControlVector) -> np.ndarray:
        # Profile first: bit 5 swaps the whole canvas, then boxes 1..4 are
        # re-applied from whichever parent their bit designates.
        if bits[5] == 1:
            if color_correct_enabled:
                blur = spec or BlurSpec.for_patch(s, s)
                out = color_correct(donor, receiver, blur)
            else:
                out = donor.copy()
        else:
            out = receiver.copy()
        for i in range(1, 5):
            rows, cols = layout.box_slices(i)
            if bits[i] == 1:
                patch = donor[rows, cols]
                if color_correct_enabled:
                    top, left, h, w = layout.boxes[i]
                    blur = spec or BlurSpec.for_patch(h, w)
                    patch = color_correct(patch, receiver[rows, cols], blur)
                out[rows, cols] = patch
            else:
                out[rows, cols] = receiver[rows, cols]
        return out

    return build(face_m, face_f, v), build(face_f, face_m, v)


def composite_from_ownership(
    face_m: np.ndarray, face_f: np.ndarray, layout: ComponentLayout, v: ControlVector
) -> np.ndarray:
    """Pixel-select composite per ownership_map (no color correction)."""
    own = ownership_map(layout, v)
    return np.where(own[..., None] == 1, face_f, face_m)

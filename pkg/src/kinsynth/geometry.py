"""Face alignment and facial-component geometry.

Canvas conventions (all module constants below are fractions of the square
canvas side S):

==================  ===========  ==================
component           center x, y  size w x h (S=256)
==================  ===========  ==================
1 left eye & brow   0.35, 0.38   80 x 96
2 right eye & brow  0.65, 0.38   80 x 96
3 nose              0.50, 0.55   80 x 80
4 mouth             0.50, 0.71   64 x 128
5 profile           full canvas  256 x 256
==================  ===========  ==================

Eye centers are anchored at (0.35*S, 0.40*S) and (0.65*S, 0.40*S).
"left"/"right" are in image coordinates (viewer's left / right).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

COMPONENT_NAMES = {
    1: "left_eye_brow",
    2: "right_eye_brow",
    3: "nose",
    4: "mouth",
    5: "profile",
}

# (width, height) at the reference canvas of 256.
REFERENCE_CANVAS = 256
REFERENCE_SIZES = {1: (80, 96), 2: (80, 96), 3: (80, 80), 4: (64, 128)}

# Box centers as (x, y) canvas fractions.
BOX_CENTERS = {1: (0.35, 0.38), 2: (0.65, 0.38), 3: (0.50, 0.55), 4: (0.50, 0.71)}

LEFT_EYE_ANCHOR = (0.35, 0.40)
RIGHT_EYE_ANCHOR = (0.65, 0.40)

# Boxes snap to this grid so latent feature maps (encoder stride 4) tile the
# canvas exactly.
BOX_GRID = 4


class GeometryError(ValueError):
    """Invalid geometric input (malformed vector, degenerate landmarks, bad canvas)."""


@dataclass(frozen=True)
class ControlVector:
    """5-bit inheritance selector.

    Bit i (1-based: left eye&brow, right eye&brow, nose, mouth, profile) is 0
    when component i inherits from the male parent and 1 for the female parent.
    """

    bits: tuple[int, int, int, int, int]

    def __post_init__(self):
        if len(self.bits) != 5 or any(b not in (0, 1) for b in self.bits):
            raise GeometryError(f"control vector needs 5 bits in {{0,1}}, got {self.bits!r}")

    def __getitem__(self, component: int) -> int:
        """Bit for a 1-based component index."""
        if component not in COMPONENT_NAMES:
            raise GeometryError(f"component index must be 1..5, got {component}")
        return self.bits[component - 1]

    @property
    def text(self) -> str:
        return "".join(str(b) for b in self.bits)

    def __str__(self) -> str:
        return self.text


def parse_control_vector(text: str) -> ControlVector:
    """Parse a 5-character '0'/'1' string into a ControlVector."""
    if not isinstance(text, str) or len(text) != 5:
        raise GeometryError(f"control vector must be a 5-character string, got {text!r}")
    for pos, ch in enumerate(text):
        if ch not in "01":
            raise GeometryError(f"control vector has invalid character {ch!r} at position {pos}")
    return ControlVector(tuple(int(ch) for ch in text))


def all_control_vectors() -> list[ControlVector]:
    """All 32 valid control vectors in lexicographic order."""
    return [parse_control_vector(format(k, "05b")) for k in range(32)]


def invert(v: ControlVector) -> ControlVector:
    """Flip every bit; invert(invert(v)) == v."""
    return ControlVector(tuple(1 - b for b in v.bits))


@dataclass(frozen=True)
class LandmarkSet:
    """68 facial landmarks as (x, y) points in source-image pixel space."""

    points: np.ndarray

    # iBUG-68 index ranges for the two eyes (image-left eye first).
    LEFT_EYE = slice(36, 42)
    RIGHT_EYE = slice(42, 48)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=np.float64)
        if pts.shape != (68, 2):
            raise GeometryError(f"landmark set must be 68 (x, y) points, got shape {pts.shape}")
        if not np.all(np.isfinite(pts)):
            raise GeometryError("landmark coordinates must be finite")
        object.__setattr__(self, "points", pts)

    def eye_centers(self) -> tuple[np.ndarray, np.ndarray]:
        """(left, right) eye centers, each the mean of its 6 contour points."""
        return self.points[self.LEFT_EYE].mean(axis=0), self.points[self.RIGHT_EYE].mean(axis=0)


@dataclass(frozen=True)
class ComponentLayout:
    """Per-component bounding boxes on the aligned canvas.

    boxes maps component index -> (top, left, height, width) in pixels.
    """

    boxes: dict[int, tuple[int, int, int, int]]
    canvas_size: int

    def box_slices(self, component: int) -> tuple[slice, slice]:
        top, left, h, w = self.boxes[component]
        return slice(top, top + h), slice(left, left + w)


def component_ownership(layout: "ComponentLayout") -> np.ndarray:
    """Per-pixel owning component (1..5) under the paste-order rule: the
    profile owns everything, then boxes 1..4 claim their area in order, later
    boxes overwriting earlier ones where they overlap."""
    own = np.full((layout.canvas_size, layout.canvas_size), 5, dtype=np.int8)
    for i in range(1, 5):
        rows, cols = layout.box_slices(i)
        own[rows, cols] = i
    return own


def _snap(value: float) -> int:
    return BOX_GRID * round(value / BOX_GRID)


def component_boxes(canvas_size: int) -> ComponentLayout:
    """Scale the reference boxes to a canvas of side `canvas_size`.

    Sizes scale linearly with S and snap to multiples of 4; positions snap to
    the same grid so stride-4 encoders map boxes onto whole latent cells.
    """
    s = canvas_size
    if s < 32 or s % 4 != 0:
        raise GeometryError(f"canvas size must be >= 32 and divisible by 4, got {s}")
    scale = s / REFERENCE_CANVAS
    boxes: dict[int, tuple[int, int, int, int]] = {}
    for i, (w_ref, h_ref) in REFERENCE_SIZES.items():
        w = max(BOX_GRID, _snap(w_ref * scale))
        h = max(BOX_GRID, _snap(h_ref * scale))
        cx, cy = BOX_CENTERS[i]
        top = _snap(cy * s - h / 2)
        left = _snap(cx * s - w / 2)
        if top < 0 or left < 0 or top + h >= s or left + w >= s:
            raise GeometryError(f"canvas size {s} cannot hold component box {i}")
        boxes[i] = (top, left, h, w)
    boxes[5] = (0, 0, s, s)
    return ComponentLayout(boxes=boxes, canvas_size=s)


def _solve_similarity(src: np.ndarray, dst: np.ndarray) -> np.ndarray:
    """Similarity transform (rotation, uniform scale, translation) mapping two
    src points onto two dst points. Returns a 2x3 matrix for row vectors
    [x, y, 1]."""
    p = src[:, 0] + 1j * src[:, 1]
    q = dst[:, 0] + 1j * dst[:, 1]
    denom = p[1] - p[0]
    if abs(denom) < 1e-9:
        raise GeometryError("eye centers are coincident; cannot align")
    a = (q[1] - q[0]) / denom
    b = q[0] - a * p[0]
    return np.array(
        [[a.real, -a.imag, b.real], [a.imag, a.real, b.imag]], dtype=np.float64
    )


def _bilinear_sample(image: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Sample image at float coords with bilinear interpolation, edge clamped."""
    h, w = image.shape[:2]
    xs = np.clip(xs, 0.0, w - 1.0)
    ys = np.clip(ys, 0.0, h - 1.0)
    x0 = np.floor(xs).astype(np.intp)
    y0 = np.floor(ys).astype(np.intp)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (xs - x0)[..., None]
    fy = (ys - y0)[..., None]
    top = image[y0, x0] * (1 - fx) + image[y0, x1] * fx
    bot = image[y1, x0] * (1 - fx) + image[y1, x1] * fx
    return top * (1 - fy) + bot * fy


def align_face(image: np.ndarray, landmarks: LandmarkSet, out_size: int) -> np.ndarray:
    """Warp a face image so its eye centers land on the canonical anchors.

    The transform is the exact similarity determined by the two eye-center
    correspondences; the output canvas is resampled bilinearly with edge
    clamping and clipped to [0, 1].
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise GeometryError(f"expected an HxWx3 image, got shape {img.shape}")
    left, right = landmarks.eye_centers()
    dst = np.array(
        [
            [LEFT_EYE_ANCHOR[0] * out_size, LEFT_EYE_ANCHOR[1] * out_size],
            [RIGHT_EYE_ANCHOR[0] * out_size, RIGHT_EYE_ANCHOR[1] * out_size],
        ]
    )
    m = _solve_similarity(np.stack([left, right]), dst)
    # Invert the 2x3 affine to pull output pixels from source coords.
    a = np.array([[m[0, 0], m[0, 1]], [m[1, 0], m[1, 1]]])
    t = m[:, 2]
    a_inv = np.linalg.inv(a)
    ys_out, xs_out = np.mgrid[0:out_size, 0:out_size].astype(np.float64)
    coords = np.stack([xs_out, ys_out], axis=-1) - t
    src = coords @ a_inv.T
    out = _bilinear_sample(img, src[..., 0], src[..., 1])
    return np.clip(out, 0.0, 1.0)


def similarity_transform(landmarks: LandmarkSet, out_size: int) -> np.ndarray:
    """The 2x3 alignment matrix used by align_face (exposed for inspection)."""
    left, right = landmarks.eye_centers()
    dst = np.array(
        [
            [LEFT_EYE_ANCHOR[0] * out_size, LEFT_EYE_ANCHOR[1] * out_size],
            [RIGHT_EYE_ANCHOR[0] * out_size, RIGHT_EYE_ANCHOR[1] * out_size],
        ]
    )
    return _solve_similarity(np.stack([left, right]), dst)

"""Procedural toy faces for desk-scale training and verification.

Each face is a deterministic raster of a parametric cartoon head whose
component regions coincide with the canonical component boxes, so inheritance
of a component is checkable from pixel statistics alone.

Parameter ranges (sampled by random_toy_spec):

====================  =========================================
skin_color            HSV h in [0,1), s in [0.25,0.60], v in [0.55,0.90]
iris_color_left/right HSV h in [0,1), s in [0.70,1.00], v in [0.50,0.95]
brow_thickness        1.0 .. 3.0 px at the 64-px reference canvas
nose_shape_param      0.0 .. 1.0 (base half-width of the nose wedge)
mouth_color           HSV h in [0,1), s in [0.60,1.00], v in [0.40,0.90]
====================  =========================================

Age renders as wrinkle-line count (A/B/C/D -> 0/1/3/6) plus skin
desaturation (0 / 0.12 / 0.25 / 0.40); gender renders as a brow-thickness
offset (+2 px for M) and a wider jaw (+14% lower-ellipse width for M).
"""

from __future__ import annotations

import colorsys
from dataclasses import dataclass

import numpy as np

from .geometry import (
    ComponentLayout,
    LandmarkSet,
    LEFT_EYE_ANCHOR,
    RIGHT_EYE_ANCHOR,
    component_boxes,
    component_ownership,
)
from .labels import AGE_STAGES, AttributeLabel, GENDERS

WRINKLE_COUNT = {"A": 0, "B": 1, "C": 3, "D": 6}
DESATURATION = {"A": 0.0, "B": 0.12, "C": 0.25, "D": 0.40}
MALE_BROW_OFFSET = 2.0
MALE_JAW_WIDEN = 0.14

# (y, x0, x1) wrinkle segments as canvas fractions. Ordered so the first k
# render stage k's count; all segments avoid boxes 1-4, keeping age cues in
# the profile region.
WRINKLE_SEGMENTS = (
    (0.165, 0.35, 0.65),
    (0.680, 0.22, 0.34),
    (0.680, 0.66, 0.78),
    (0.145, 0.37, 0.63),
    (0.760, 0.24, 0.35),
    (0.760, 0.65, 0.76),
)

BACKGROUND = np.array([0.12, 0.14, 0.16])
BROW_COLOR = np.array([0.16, 0.11, 0.08])


@dataclass(frozen=True)
class ToyFaceSpec:
    skin_color: tuple[float, float, float]
    iris_color_left: tuple[float, float, float]
    iris_color_right: tuple[float, float, float]
    brow_thickness: float
    nose_shape_param: float
    mouth_color: tuple[float, float, float]
    age_stage: str
    gender: str

    def __post_init__(self):
        for name in ("skin_color", "iris_color_left", "iris_color_right", "mouth_color"):
            c = getattr(self, name)
            if len(c) != 3 or any(not (0.0 <= x <= 1.0) for x in c):
                raise ValueError(f"{name} must be an RGB triple in [0,1], got {c!r}")
        if not (1.0 <= self.brow_thickness <= 3.0):
            raise ValueError(f"brow_thickness outside [1,3]: {self.brow_thickness}")
        if not (0.0 <= self.nose_shape_param <= 1.0):
            raise ValueError(f"nose_shape_param outside [0,1]: {self.nose_shape_param}")
        AttributeLabel(self.age_stage, self.gender)  # validates both

    @property
    def label(self) -> AttributeLabel:
        return AttributeLabel(self.age_stage, self.gender)


def _hsv(rng: np.random.Generator, s_lo: float, s_hi: float, v_lo: float, v_hi: float):
    h = rng.uniform(0.0, 1.0)
    s = rng.uniform(s_lo, s_hi)
    v = rng.uniform(v_lo, v_hi)
    return tuple(colorsys.hsv_to_rgb(h, s, v))


def random_toy_spec(
    rng: np.random.Generator, age_stage: str | None = None, gender: str | None = None
) -> ToyFaceSpec:
    """Sample a face spec; age/gender are sampled uniformly unless given."""
    return ToyFaceSpec(
        skin_color=_hsv(rng, 0.25, 0.60, 0.55, 0.90),
        iris_color_left=_hsv(rng, 0.70, 1.00, 0.50, 0.95),
        iris_color_right=_hsv(rng, 0.70, 1.00, 0.50, 0.95),
        brow_thickness=float(rng.uniform(1.0, 3.0)),
        nose_shape_param=float(rng.uniform(0.0, 1.0)),
        mouth_color=_hsv(rng, 0.60, 1.00, 0.40, 0.90),
        age_stage=age_stage if age_stage is not None else str(rng.choice(AGE_STAGES)),
        gender=gender if gender is not None else str(rng.choice(GENDERS)),
    )


def _ellipse_mask(xx, yy, cx, cy, rx, ry):
    return ((xx - cx) / rx) ** 2 + ((yy - cy) / ry) ** 2 <= 1.0


def _desaturate(color: np.ndarray, amount: float) -> np.ndarray:
    gray = float(np.mean(color))
    return color + (gray - color) * amount


def generate_toy_face(
    spec: ToyFaceSpec, size: int
) -> tuple[np.ndarray, LandmarkSet, AttributeLabel]:
    """Render a toy face plus a consistent synthetic 68-landmark set.

    The rendered eye centers sit exactly on the canonical alignment anchors,
    so the landmark eye centers match them too.
    """
    s = size
    layout = component_boxes(s)
    yy, xx = np.mgrid[0:s, 0:s].astype(np.float64) + 0.5

    face = np.empty((s, s, 3), dtype=np.float64)
    face[:] = BACKGROUND

    skin = _desaturate(np.asarray(spec.skin_color, dtype=np.float64), DESATURATION[spec.age_stage])
    male = spec.gender == "M"

    # Head: upper ellipse plus a gender-widened lower (jaw) ellipse.
    cx, cy = 0.5 * s, 0.55 * s
    ax_up, ay = 0.40 * s, 0.42 * s
    ax_low = ax_up * (0.80 + (MALE_JAW_WIDEN if male else 0.0))
    head = np.where(
        yy <= cy,
        _ellipse_mask(xx, yy, cx, cy, ax_up, ay),
        _ellipse_mask(xx, yy, cx, cy, ax_low, ay),
    )
    face[head] = skin

    # Wrinkles: fixed segments, count by age stage.
    t = max(1, round(s / 64))
    for y_frac, x0, x1 in WRINKLE_SEGMENTS[: WRINKLE_COUNT[spec.age_stage]]:
        y = int(round(y_frac * s))
        seg = head[y : y + t, int(x0 * s) : int(x1 * s)]
        face[y : y + t, int(x0 * s) : int(x1 * s)][seg] = skin * 0.45

    # Eyes and brows inside their boxes; iris centers on the alignment anchors.
    brow_t = spec.brow_thickness * s / 64 + (MALE_BROW_OFFSET * s / 64 if male else 0.0)
    for anchor, iris_color in (
        (LEFT_EYE_ANCHOR, spec.iris_color_left),
        (RIGHT_EYE_ANCHOR, spec.iris_color_right),
    ):
        ex, ey = anchor[0] * s, anchor[1] * s
        sclera = _ellipse_mask(xx, yy, ex, ey, 0.075 * s, 0.038 * s)
        face[sclera] = (0.93, 0.93, 0.92)
        iris = _ellipse_mask(xx, yy, ex, ey, 0.034 * s, 0.034 * s)
        face[iris] = iris_color
        pupil = _ellipse_mask(xx, yy, ex, ey, 0.012 * s, 0.012 * s)
        face[pupil] = (0.02, 0.02, 0.02)
        by = 0.33 * s
        brow = (np.abs(yy - by) <= brow_t / 2) & (np.abs(xx - ex) <= 0.085 * s)
        face[brow] = BROW_COLOR

    # Nose: a wedge whose base width follows nose_shape_param, plus nostrils.
    # Centered on the (grid-snapped) nose box so it never leaks into the eye
    # boxes at small canvases.
    top3, left3, h3, w3 = layout.boxes[3]
    nx = left3 + w3 / 2
    apex_y = top3 + 0.12 * h3
    base_y = top3 + 0.78 * h3
    half_w = (0.15 + 0.27 * spec.nose_shape_param) * w3
    rel = np.clip((yy - apex_y) / (base_y - apex_y), 0.0, None)
    wedge = (rel <= 1.0) & (np.abs(xx - nx) <= half_w * rel)
    face[wedge] = skin * 0.72
    for dx in (-0.45, 0.45):
        nostril = _ellipse_mask(xx, yy, nx + dx * half_w, base_y, 0.016 * s, 0.010 * s)
        face[nostril] = skin * 0.35

    # Mouth: lips ellipse in the upper part of the tall mouth box.
    top4, left4, h4, w4 = layout.boxes[4]
    mx, my = left4 + w4 / 2, top4 + 0.35 * h4
    lips = _ellipse_mask(xx, yy, mx, my, 0.44 * w4, 0.14 * h4)
    face[lips] = spec.mouth_color
    line = (np.abs(yy - my) <= max(1.0, s / 128) / 2) & (np.abs(xx - mx) <= 0.40 * w4)
    face[line] = np.asarray(spec.mouth_color) * 0.5

    points = _toy_landmarks(spec, s, cx, cy, ax_up, ax_low, ay, my)
    return np.clip(face, 0.0, 1.0), LandmarkSet(points), spec.label


def _toy_landmarks(spec, s, cx, cy, ax_up, ax_low, ay, mouth_y):
    pts = np.zeros((68, 2), dtype=np.float64)
    # 0-16 jaw: lower arc, left temple to right temple.
    ts = np.linspace(np.pi, 2 * np.pi, 17)
    pts[0:17, 0] = cx + ax_low * np.cos(ts + np.pi / 2)
    pts[0:17, 1] = cy + ay * np.sin(ts + np.pi / 2)
    lex, ley = LEFT_EYE_ANCHOR[0] * s, LEFT_EYE_ANCHOR[1] * s
    rex, rey = RIGHT_EYE_ANCHOR[0] * s, RIGHT_EYE_ANCHOR[1] * s
    # 17-26 brows.
    pts[17:22, 0] = np.linspace(lex - 0.085 * s, lex + 0.085 * s, 5)
    pts[17:22, 1] = 0.33 * s
    pts[22:27, 0] = np.linspace(rex - 0.085 * s, rex + 0.085 * s, 5)
    pts[22:27, 1] = 0.33 * s
    # 27-35 nose bridge and base.
    pts[27:31, 0] = cx
    pts[27:31, 1] = np.linspace(0.42 * s, 0.60 * s, 4)
    pts[31:36, 0] = np.linspace(cx - 0.06 * s, cx + 0.06 * s, 5)
    pts[31:36, 1] = 0.62 * s
    # 36-47 eye contours: regular hexagons, so the mean is the exact center.
    for base, (ex, ey) in ((36, (lex, ley)), (42, (rex, rey))):
        ang = np.arange(6) * np.pi / 3
        pts[base : base + 6, 0] = ex + 0.05 * s * np.cos(ang)
        pts[base : base + 6, 1] = ey + 0.03 * s * np.sin(ang)
    # 48-67 mouth: outer 12 + inner 8 ellipse samples.
    ang = np.linspace(0, 2 * np.pi, 12, endpoint=False)
    pts[48:60, 0] = cx + 0.11 * s * np.cos(ang)
    pts[48:60, 1] = mouth_y + 0.035 * s * np.sin(ang)
    ang = np.linspace(0, 2 * np.pi, 8, endpoint=False)
    pts[60:68, 0] = cx + 0.07 * s * np.cos(ang)
    pts[60:68, 1] = mouth_y + 0.02 * s * np.sin(ang)
    return pts


def toy_component_oracle(face: np.ndarray, layout: ComponentLayout) -> dict[int, np.ndarray]:
    """Per-component descriptors: (mean R, mean G, mean B, edge density).

    Descriptors are computed over the pixels each component owns under the
    compositor's paste-order rule (overlapping box areas belong to the later
    box; the profile gets everything outside boxes 1-4), so a composite built
    by component exchange carries exactly one parent's pixels per region.
    """
    face = np.asarray(face, dtype=np.float64)
    gray = face.mean(axis=2)
    grad = np.zeros_like(gray)
    grad[:, 1:] += np.abs(np.diff(gray, axis=1))
    grad[1:, :] += np.abs(np.diff(gray, axis=0))

    owner = component_ownership(layout)
    descriptors: dict[int, np.ndarray] = {}
    for i in range(1, 6):
        region = owner == i
        descriptors[i] = np.concatenate(
            [face[region].mean(axis=0), [grad[region].mean()]]
        )
    return descriptors


def attribute_parent(
    child_descriptor: np.ndarray,
    male_descriptor: np.ndarray,
    female_descriptor: np.ndarray,
    ambiguity_ratio: float = 1.1,
) -> str:
    """Attribute a component to the nearer parent descriptor in L2.

    Returns 'M', 'F', or 'ambiguous' when the two distances are within the
    ambiguity ratio of each other.
    """
    dm = float(np.linalg.norm(child_descriptor - male_descriptor))
    df = float(np.linalg.norm(child_descriptor - female_descriptor))
    lo, hi = sorted([dm, df])
    if lo == 0.0 and hi == 0.0:
        return "ambiguous"
    if lo > 0 and hi / lo < ambiguity_ratio:
        return "ambiguous"
    return "M" if dm < df else "F"

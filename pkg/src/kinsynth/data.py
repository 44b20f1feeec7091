"""Dataset manifests, train/test splitting, and training-pair sampling.

A manifest is a JSON file {"entries": [...]} where each entry carries
image_path, gender ("M"/"F"), age_years and/or age_stage, and an optional
landmarks_path pointing to {"points": [[x, y], ...]} with 68 points.
Relative paths resolve against the manifest's directory.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
from PIL import Image

from .geometry import ControlVector, LandmarkSet, align_face, parse_control_vector
from .labels import AttributeLabel, age_to_stage
from .toy import generate_toy_face, random_toy_spec

TRAIN_FRACTION = 0.9


class DataError(ValueError):
    pass


def load_image(path: str | Path) -> np.ndarray:
    """PNG/JPEG -> HxWx3 float64 array in [0, 1]."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("RGB"), dtype=np.float64) / 255.0
    return arr


def save_image(face: np.ndarray, path: str | Path):
    arr = (np.clip(face, 0.0, 1.0) * 255.0).round().astype(np.uint8)
    Image.fromarray(arr).save(path)


def load_landmarks(path: str | Path) -> LandmarkSet:
    with open(path) as fh:
        payload = json.load(fh)
    if "points" not in payload:
        raise DataError(f"landmark file {path} lacks a 'points' field")
    return LandmarkSet(np.asarray(payload["points"], dtype=np.float64))


@dataclass(frozen=True)
class ManifestEntry:
    image_path: Path
    gender: str
    age_stage: str
    age_years: int | None = None
    landmarks_path: Path | None = None

    @property
    def label(self) -> AttributeLabel:
        return AttributeLabel(self.age_stage, self.gender)


@dataclass
class DatasetManifest:
    entries: list[ManifestEntry]

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        path = Path(path)
        with open(path) as fh:
            payload = json.load(fh)
        raw = payload.get("entries")
        if not isinstance(raw, list) or not raw:
            raise DataError(f"manifest {path} has no entries")
        entries = []
        for k, item in enumerate(raw):
            where = f"manifest entry {k}"
            gender = item.get("gender")
            if gender not in ("M", "F"):
                raise DataError(f"{where}: gender must be 'M' or 'F', got {gender!r}")
            if "age_stage" in item:
                stage = item["age_stage"]
            elif "age_years" in item:
                stage = age_to_stage(int(item["age_years"]))
            else:
                raise DataError(f"{where}: needs age_stage or age_years")
            image_path = (path.parent / item["image_path"]).resolve()
            if not image_path.exists():
                raise DataError(f"{where}: image {image_path} does not exist")
            lm_path = None
            if item.get("landmarks_path"):
                lm_path = (path.parent / item["landmarks_path"]).resolve()
                if not lm_path.exists():
                    raise DataError(f"{where}: landmarks {lm_path} do not exist")
            entries.append(
                ManifestEntry(
                    image_path=image_path,
                    gender=gender,
                    age_stage=stage,
                    age_years=item.get("age_years"),
                    landmarks_path=lm_path,
                )
            )
        return cls(entries)


def split_entries(entries: Sequence[ManifestEntry]) -> tuple[list[ManifestEntry], list[ManifestEntry]]:
    """Deterministic 90/10 train/test split by hash of the image path."""
    train, test = [], []
    for e in entries:
        digest = hashlib.sha256(str(e.image_path.name).encode()).hexdigest()
        bucket = int(digest, 16) % 10
        (train if bucket < TRAIN_FRACTION * 10 else test).append(e)
    return train, test


@dataclass
class Subject:
    """One face ready for training: aligned image plus its label."""

    face: np.ndarray
    label: AttributeLabel
    name: str = ""


@dataclass
class FacePool:
    """Aligned faces grouped by gender."""

    males: list[Subject] = field(default_factory=list)
    females: list[Subject] = field(default_factory=list)

    @property
    def subjects(self) -> list[Subject]:
        return self.males + self.females

    def require_both_genders(self):
        if not self.males or not self.females:
            raise DataError("pool needs at least one male and one female subject")


def pool_from_manifest(manifest: DatasetManifest, canvas_size: int) -> FacePool:
    """Load, align (when landmarks are given) and group manifest faces.

    Entries without landmarks must already be aligned at canvas_size.
    """
    males, females = [], []
    for e in manifest.entries:
        img = load_image(e.image_path)
        if e.landmarks_path is not None:
            face = align_face(img, load_landmarks(e.landmarks_path), canvas_size)
        elif img.shape[:2] == (canvas_size, canvas_size):
            face = img
        else:
            raise DataError(
                f"{e.image_path} is {img.shape[:2]} and has no landmarks; "
                f"expected pre-aligned {canvas_size}x{canvas_size}"
            )
        subject = Subject(face=face, label=e.label, name=e.image_path.name)
        (males if e.gender == "M" else females).append(subject)
    return FacePool(males=males, females=females)


def toy_pool(subjects: int, canvas_size: int, seed: int) -> FacePool:
    """Procedural pool with alternating genders and cycling age stages."""
    if subjects < 2:
        raise DataError("toy pool needs at least 2 subjects")
    rng = np.random.default_rng(seed)
    males, females = [], []
    stages = "ABCD"
    for k in range(subjects):
        gender = "M" if k % 2 == 0 else "F"
        spec = random_toy_spec(rng, age_stage=stages[(k // 2) % 4], gender=gender)
        face, _, label = generate_toy_face(spec, canvas_size)
        subject = Subject(face=face, label=label, name=f"toy-{k:05d}")
        (males if gender == "M" else females).append(subject)
    return FacePool(males=males, females=females)


def split_pool(pool: FacePool) -> tuple[FacePool, FacePool]:
    """90/10 split by hash of subject name, preserving both genders."""
    def bucket(s: Subject) -> bool:
        digest = hashlib.sha256(s.name.encode()).hexdigest()
        return int(digest, 16) % 10 < TRAIN_FRACTION * 10

    train = FacePool(
        males=[s for s in pool.males if bucket(s)],
        females=[s for s in pool.females if bucket(s)],
    )
    test = FacePool(
        males=[s for s in pool.males if not bucket(s)],
        females=[s for s in pool.females if not bucket(s)],
    )
    return train, test


@dataclass(frozen=True)
class TrainingPair:
    """One sampled training input: a male face, a female face, a control
    vector, and the two attribute labels."""

    face_m: np.ndarray
    face_f: np.ndarray
    v: ControlVector
    label_m: AttributeLabel
    label_f: AttributeLabel


def make_pairs(pool: FacePool, seed: int, count: int | None = None) -> Iterator[TrainingPair]:
    """Sample (male, female, vector) uniformly with replacement.

    Deterministic for a given seed; yields forever when count is None.
    """
    rng = np.random.default_rng(seed)
    produced = 0
    while count is None or produced < count:
        m = pool.males[int(rng.integers(len(pool.males)))]
        f = pool.females[int(rng.integers(len(pool.females)))]
        v = parse_control_vector(format(int(rng.integers(32)), "05b"))
        yield TrainingPair(
            face_m=m.face, face_f=f.face, v=v, label_m=m.label, label_f=f.label
        )
        produced += 1

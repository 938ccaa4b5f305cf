"""Color and geometric augmentations for H&E-stained images.

Three color modes: brightness only, brightness + hue rotation, and
brightness + H&E stain perturbation in optical-density space.  Geometric
variation comes from the 8 dihedral transforms, applied jointly to image and
label.  ``augment_dataset`` materializes augmented copies on disk with a
manifest that records every drawn parameter, so a run is fully reproducible
from (inputs, config, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from skimage.color import hsv2rgb, rgb2hsv

from . import tensorio
from .errors import IoFailure
from .tta import ALL_ELEMENTS, D4Element, transform_image

# Ruifrok-Johnston H&E optical-density unit vectors (rows: hematoxylin,
# eosin, residual = normalized cross product).
_H = np.array([0.650, 0.704, 0.286])
_E = np.array([0.072, 0.990, 0.105])
_R = np.cross(_H / np.linalg.norm(_H), _E / np.linalg.norm(_E))
STAIN_MATRIX = np.stack([
    _H / np.linalg.norm(_H),
    _E / np.linalg.norm(_E),
    _R / np.linalg.norm(_R),
])
_STAIN_INV = np.linalg.inv(STAIN_MATRIX)


@dataclass
class ColorAugConfig:
    """Sampling ranges for the color augmentations.

    Ranges may be degenerate points (e.g. ``(1.0, 1.0)``) to pin a parameter.
    """

    mode: str = "brightness_he"  # brightness | brightness_hue | brightness_he
    brightness_range: tuple = (0.7, 1.3)
    hue_range_deg: tuple = (-30.0, 30.0)
    stain_range: tuple = (0.7, 1.3)       # per stain channel, H and E
    geometric: bool = True                # draw a random dihedral transform
    seed: int | None = None

    def __post_init__(self):
        if self.mode not in ("brightness", "brightness_hue", "brightness_he"):
            raise ValueError(f"unknown mode {self.mode!r}")


def brightness_aug(img: np.ndarray, factor: float) -> np.ndarray:
    """Multiplicative brightness change, clamped to [0, 1]."""
    if factor < 0:
        raise ValueError("brightness factor must be non-negative")
    return np.clip(img * factor, 0.0, 1.0)


def hue_aug(img: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate hue by the given angle; saturation and value untouched."""
    hsv = rgb2hsv(img)
    hsv[..., 0] = (hsv[..., 0] + degrees / 360.0) % 1.0
    return np.clip(hsv2rgb(hsv), 0.0, 1.0)


def _to_od(img):
    return -np.log10((img * 255.0 + 1.0) / 256.0)


def _from_od(od):
    return np.clip((256.0 * 10.0 ** (-od) - 1.0) / 255.0, 0.0, 1.0)


def he_stain_aug(img: np.ndarray, factors) -> np.ndarray:
    """Scale hematoxylin and eosin concentrations in optical-density space.

    The image is deconvolved against the fixed Ruifrok-Johnston basis, the H
    and E concentration channels multiplied by the two factors, and the
    result reconstructed.  factors (1, 1) is an identity up to the 8-bit
    quantization of the OD transform.
    """
    fh, fe = factors
    if fh < 0 or fe < 0:
        raise ValueError("stain factors must be non-negative")
    conc = _to_od(img) @ _STAIN_INV
    conc[..., 0] *= fh
    conc[..., 1] *= fe
    return _from_od(conc @ STAIN_MATRIX)


def apply_color(img: np.ndarray, mode: str, brightness: float,
                hue_deg: float, stain_factors) -> np.ndarray:
    """Apply one drawn parameter set in the fixed order stain/hue -> brightness."""
    out = img
    if mode == "brightness_he":
        out = he_stain_aug(out, stain_factors)
    elif mode == "brightness_hue":
        out = hue_aug(out, hue_deg)
    return brightness_aug(out, brightness)


def _uniform(rng, lo_hi):
    lo, hi = lo_hi
    return float(lo) if lo == hi else float(rng.uniform(lo, hi))


def augment_dataset(in_dir, out_dir, cfg: ColorAugConfig,
                    copies_per_image: int) -> dict:
    """Write augmented copies of every image in ``in_dir`` to ``out_dir``.

    Images are ``<stem>.npy`` float32 H x W x 3 in [0, 1]; an optional label
    pair ``<stem>.labels.npy`` + ``<stem>.labels.classes.json`` is transformed
    geometrically alongside.  All random parameters are drawn from a single
    seeded stream, in sorted-stem order, before any image is processed.
    Returns the manifest (also written to ``out_dir/manifest.json``).
    """
    in_dir = Path(in_dir)
    out_dir = Path(out_dir)
    if not in_dir.is_dir() or not out_dir.is_dir():
        raise IoFailure(f"{in_dir} and {out_dir} must be existing directories")
    stems = sorted(
        p.stem for p in in_dir.glob("*.npy") if not p.stem.endswith(".labels")
    )
    rng = np.random.default_rng(cfg.seed)
    entries = []
    for stem in stems:
        for i in range(copies_per_image):
            d4 = int(rng.integers(len(ALL_ELEMENTS))) if cfg.geometric else 0
            entries.append({
                "stem": stem,
                "copy": i,
                "d4_rot": ALL_ELEMENTS[d4].rot,
                "d4_flip": ALL_ELEMENTS[d4].flip,
                "brightness": _uniform(rng, cfg.brightness_range),
                "hue_deg": (_uniform(rng, cfg.hue_range_deg)
                            if cfg.mode == "brightness_hue" else 0.0),
                "stain_factors": ([_uniform(rng, cfg.stain_range),
                                   _uniform(rng, cfg.stain_range)]
                                  if cfg.mode == "brightness_he" else [1.0, 1.0]),
            })

    for e in entries:
        img = tensorio.read_array(in_dir / f"{e['stem']}.npy").astype(np.float64)
        g = D4Element(e["d4_rot"], e["d4_flip"])
        out = apply_color(img, cfg.mode, e["brightness"], e["hue_deg"],
                          e["stain_factors"])
        out = transform_image(out, g)
        out_name = f"{e['stem']}.aug{e['copy']}.npy"
        tensorio.write_array(out_dir / out_name, out.astype(np.float32))
        e["image"] = out_name

        lab_path = in_dir / f"{e['stem']}.labels.npy"
        if lab_path.exists():
            lab = tensorio.read_array(lab_path)
            classes = tensorio.read_class_assignment(
                in_dir / f"{e['stem']}.labels.classes.json"
            )
            lab_out = transform_image(lab, g)
            lab_name = f"{e['stem']}.aug{e['copy']}.labels.npy"
            tensorio.write_array(out_dir / lab_name, lab_out)
            tensorio.write_class_assignment(
                out_dir / f"{e['stem']}.aug{e['copy']}.labels.classes.json", classes
            )
            e["labels"] = lab_name

    manifest = {
        "mode": cfg.mode,
        "seed": cfg.seed,
        "copies_per_image": copies_per_image,
        "entries": entries,
    }
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as f:
        json.dump(manifest, f, indent=2, sort_keys=True)
        f.write("\n")
    return manifest

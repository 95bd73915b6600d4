"""
Synthetic mirror-symmetry datasets.

Every generator draws a perfectly symmetric object and then breaks its
left-right symmetry until :func:`symmetry_score` lands on the target of the
requested level (1.0, 0.8, 0.6, 0.4, 0.2 for levels 0..4).  The score is
checked on every image that leaves a generator, so a label always means
what the score says.

The mirror axis is vertical unless stated otherwise.
"""

import csv
import logging
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
from scipy import ndimage

from .errors import GenerationError, ParameterError, UndefinedScoreError
from .ingest import LabeledDataset, read_pnm, write_pnm

log = logging.getLogger(__name__)

LEVEL_TARGETS = (1.0, 0.8, 0.6, 0.4, 0.2)
TOLERANCE = 0.05
MAX_ATTEMPTS = 1000

BINARY_THRESHOLD = 0.5
GRAY_THRESHOLD = 0.1

SQUARE = "square"
TRIANGLE = "triangle"
PARTED = "parted-square"
SOMEPARTED = "someparted-square"
HUMAN = "human-like"
RGB = "rgb-image"
FAMILIES = (SQUARE, TRIANGLE, PARTED, SOMEPARTED, HUMAN, RGB)

MANIFEST = "manifest.csv"
MANIFEST_HEADER = ("filename", "label", "split", "measured_symmetry")
SPEC_FILE = "dataset.cfg"


def level_indices(levels):
    """Symmetry levels used by a dataset with ``levels`` classes."""
    if levels == 5:
        return (0, 1, 2, 3, 4)
    if levels == 2:
        return (0, 4)
    raise ParameterError("levels must be 2 or 5", "levels")


def _check_level(level):
    if level not in range(len(LEVEL_TARGETS)):
        raise ParameterError(f"level must lie in 0..{len(LEVEL_TARGETS) - 1}", "level")
    return LEVEL_TARGETS[level]


# ------------------------------------------------------------------ scoring


def luminance(image):
    image = np.asarray(image, dtype=np.float64)
    if image.ndim == 3:
        if image.shape[2] != 3:
            raise ParameterError("colour images need 3 planes", "image")
        return image.mean(axis=2)
    if image.ndim != 2:
        raise ParameterError("image must be 2-D or H x W x 3", "image")
    return image


def _is_binary(img):
    return bool(np.all((img == 0.0) | (img == 1.0)))


def symmetry_score(image, axis="vertical", mask=None):
    """Fraction of the object (union its mirror image) that matches its mirror.

    Binary images use a difference threshold of 0.5, anything else 0.1; RGB
    images are scored on their luminance.  Without ``mask`` the object is
    every pixel above the threshold.  With ``mask`` (a boolean object mask,
    e.g. to exclude a coloured background) pixels where only one of a pixel
    and its mirror is in the mask also count as mismatches.
    """
    img = luminance(image)
    if img.size == 0:
        raise ParameterError("empty image", "image")
    if axis == "horizontal":
        img = img.T
        mask = None if mask is None else np.asarray(mask).T
    elif axis != "vertical":
        raise ParameterError(f"unknown axis {axis!r}", "axis")
    thr = BINARY_THRESHOLD if _is_binary(img) else GRAY_THRESHOLD
    mirror = img[:, ::-1]
    if mask is None:
        obj = img > thr
    else:
        obj = np.asarray(mask, dtype=bool)
        if obj.shape != img.shape:
            raise ParameterError("mask shape differs from the image", "mask")
    obj_m = obj[:, ::-1]
    union = obj | obj_m
    n = np.count_nonzero(union)
    if n == 0:
        raise UndefinedScoreError("image has no object pixels")
    differ = (np.abs(img - mirror) > thr) & union
    if mask is not None:
        differ |= obj ^ obj_m
    return 1.0 - np.count_nonzero(differ) / n


def _mask_score(obj):
    union = np.count_nonzero(obj | obj[:, ::-1])
    if union == 0:
        return 0.0
    return 1.0 - np.count_nonzero(obj ^ obj[:, ::-1]) / union


# --------------------------------------------------------------- containers


@dataclass
class LabeledImage:
    pixels: np.ndarray
    label: int
    measured_symmetry: float
    mask: Optional[np.ndarray] = None
    info: dict = field(default_factory=dict)


def _emit(pixels, level, mask=None, info=None):
    """Score the finished image and enforce the generator contract."""
    target = LEVEL_TARGETS[level]
    score = symmetry_score(pixels, mask=mask)
    if abs(score - target) > TOLERANCE + 1e-12:
        raise GenerationError(f"level {level}: score {score:.3f} misses target {target}")
    return LabeledImage(pixels, level, score, mask, info or {})


# -------------------------------------------------------------- degradation


def _right_half(shape):
    return (shape[1] + 1) // 2


def degrade(obj, target, rng, tol=TOLERANCE, max_attempts=MAX_ATTEMPTS):
    """Break the symmetry of a boolean mask until its score is within ``tol`` of ``target``.

    Blocks are cut out of, or added onto, the object boundary in the right
    half only.  Steps that raise the score or overshoot below the band are
    undone; the walk stops at a random goal inside the band.
    """
    obj = np.array(obj, dtype=bool)
    score = _mask_score(obj)
    if score < target - tol:
        raise GenerationError("object is already less symmetric than the target")
    goal = rng.uniform(target - 0.6 * tol, target + 0.6 * tol)
    H, W = obj.shape
    c0 = _right_half(obj.shape)
    right = np.zeros_like(obj)
    right[:, c0:] = True
    for _ in range(max_attempts):
        if score <= goal:
            break
        union = np.count_nonzero(obj | obj[:, ::-1])
        # each newly unmatched pixel costs roughly two units of the union
        need = max(1.0, (score - goal) * union / 2.0)
        side = int(rng.integers(1, max(1, int(math.sqrt(need))) + 1))
        bh = int(rng.integers(1, side + 1))
        bw = int(rng.integers(1, side + 1))
        remove = rng.random() < 0.6
        if remove:
            cand = obj & ~ndimage.binary_erosion(obj) & right
        else:
            cand = ndimage.binary_dilation(obj) & ~obj & right
        ys, xs = np.nonzero(cand)
        if len(ys) == 0:
            ys, xs = np.nonzero(right)
        k = int(rng.integers(len(ys)))
        y0 = min(max(ys[k] - bh // 2, 0), H - bh)
        x0 = min(max(xs[k] - bw // 2, c0), W - bw)
        trial = obj.copy()
        trial[y0 : y0 + bh, x0 : x0 + bw] = not remove
        new = _mask_score(trial)
        if new > score or new < target - tol:
            continue
        obj, score = trial, new
    if abs(score - target) > tol:
        raise GenerationError(f"could not reach symmetry {target} (stuck at {score:.3f})")
    return obj


# --------------------------------------------------------------- generators


def _side_with_parity(size, lo, hi, rng):
    lo, hi = int(math.ceil(lo)), int(hi)
    sides = [s for s in range(lo, hi + 1) if s % 2 == size % 2]
    if not sides:
        raise ParameterError("image too small for this generator", "size")
    return int(rng.choice(sides))


def gen_square(level, size, rng) -> LabeledImage:
    """Filled square centred on the mirror axis, then degraded to the level."""
    target = _check_level(level)
    side = _side_with_parity(size, 0.35 * size, 0.65 * size, rng)
    left = (size - side) // 2
    top = int(rng.integers(max(1, size // 16), size - side - max(1, size // 16) + 1))
    obj = np.zeros((size, size), dtype=bool)
    obj[top : top + side, left : left + side] = True
    if level:
        obj = degrade(obj, target, rng)
    return _emit(obj.astype(np.float64), level, info={"side": side})


def sierpinski_mask(size, depth, scale=1.0):
    """Raster Sierpinski triangle, apex up, centroid at the image centre.

    Pixel centres are classified by recursing on ``(t, |r|)`` where ``t`` is
    the depth below the apex and ``r`` the signed half-width position, both
    in units of the triangle; using ``|r|`` keeps the raster exactly
    mirror-symmetric.
    """
    if depth < 0:
        raise ParameterError("depth must be >= 0", "depth")
    c = (size - 1) / 2.0
    margin = 1.0
    h = 1.5 * (c - margin) * scale
    top = c - 2.0 * h / 3.0
    half_base = h / math.sqrt(3.0)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    t = (yy - top) / h
    r = np.abs(xx - c) / (2.0 * half_base)  # the base spans r in [0, 0.5]
    inside = (t >= 0) & (t <= 1) & (r <= t / 2.0)
    for _ in range(depth):
        upper = t < 0.5
        t = np.where(upper, 2.0 * t, 2.0 * (t - 0.5))
        # lower sub-triangles: mirror onto the right one and shift its apex to r = 0
        r = np.where(upper, 2.0 * r, np.abs(2.0 * r - 0.5))
        inside &= r <= t / 2.0
    return inside


def gen_sierpinski(depth, level, size, rng, scale=None) -> LabeledImage:
    target = _check_level(level)
    if scale is None:
        scale = rng.uniform(0.75, 1.0)
    obj = sierpinski_mask(size, depth, scale)
    if level:
        obj = degrade(obj, target, rng)
    return _emit(obj.astype(np.float64), level, info={"depth": depth})


def _composition(total, parts, rng, minimum=1):
    """Random positive integers summing to ``total``."""
    spare = total - parts * minimum
    if spare < 0:
        raise ParameterError("not enough room for the requested parts", "n_splits")
    cuts = np.sort(rng.integers(0, spare + 1, size=parts - 1))
    edges = np.concatenate(([0], cuts, [spare]))
    return np.diff(edges) + minimum


def _palindrome(total, parts, rng, minimum=1):
    """Integer palindrome of ``parts`` entries >= ``minimum`` summing to ``total``."""
    half = parts // 2
    if parts % 2:
        lo = minimum + (total - minimum) % 2
        spare = total - 2 * half * minimum
        mids = [m for m in range(lo, spare + 1, 2)]
        mid = int(rng.choice(mids)) if half else total
        side = _composition((total - mid) // 2, half, rng, minimum) if half else []
        return np.concatenate((side, [mid], side[::-1])).astype(int)
    if total % 2:
        raise ParameterError("an even number of parts needs an even total", "n_splits")
    side = _composition(total // 2, half, rng, minimum)
    return np.concatenate((side, side[::-1])).astype(int)


class _PartedLayout:
    """A square cut into bands (stacked rows) or strips (side-by-side columns)."""

    def __init__(self, size, side, m, orientation, rng):
        self.size = size
        self.side = side
        self.orientation = orientation
        if orientation == "bands":
            self.lengths = _composition(side, m, rng)
            gaps = rng.integers(1, max(2, size // (4 * m)) + 1, size=m - 1)
            span = side + int(gaps.sum())
            top = int(rng.integers(1, max(2, size - span)))
            self.starts = top + np.concatenate(([0], np.cumsum(self.lengths[:-1] + gaps)))
            self.cross = (size - side) // 2
        else:
            self.lengths = _palindrome(side, m, rng)
            # even gap total keeps the span's parity, so it centres exactly
            gmin = m - 1 if (m - 1) % 2 == 0 else m
            gmax = min(size - side - 2, gmin + size // 4)
            gap_total = 2 * int(rng.integers(gmin // 2, gmax // 2 + 1))
            gaps = _palindrome(gap_total, m - 1, rng)
            span = side + int(gaps.sum())
            left = (size - span) // 2
            self.starts = left + np.concatenate(([0], np.cumsum(self.lengths[:-1] + gaps)))
            self.cross = int(rng.integers(1, size - side))
        self.m = m

    def shift_bounds(self):
        if self.orientation == "bands":
            return -self.cross, self.size - self.cross - self.side
        return -self.cross, self.size - self.cross - self.side

    def render(self, shifts):
        obj = np.zeros((self.size, self.size), dtype=bool)
        for s, n, d in zip(self.starts, self.lengths, shifts):
            c = self.cross + int(d)
            if self.orientation == "bands":
                obj[s : s + n, c : c + self.side] = True
            else:
                obj[c : c + self.side, s : s + n] = True
        return obj


def gen_parted(level, n_splits, size, rng, someparted=False) -> LabeledImage:
    """Square cut into ``n_splits + 1`` segments that are pulled apart and reattached.

    Segments are always separated by gaps laid out symmetrically about the
    axis.  Below level 0 each segment is also slid along its cut (bands
    sideways, strips up or down) by a random amount; the overall slide
    magnitude is searched so the score lands on the level target.  Segments
    never overlap or leave the image, so the object keeps every pixel of
    the original square.  With ``someparted`` the split count is drawn from
    ``{1 + level, 2 + level}``.
    """
    target = _check_level(level)
    if someparted:
        n_splits = int(rng.integers(1 + level, 3 + level))
    if n_splits < 1:
        raise ParameterError("n_splits must be >= 1", "n_splits")
    m = n_splits + 1
    side = _side_with_parity(size, max(2 * m, 0.35 * size), size // 2, rng)
    orientations = ["bands", "strips"]
    if m % 2 == 0 and side % 2:
        orientations = ["bands"]
    for attempt in range(MAX_ATTEMPTS):
        if attempt % 5 == 0:
            orientation = str(rng.choice(orientations))
            layout = _PartedLayout(size, side, m, orientation, rng)
            info = {"side": side, "n_splits": n_splits, "orientation": orientation}
            if level == 0:
                return _emit(layout.render(np.zeros(m)).astype(np.float64), level, info=info)
            lo, hi = layout.shift_bounds()
        u = rng.uniform(0.5, 1.0, size=m) * rng.choice((-1.0, 1.0), size=m)
        if orientation == "strips":
            # a strip and its mirror partner slide in opposite directions
            u[m - 1 - np.arange(m // 2)] = -u[: m // 2] * rng.uniform(0.5, 1.0, size=m // 2)
        hits = []
        for s in np.linspace(0.5, size, 64):
            shifts = np.clip(np.rint(s * u), lo, hi)
            score = _mask_score(layout.render(shifts))
            if abs(score - target) <= 0.8 * TOLERANCE:
                hits.append(shifts)
            elif score < target - TOLERANCE:
                break
        if hits:
            shifts = hits[int(rng.integers(len(hits)))]
            info["shifts"] = shifts.astype(int).tolist()
            return _emit(layout.render(shifts).astype(np.float64), level, info=info)
    raise GenerationError(f"no segment arrangement reached symmetry {target}")


def _ellipse(shape, cy, cx, ry, rx):
    yy, xx = np.ogrid[0 : shape[0], 0 : shape[1]]
    return ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0


def _rect(shape, y0, y1, x0, x1):
    out = np.zeros(shape, dtype=bool)
    out[max(0, int(round(y0))) : int(round(y1)), max(0, int(round(x0))) : int(round(x1))] = True
    return out


def _human_parts(size, rng):
    """Symmetric body plus the left arm and leg (the right ones are mirrors)."""
    S = float(size)
    c = (size - 1) / 2.0
    j = lambda v: v * rng.uniform(0.9, 1.1)  # noqa: E731
    shape = (size, size)
    head = _ellipse(shape, j(0.17) * S, c, j(0.085) * S, j(0.075) * S)
    tw = j(0.11) * S
    t0, t1 = 0.27 * S, j(0.6) * S
    torso = np.abs(np.arange(size) - c)[None, :] <= tw
    torso = torso & (np.arange(size)[:, None] >= t0) & (np.arange(size)[:, None] < t1)
    body = head | torso
    arm = _rect(shape, t0 + 0.02 * S, t0 + j(0.3) * S, c - tw - j(0.09) * S, c - tw - 0.02 * S)
    leg = _rect(shape, t1, min(S - 1, t1 + j(0.3) * S), c - tw + 0.01 * S, c - j(0.03) * S)
    return body, arm, leg


def _shift_mask(mask, dy, dx):
    out = np.zeros_like(mask)
    H, W = mask.shape
    ys, xs = np.nonzero(mask)
    ys, xs = ys + dy, xs + dx
    keep = (ys >= 0) & (ys < H) & (xs >= 0) & (xs < W)
    out[ys[keep], xs[keep]] = True
    return out


def gen_human_like(level, size, rng) -> LabeledImage:
    """Head, torso, arms and legs; the right limbs are detached and moved for lower levels."""
    target = _check_level(level)
    body, arm, leg = _human_parts(size, rng)
    left = arm | leg
    obj = body | left | left[:, ::-1]
    if level:
        r_arm, r_leg = arm[:, ::-1], leg[:, ::-1]
        mag = 0.25 * size * level / 4.0
        for _ in range(20):
            dy_a, dy_l = (int(v) for v in np.rint(rng.uniform(-mag, mag, size=2)))
            dx_a = int(np.rint(rng.uniform(0, mag / 2)))
            moved = body | left | _shift_mask(r_arm, dy_a, dx_a) | _shift_mask(r_leg, dy_l, 0)
            if _mask_score(moved) >= target - 0.5 * TOLERANCE:
                obj = moved
                break
            mag /= 2.0
        obj = degrade(obj, target, rng)
    return _emit(obj.astype(np.float64), level)


def _symmetric_blob(size, rng):
    c = (size - 1) / 2.0
    shape = (size, size)
    mask = _ellipse(shape, rng.uniform(0.4, 0.6) * size, c, rng.uniform(0.15, 0.28) * size, rng.uniform(0.12, 0.25) * size)
    for _ in range(int(rng.integers(0, 3))):
        cy = rng.uniform(0.25, 0.75) * size
        dx = rng.uniform(0.0, 0.2) * size
        ry, rx = rng.uniform(0.06, 0.14, size=2) * size
        lobe = _ellipse(shape, cy, c - dx, ry, rx)
        mask |= lobe | lobe[:, ::-1]
    return mask


def gen_rgb_symmetric(level, size, rng, achromatic=False) -> LabeledImage:
    """Coloured symmetric object on a random background, scored inside the object mask.

    The object colour varies with height and with distance from the axis
    only, so colour never breaks the symmetry; the level is set by the
    shape of the mask.  ``achromatic`` renders every colour as gray.
    """
    target = _check_level(level)
    mask = _symmetric_blob(size, rng)
    if level:
        mask = degrade(mask, target, rng)
    yy, xx = np.mgrid[0:size, 0:size] / (size - 1.0)
    dist = np.abs(xx - 0.5)
    if achromatic:
        base = np.full(3, rng.uniform(0.65, 0.85))
        gx = np.full(3, rng.uniform(-0.2, 0.2))
        gy = np.full(3, rng.uniform(-0.2, 0.2))
    else:
        hue = rng.uniform(-0.25, 0.25, size=3)
        base = rng.uniform(0.65, 0.85) + hue - hue.mean()
        gx = rng.uniform(-0.2, 0.2, size=3)
        gy = rng.uniform(-0.2, 0.2, size=3)
    obj_rgb = base + gx * dist[..., None] + gy * (yy[..., None] - 0.5)
    bg_lum = rng.uniform(0.05, 0.3)
    if achromatic:
        bg = np.full(3, bg_lum)
        bg_g = np.full(3, rng.uniform(-0.05, 0.05))
    else:
        tint = rng.uniform(-0.05, 0.05, size=3)
        bg = bg_lum + tint - tint.mean()
        bg_g = rng.uniform(-0.05, 0.05, size=3)
    angle = rng.uniform(0, 2 * np.pi)
    ramp = np.cos(angle) * (xx - 0.5) + np.sin(angle) * (yy - 0.5)
    bg_rgb = bg + bg_g * ramp[..., None]
    image = np.clip(np.where(mask[..., None], obj_rgb, bg_rgb), 0.0, 1.0)
    return _emit(image, level, mask=mask)


# --------------------------------------------------------------- transforms


def _translation_pair(translation_frac):
    t = np.atleast_1d(np.asarray(translation_frac, dtype=np.float64))
    if t.size == 1:
        t = np.repeat(t, 2)
    if t.size != 2:
        raise ParameterError("translation must be a scalar or a (tx, ty) pair", "translation")
    return float(t[0]), float(t[1])


def apply_transform(image, rotation_deg=0.0, translation_frac=0.0):
    """Rotate about the image centre (bilinear, zero fill), then translate.

    ``translation_frac`` is ``(tx, ty)`` as fractions of the image width and
    height (a scalar applies to both); shifts are rounded to whole pixels so
    that opposite translations cancel exactly away from the border.
    """
    image = np.asarray(image, dtype=np.float64)
    if not -180.0 <= rotation_deg <= 180.0:
        raise ParameterError("rotation must lie in [-180, 180] degrees", "rotation")
    tx, ty = _translation_pair(translation_frac)
    if abs(tx) > 0.2 or abs(ty) > 0.2:
        raise ParameterError("translation must lie in [-0.2, 0.2] per axis", "translation")
    H, W = image.shape[:2]
    out = image.copy()
    if rotation_deg != 0.0:
        a = math.radians(rotation_deg)
        cos, sin = math.cos(a), math.sin(a)
        # output (row, col) -> input (row, col); rows point down
        M = np.array([[cos, sin], [-sin, cos]])
        centre = np.array([(H - 1) / 2.0, (W - 1) / 2.0])
        offset = centre - M @ centre
        planes = out[..., None] if out.ndim == 2 else out
        rotated = np.stack(
            [
                ndimage.affine_transform(planes[..., k], M, offset, order=1, mode="constant", cval=0.0)
                for k in range(planes.shape[-1])
            ],
            axis=-1,
        )
        out = rotated[..., 0] if image.ndim == 2 else rotated
        # bilinear weights are convex; clip away floating-point excursions
        np.clip(out, min(0.0, image.min()), image.max(), out=out)
    dy, dx = int(np.rint(ty * H)), int(np.rint(tx * W))
    if dy or dx:
        shifted = np.zeros_like(out)
        src = out[max(0, -dy) : H - max(0, dy), max(0, -dx) : W - max(0, dx)]
        shifted[max(0, dy) : max(0, dy) + src.shape[0], max(0, dx) : max(0, dx) + src.shape[1]] = src
        out = shifted
    return out


# ------------------------------------------------------------------ datasets


@dataclass
class SymmetrySpec:
    family: str = SQUARE
    levels: int = 5
    image_size: int = 32
    count: int = 10000
    rotation_range: Tuple[float, float] = (0.0, 0.0)
    translation_range: Tuple[float, float] = (0.0, 0.0)
    seed: int = 0
    name: str = ""
    depth: int = 2  # triangle recursion depth
    n_splits: int = 2  # parted-square cut count
    achromatic: bool = False  # rgb-image only
    train_fraction: float = 0.8

    def validate(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown family {self.family!r}", "family")
        level_indices(self.levels)
        if self.image_size < 16:
            raise ParameterError("image_size must be >= 16", "image_size")
        if self.count < 1:
            raise ParameterError("count must be >= 1", "count")
        lo, hi = self.rotation_range
        if not -180.0 <= lo <= hi <= 180.0:
            raise ParameterError("rotation_range must lie within [-180, 180]", "rotation_range")
        lo, hi = self.translation_range
        if not -0.2 <= lo <= hi <= 0.2:
            raise ParameterError("translation_range must lie within [-0.2, 0.2]", "translation_range")
        if not 0.0 < self.train_fraction < 1.0:
            raise ParameterError("train_fraction must lie in (0, 1)", "train_fraction")
        return self

    @property
    def is_rgb(self):
        return self.family == RGB


ROT_TRANS = {"rotation_range": (-180.0, 180.0), "translation_range": (-0.2, 0.2)}

DATASETS = {
    "SQUARE": dict(family=SQUARE, levels=5),
    "TWOCLASSES-SQUARE": dict(family=SQUARE, levels=2),
    "TRIANGLE": dict(family=TRIANGLE, levels=5),
    "ROTATED-TRANSLATED-TRIANGLE": dict(family=TRIANGLE, levels=5, **ROT_TRANS),
    "FIVECLASSES-PARTED-SQUARE": dict(family=PARTED, levels=5),
    "TWOCLASSES-PARTED-SQUARE": dict(family=PARTED, levels=2),
    "FIVECLASSES-SOMEPARTED-SQUARE": dict(family=SOMEPARTED, levels=5),
    "TWOCLASSES-SOMEPARTED-SQUARE": dict(family=SOMEPARTED, levels=2),
    "ROTATED-TRANSLATED-HUMAN-LIKE": dict(family=HUMAN, levels=5, **ROT_TRANS),
    "RGB-IMAGE": dict(family=RGB, levels=5),
}


def dataset_spec(name, **overrides) -> SymmetrySpec:
    """Generator settings of a named dataset, with any field overridden."""
    if name not in DATASETS:
        raise ParameterError(f"unknown dataset {name!r}; known: {', '.join(DATASETS)}", "dataset")
    kwargs = dict(DATASETS[name], name=name)
    kwargs.update(overrides)
    return SymmetrySpec(**kwargs).validate()


def generate(family, level, size, rng, spec=None) -> LabeledImage:
    spec = spec or SymmetrySpec(family=family, image_size=size)
    if family == SQUARE:
        return gen_square(level, size, rng)
    if family == TRIANGLE:
        return gen_sierpinski(spec.depth, level, size, rng)
    if family == PARTED:
        return gen_parted(level, spec.n_splits, size, rng)
    if family == SOMEPARTED:
        return gen_parted(level, spec.n_splits, size, rng, someparted=True)
    if family == HUMAN:
        return gen_human_like(level, size, rng)
    if family == RGB:
        return gen_rgb_symmetric(level, size, rng, achromatic=spec.achromatic)
    raise ParameterError(f"unknown family {family!r}", "family")


def _quantize(image):
    return np.rint(np.clip(image, 0.0, 1.0) * 255.0) / 255.0


def class_names(levels):
    return [f"{int(round(LEVEL_TARGETS[k] * 100))}%" for k in level_indices(levels)]


def build_dataset(spec, out_dir=None) -> LabeledDataset:
    """Generate ``spec.count`` labelled images; optionally write them with a manifest.

    Item ``i`` gets class ``i % levels`` (so any remainder is spread
    round-robin over the first classes) and its own generator seeded from
    ``(seed, i)``.  The train/test split is a seeded shuffle.  Symmetry is
    measured on the canonical pose, before any rotation or translation.
    Images are quantised to 8 bits, exactly as written to disk.
    """
    spec.validate()
    levels = level_indices(spec.levels)
    size = spec.image_size
    shape = (spec.count, size, size, 3) if spec.is_rgb else (spec.count, size, size)
    images = np.empty(shape, dtype=np.float32)
    labels = np.arange(spec.count) % len(levels)
    measured = np.empty(spec.count)
    transform = spec.rotation_range != (0.0, 0.0) or spec.translation_range != (0.0, 0.0)
    for i in range(spec.count):
        rng = np.random.default_rng([spec.seed, i])
        item = generate(spec.family, levels[labels[i]], size, rng, spec)
        pixels = _quantize(item.pixels)
        measured[i] = symmetry_score(pixels, mask=item.mask)
        if transform:
            rot = rng.uniform(*spec.rotation_range)
            tx, ty = rng.uniform(*spec.translation_range, size=2)
            pixels = _quantize(apply_transform(pixels, rot, (tx, ty)))
        images[i] = pixels
    order = np.random.default_rng(spec.seed).permutation(spec.count)
    n_train = int(round(spec.train_fraction * spec.count))
    split = np.full(spec.count, "test", dtype="<U5")
    split[order[:n_train]] = "train"
    ext = "ppm" if spec.is_rgb else "pgm"
    filenames = [f"{i:05d}.{ext}" for i in range(spec.count)]
    ds = LabeledDataset(
        images=images,
        labels=labels,
        split=split,
        class_names=class_names(spec.levels),
        name=spec.name or spec.family,
        kind="symmetry",
        measured=measured,
        filenames=filenames,
        meta={"spec": asdict(spec)},
    )
    if out_dir is not None:
        write_dataset(ds, spec, out_dir)
    return ds


def _format_value(v):
    if isinstance(v, (tuple, list)):
        return ", ".join(repr(float(x)) for x in v)
    return str(v)


def write_dataset(ds, spec, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for fname, img in zip(ds.filenames, ds.images):
        write_pnm(out / fname, img)
    with open(out / MANIFEST, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MANIFEST_HEADER)
        for fname, lab, sp, m in zip(ds.filenames, ds.labels, ds.split, ds.measured):
            w.writerow((fname, int(lab), sp, f"{m:.6f}"))
    with open(out / SPEC_FILE, "w", encoding="utf-8") as fh:
        for k, v in asdict(spec).items():
            fh.write(f"{k} = {_format_value(v)}\n")


def _read_spec_file(path):
    fields = SymmetrySpec.__dataclass_fields__
    kwargs = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, _, value = (s.strip() for s in line.partition("="))
        if key not in fields:
            raise ParameterError(f"unknown dataset key {key!r}", key)
        default = fields[key].default
        if isinstance(default, tuple):
            kwargs[key] = tuple(float(x) for x in value.split(","))
        elif isinstance(default, bool):
            kwargs[key] = value.lower() in ("1", "true", "yes")
        elif isinstance(default, (int, float)):
            kwargs[key] = type(default)(value)
        else:
            kwargs[key] = value
    return SymmetrySpec(**kwargs)


def load_symmetry_dir(directory) -> LabeledDataset:
    """Read a directory written by :func:`build_dataset` back into memory."""
    from .errors import FormatError

    directory = Path(directory)
    manifest = directory / MANIFEST
    if not manifest.exists():
        raise FormatError("missing manifest.csv", path=str(directory))
    with open(manifest, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != MANIFEST_HEADER:
        raise FormatError("manifest header must be " + ",".join(MANIFEST_HEADER), offset=0, path=str(manifest))
    rows = rows[1:]
    spec = _read_spec_file(directory / SPEC_FILE) if (directory / SPEC_FILE).exists() else None
    images = np.stack([read_pnm(directory / r[0]) for r in rows]).astype(np.float32) / 255.0
    labels = np.array([int(r[1]) for r in rows])
    levels = spec.levels if spec else int(labels.max()) + 1
    return LabeledDataset(
        images=images,
        labels=labels,
        split=np.array([r[2] for r in rows]),
        class_names=class_names(levels) if levels in (2, 5) else None,
        name=(spec.name or spec.family) if spec else directory.name,
        kind="symmetry",
        measured=np.array([float(r[3]) for r in rows]),
        filenames=[r[0] for r in rows],
        meta={"spec": asdict(spec)} if spec else {},
    )

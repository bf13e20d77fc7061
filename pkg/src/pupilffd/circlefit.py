"""Pupil/iris localisation from segmentation label masks.

Takes a three-label mask (background / iris / pupil), extracts each
region's one-pixel boundary as the XOR of the binary mask with its
erosion, fits a circle to the boundary by algebraic least squares, and
measures per-axis radii as chord extents through the fitted centre. The
iterative geometric fit is deliberately not used here; it lives in the
test suite as an independent oracle.
"""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import ndimage

from pupilffd.core import CSV_COLUMNS, Condition, Eye, FrameGeometry, SchemaError

logger = logging.getLogger(__name__)

LABEL_BACKGROUND = 0
LABEL_IRIS = 1
LABEL_PUPIL = 2

# 8-bit pixel codes used by the PGM mask files.
PGM_CODES = {0: LABEL_BACKGROUND, 128: LABEL_IRIS, 255: LABEL_PUPIL}
PGM_BYTES = {LABEL_BACKGROUND: 0, LABEL_IRIS: 128, LABEL_PUPIL: 255}

# 3x3 cross (4-connectivity), the thinnest stable structuring element.
CROSS = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

MANIFEST_COLUMNS = ("id", "eye", "condition", "t", "mask_path")


class CircleFitError(ValueError):
    """Circle fitting is impossible for the given points."""


@dataclass
class LabelMask:
    """Row-major label grid; ``labels[row, col]`` with shape (height, width)."""

    width: int
    height: int
    labels: np.ndarray

    def __post_init__(self) -> None:
        self.labels = np.asarray(self.labels, dtype=np.uint8)
        if self.labels.shape != (self.height, self.width):
            raise ValueError(
                f"labels shape {self.labels.shape} does not match "
                f"(height={self.height}, width={self.width})")


@dataclass(frozen=True)
class CircleEstimate:
    cx: float
    cy: float
    r: float
    rms_error: float
    n_points: int

    def __post_init__(self) -> None:
        if self.r <= 0:
            raise CircleFitError(f"fitted radius must be positive, got {self.r}")
        if self.n_points < 3:
            raise CircleFitError("a circle estimate needs at least 3 points")


def _target_binary(mask: LabelMask, target: str) -> np.ndarray:
    # The pupil sits inside the iris, so the iris *region* covers both
    # labels; taking the bare iris label would leave an annulus whose
    # inner boundary corrupts the circle fit.
    if target == "iris":
        return (mask.labels == LABEL_IRIS) | (mask.labels == LABEL_PUPIL)
    if target == "pupil":
        return mask.labels == LABEL_PUPIL
    raise ValueError(f"target must be 'iris' or 'pupil', got {target!r}")


def boundary_pixels(mask: LabelMask, target: str) -> np.ndarray:
    """One-pixel-thick boundary of the target region as (x, y) points.

    Boundary = binary(target) XOR erode(binary(target), 3x3 cross), so
    the result is always a subset of the target pixels and covers every
    connected component. Pixels touching the image border count as
    boundary (the outside is background).
    """
    label = LABEL_IRIS if target == "iris" else LABEL_PUPIL
    if not (mask.labels == label).any():
        raise ValueError(f"mask contains no {target} pixels")
    binary = _target_binary(mask, target)
    eroded = ndimage.binary_erosion(binary, structure=CROSS, border_value=0)
    rows, cols = np.nonzero(binary ^ eroded)
    return np.column_stack([cols, rows]).astype(np.float64)


def fit_circle_lsq(points: np.ndarray) -> CircleEstimate:
    """Algebraic least-squares circle through a point set.

    Minimises sum((x^2 + y^2 + D*x + E*y + F)^2) over (D, E, F) in
    centroid-centred coordinates, then recovers centre and radius.
    Collinear inputs make the normal equations singular and raise
    :class:`CircleFitError` (reciprocal condition below 1e-10).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise CircleFitError(f"need an (n, 2) array with n >= 3, got shape {pts.shape}")
    centroid = pts.mean(axis=0)
    x = pts[:, 0] - centroid[0]
    y = pts[:, 1] - centroid[1]
    z = x * x + y * y
    # Centring zeroes the linear moments, so D and E come from a 2x2 solve
    # and F is just -mean(z).
    a = np.array([[np.dot(x, x), np.dot(x, y)],
                  [np.dot(x, y), np.dot(y, y)]])
    svals = np.linalg.svd(a, compute_uv=False)
    if svals[-1] <= 1e-10 * max(svals[0], 1.0):
        raise CircleFitError("points are collinear (singular normal equations)")
    d, e = np.linalg.solve(a, [-np.dot(x, z), -np.dot(y, z)])
    f = -z.mean()
    cx = -d / 2.0
    cy = -e / 2.0
    r2 = cx * cx + cy * cy - f
    if r2 <= 0:
        raise CircleFitError("degenerate fit: non-positive squared radius")
    r = float(np.sqrt(r2))
    radial = np.sqrt((x - cx) ** 2 + (y - cy) ** 2)
    rms = float(np.sqrt(np.mean((radial - r) ** 2)))
    return CircleEstimate(cx=float(cx + centroid[0]), cy=float(cy + centroid[1]),
                          r=r, rms_error=rms, n_points=len(pts))


def axis_radii(mask: LabelMask, target: str, centre: tuple[float, float]) -> tuple[float, float]:
    """Chord half-extents of the target region through a centre point.

    ``r_x`` is half the length of the contiguous run of target pixels,
    along the row through the centre, that contains the centre column;
    ``r_y`` is the analogue along the column. Returns (0, 0) when the
    centre pixel itself is not a target pixel.
    """
    cx, cy = centre
    if not (0 <= cx < mask.width and 0 <= cy < mask.height):
        raise ValueError(f"centre {centre} lies outside the {mask.width}x{mask.height} grid")
    col = int(round(cx))
    row = int(round(cy))
    col = min(col, mask.width - 1)
    row = min(row, mask.height - 1)
    binary = _target_binary(mask, target)
    if not binary[row, col]:
        return 0.0, 0.0
    r_x = _run_length(binary[row, :], col) / 2.0
    r_y = _run_length(binary[:, col], row) / 2.0
    return r_x, r_y


def _run_length(line: np.ndarray, idx: int) -> int:
    lo = idx
    while lo > 0 and line[lo - 1]:
        lo -= 1
    hi = idx
    while hi < len(line) - 1 and line[hi + 1]:
        hi += 1
    return hi - lo + 1


def localize_eye(mask: LabelMask, t: float = 0.0) -> FrameGeometry:
    """Full localisation of one mask into per-frame geometry.

    Fits iris and pupil circles from their boundary pixels, then reads
    per-axis radii through each fitted centre. The frame is valid only
    when both fits succeed, iris radii are positive, the pupil does not
    exceed the iris on either axis, and the pupil centre lies inside the
    fitted iris circle. Failures degrade to ``valid=False`` instead of
    aborting, so one bad frame never kills a sequence.
    """
    try:
        iris_fit = fit_circle_lsq(boundary_pixels(mask, "iris"))
        pupil_fit = fit_circle_lsq(boundary_pixels(mask, "pupil"))
        iris_rx, iris_ry = axis_radii(mask, "iris", (iris_fit.cx, iris_fit.cy))
        pupil_rx, pupil_ry = axis_radii(mask, "pupil", (pupil_fit.cx, pupil_fit.cy))
    except ValueError:
        return FrameGeometry(t=t, pupil_rx=0, pupil_ry=0, iris_rx=0, iris_ry=0,
                             pupil_cx=0, pupil_cy=0, iris_cx=0, iris_cy=0, valid=False)
    centre_dist = float(np.hypot(pupil_fit.cx - iris_fit.cx, pupil_fit.cy - iris_fit.cy))
    valid = (
        iris_rx > 0 and iris_ry > 0
        and 0 < pupil_rx <= iris_rx and 0 < pupil_ry <= iris_ry
        and centre_dist < iris_fit.r
    )
    return FrameGeometry(
        t=t,
        pupil_rx=pupil_rx, pupil_ry=pupil_ry,
        iris_rx=iris_rx, iris_ry=iris_ry,
        pupil_cx=pupil_fit.cx, pupil_cy=pupil_fit.cy,
        iris_cx=iris_fit.cx, iris_cy=iris_fit.cy,
        valid=valid,
    )


def read_pgm(path: str | Path) -> LabelMask:
    """Read a binary (P5) PGM mask with the 0/128/255 label codes."""
    data = Path(path).read_bytes()
    fields: list[bytes] = []
    pos = 0
    while len(fields) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        fields.append(data[start:pos])
    if fields[0] != b"P5":
        raise ValueError(f"{path}: expected binary PGM (P5), got {fields[0]!r}")
    width, height, maxval = int(fields[1]), int(fields[2]), int(fields[3])
    if maxval != 255:
        raise ValueError(f"{path}: expected maxval 255, got {maxval}")
    pos += 1  # single whitespace byte after maxval
    raster = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    labels = np.zeros(width * height, dtype=np.uint8)
    known = np.zeros(width * height, dtype=bool)
    for code, label in PGM_CODES.items():
        hit = raster == code
        labels[hit] = label
        known |= hit
    if not known.all():
        bad = int(raster[~known][0])
        raise ValueError(f"{path}: unexpected pixel code {bad} (want 0, 128 or 255)")
    return LabelMask(width=width, height=height, labels=labels.reshape(height, width))


def write_pgm(mask: LabelMask, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    raster = np.zeros((mask.height, mask.width), dtype=np.uint8)
    for label, byte in PGM_BYTES.items():
        raster[mask.labels == label] = byte
    with open(path, "wb") as fh:
        fh.write(f"P5\n{mask.width} {mask.height}\n255\n".encode("ascii"))
        fh.write(raster.tobytes())


def localize_batch(manifest_path: str | Path, out_csv: str | Path) -> int:
    """Localise every mask listed in a manifest into the geometry CSV.

    The manifest columns are ``id,eye,condition,t,mask_path`` with paths
    resolved relative to the manifest file. Returns the number of frames
    written.
    """
    manifest_path = Path(manifest_path)
    if not manifest_path.exists():
        raise SchemaError(f"manifest not found: {manifest_path}")
    out_csv = Path(out_csv)
    out_csv.parent.mkdir(parents=True, exist_ok=True)
    n = 0
    with open(manifest_path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise SchemaError(f"{manifest_path}: empty file")
        missing = [c for c in MANIFEST_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise SchemaError(f"{manifest_path}: missing column(s): {', '.join(missing)}")
        with open(out_csv, "w", newline="", encoding="utf-8") as out:
            writer = csv.writer(out)
            writer.writerow(CSV_COLUMNS)
            for row in reader:
                eye = Eye(row["eye"])
                condition = Condition(row["condition"])
                t = float(row["t"])
                mask = read_pgm(manifest_path.parent / row["mask_path"])
                g = localize_eye(mask, t=t)
                writer.writerow([
                    row["id"], eye.value, condition.value, f"{t:.6f}",
                    f"{g.pupil_rx:.4f}", f"{g.pupil_ry:.4f}",
                    f"{g.iris_rx:.4f}", f"{g.iris_ry:.4f}",
                    f"{g.pupil_cx:.4f}", f"{g.pupil_cy:.4f}",
                    f"{g.iris_cx:.4f}", f"{g.iris_cy:.4f}",
                    int(g.valid),
                ])
                n += 1
    if n == 0:
        raise SchemaError(f"{manifest_path}: no data rows")
    return n

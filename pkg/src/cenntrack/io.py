"""File formats: frames, ground truth, results and curve CSVs, atomic writes."""
from __future__ import annotations

import csv
import io
import os
import re
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .trainer import BoundingBox

FRAME_SUFFIXES = (".pgm", ".png")
RESULT_FIELDS = ["frame", "x", "y", "w", "h", "lost", "area"]


class InputError(ValueError):
    """Malformed or missing user input (maps to exit code 2)."""


def atomic_write(path, data) -> Path:
    """Write text or bytes to ``path`` through a temp file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = data.encode() if isinstance(data, str) else bytes(data)
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


# -- frames ----------------------------------------------------------------

def read_frame(path) -> np.ndarray:
    """8-bit grayscale frame as a (H, W) uint8 array."""
    try:
        with Image.open(path) as im:
            if im.mode not in ("L", "P", "RGB", "RGBA", "I;16", "I"):
                raise InputError(f"{path}: unsupported image mode {im.mode}")
            return np.asarray(im.convert("L"), dtype=np.uint8).copy()
    except (OSError, SyntaxError) as exc:
        raise InputError(f"{path}: cannot read image ({exc})") from None


def encode_pgm(img) -> bytes:
    img = np.asarray(img)
    if img.ndim != 2 or img.dtype != np.uint8:
        raise ValueError("PGM export needs a 2-D uint8 array")
    H, W = img.shape
    return f"P5\n{W} {H}\n255\n".encode() + img.tobytes()


def write_frame(path, img) -> Path:
    path = Path(path)
    if path.suffix.lower() == ".pgm":
        return atomic_write(path, encode_pgm(img))
    buf = io.BytesIO()
    Image.fromarray(np.asarray(img, dtype=np.uint8), mode="L").save(buf, format="PNG")
    return atomic_write(path, buf.getvalue())


def _frame_key(p: Path):
    digits = re.findall(r"\d+", p.stem)
    return (int(digits[-1]) if digits else -1, p.name)


def list_frames(directory) -> list[Path]:
    d = Path(directory)
    if not d.is_dir():
        raise InputError(f"{d}: not a directory")
    files = [p for p in d.iterdir() if p.suffix.lower() in FRAME_SUFFIXES]
    if not files:
        raise InputError(f"{d}: no .pgm or .png frames")
    return sorted(files, key=_frame_key)


@dataclass(frozen=True)
class SequenceSpec:
    frames_dir: Path
    ground_truth: Path | None = None
    start: int = 0
    stop: int | None = None

    def frame_paths(self) -> list[Path]:
        paths = list_frames(self.frames_dir)[self.start:self.stop]
        if not paths:
            raise InputError(f"{self.frames_dir}: frame range [{self.start}:{self.stop}] is empty")
        return paths

    def load_frames(self) -> list[np.ndarray]:
        frames = [read_frame(p) for p in self.frame_paths()]
        shape = frames[0].shape
        for p, f in zip(self.frame_paths(), frames):
            if f.shape != shape:
                raise InputError(f"{p}: size {f.shape} differs from first frame {shape}")
        return frames

    def load_boxes(self, n_frames: int) -> list[BoundingBox]:
        if self.ground_truth is None:
            raise InputError("no ground-truth file given")
        boxes = load_ground_truth(self.ground_truth)[self.start:]
        if len(boxes) < n_frames:
            raise InputError(f"{self.ground_truth}: {len(boxes)} boxes for {n_frames} frames")
        return boxes[:n_frames]


# -- ground truth ----------------------------------------------------------

def parse_ground_truth(text: str, source: str = "<ground truth>") -> list[BoundingBox]:
    """One 1-based ``x,y,w,h`` per line (comma or tab separated), as 0-based boxes."""
    boxes = []
    for n, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        parts = [p for p in re.split(r"[,\t]", line)]
        if len(parts) != 4:
            raise InputError(f"{source}:{n}: expected 4 fields, got {len(parts)}")
        try:
            x, y, w, h = (float(p) for p in parts)
        except ValueError:
            raise InputError(f"{source}:{n}: non-numeric field in {line!r}") from None
        if not all(np.isfinite(v) for v in (x, y, w, h)):
            raise InputError(f"{source}:{n}: non-finite field in {line!r}")
        if w <= 0 or h <= 0:
            raise InputError(f"{source}:{n}: width and height must be positive")
        boxes.append(BoundingBox(int(round(x)) - 1, int(round(y)) - 1,
                                 max(1, int(round(w))), max(1, int(round(h)))))
    if not boxes:
        raise InputError(f"{source}: no boxes")
    return boxes


def load_ground_truth(path) -> list[BoundingBox]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    return parse_ground_truth(text, str(path))


def format_ground_truth(boxes) -> str:
    return "".join(f"{b.x + 1},{b.y + 1},{b.w},{b.h}\n" for b in boxes)


# -- results ---------------------------------------------------------------

def results_csv(results) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(RESULT_FIELDS)
    for r in results:
        w.writerow([r.frame, r.box.x, r.box.y, r.box.w, r.box.h, int(r.lost), r.area])
    return buf.getvalue()


def read_results(path) -> list[dict]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None
    reader = csv.DictReader(io.StringIO(text))
    if reader.fieldnames != RESULT_FIELDS:
        raise InputError(f"{path}: header must be {','.join(RESULT_FIELDS)}")
    rows = []
    for n, row in enumerate(reader, 2):
        try:
            rows.append({k: int(row[k]) for k in RESULT_FIELDS})
        except (TypeError, ValueError):
            raise InputError(f"{path}:{n}: malformed row") from None
    return rows


def boxes_from_results(rows) -> list[BoundingBox]:
    return [BoundingBox(r["x"], r["y"], r["w"], r["h"]) for r in rows]

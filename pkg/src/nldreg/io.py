"""Plain-text file formats.

Matrices are CSV, row-major, preceded by a ``# rows cols`` header line.
Values are written with 17 significant digits so doubles round-trip exactly.

Mocap tracks use a sectioned text format::

    # nldreg-mocap
    @observations       2F rows of N values: x then y image row per frame
    @visibility         optional, F rows of N 0/1 flags (point seen in frame)
    @ground_truth       optional, 3F rows of N values (x, y, z rows per frame)
    @cameras            optional, F rows of 4 values (quaternion w, x, y, z)

Values inside a section are comma separated; blank lines and lines starting
with ``#`` are ignored. A ground-truth or camera section with the wrong
number of rows is treated as absent (with a warning) so truncated files
still yield their tracks.
"""
import logging
import re
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ParseError
from .metrics import LabeledData
from .problems.cameras import CameraSequence
from .problems.losses import MaskedObservations, point_visibility

log = logging.getLogger(__name__)

_HEADER = re.compile(r"^#\s*(\d+)\s+(\d+)\s*$")
SECTIONS = ("observations", "visibility", "ground_truth", "cameras")


def _parse_row(text, lineno, path):
    try:
        return [float(v) for v in text.split(",")]
    except ValueError:
        raise ParseError(f"non-numeric field in {text!r}", lineno, path) from None


def _format_row(row):
    return ",".join(f"{v:.17g}" for v in row)


def save_matrix(M, path):
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.ndim != 2:
        raise ValueError("save_matrix needs a 2-D array")
    with open(path, "w") as fh:
        fh.write(f"# {M.shape[0]} {M.shape[1]}\n")
        for row in M:
            fh.write(_format_row(row) + "\n")


def load_matrix(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError("empty file", 1, path)
    m = _HEADER.match(lines[0].strip())
    if not m:
        raise ParseError("expected header '# rows cols'", 1, path)
    rows, cols = int(m.group(1)), int(m.group(2))
    data = []
    for lineno, text in enumerate(lines[1:], start=2):
        if not text.strip():
            continue
        row = _parse_row(text, lineno, path)
        if len(row) != cols:
            raise ParseError(f"expected {cols} values, found {len(row)}", lineno, path)
        data.append(row)
    if len(data) != rows:
        raise ParseError(f"header declares {rows} rows, found {len(data)}", len(lines), path)
    if rows == 0 or cols == 0:
        raise ParseError("matrix has no entries", 1, path)
    return np.array(data, dtype=float)


@dataclass
class MocapData:
    obs: MaskedObservations  # 2F x N
    ground_truth: Optional[np.ndarray] = None  # 3F x N
    cameras: Optional[CameraSequence] = None

    @property
    def W(self):
        return self.obs.values

    @property
    def Z(self):
        return self.obs.mask.astype(int)

    @property
    def n_frames(self):
        return self.obs.shape[0] // 2


def save_mocap(path, obs, ground_truth=None, cameras=None):
    vis = point_visibility(obs).astype(int)
    with open(path, "w") as fh:
        fh.write("# nldreg-mocap\n@observations\n")
        for row in np.where(obs.mask, obs.values, 0.0):
            fh.write(_format_row(row) + "\n")
        fh.write("@visibility\n")
        for row in vis:
            fh.write(",".join(str(v) for v in row) + "\n")
        if ground_truth is not None:
            fh.write("@ground_truth\n")
            for row in np.asarray(ground_truth, dtype=float):
                fh.write(_format_row(row) + "\n")
        if cameras is not None:
            fh.write("@cameras\n")
            for row in cameras.quaternions:
                fh.write(_format_row(row) + "\n")


def load_mocap(path):
    sections = {}
    current = None
    width = None
    with open(path) as fh:
        lines = fh.read().splitlines()
    for lineno, text in enumerate(lines, start=1):
        text = text.strip()
        if not text or text.startswith("#"):
            continue
        if text.startswith("@"):
            current = text[1:].strip()
            if current not in SECTIONS:
                raise ParseError(f"unknown section {text!r}", lineno, path)
            if current in sections:
                raise ParseError(f"duplicate section {text!r}", lineno, path)
            sections[current] = []
            continue
        if current is None:
            raise ParseError("data before the first section marker", lineno, path)
        row = _parse_row(text, lineno, path)
        expected = 4 if current == "cameras" else width
        if expected is not None and len(row) != expected:
            raise ParseError(f"expected {expected} values, found {len(row)}", lineno, path)
        if current != "cameras" and width is None:
            width = len(row)
        sections[current].append(row)

    rows = sections.get("observations")
    if not rows:
        raise ParseError("missing @observations section", None, path)
    W = np.array(rows)
    if W.shape[0] % 2:
        raise ParseError(f"observations need 2F rows, found {W.shape[0]}", None, path)
    F = W.shape[0] // 2

    if "visibility" in sections:
        vis = np.array(sections["visibility"])
        if vis.shape[0] != F or not np.all((vis == 0) | (vis == 1)):
            raise ParseError(f"visibility needs {F} rows of 0/1 flags", None, path)
        Z = np.repeat(vis.astype(bool), 2, axis=0)
    else:
        Z = np.ones_like(W, dtype=bool)

    gt = None
    if "ground_truth" in sections:
        G = np.array(sections["ground_truth"]) if sections["ground_truth"] else np.empty((0, W.shape[1]))
        if G.shape[0] == 3 * F:
            gt = G
        else:
            log.warning("%s: ground truth has %d rows, expected %d; ignoring it", path, G.shape[0], 3 * F)

    cams = None
    if "cameras" in sections:
        Q = np.array(sections["cameras"]).reshape(-1, 4)
        if Q.shape[0] == F:
            cams = CameraSequence(Q)
        else:
            log.warning("%s: %d cameras for %d frames; ignoring them", path, Q.shape[0], F)
    return MocapData(MaskedObservations(np.where(Z, W, 0.0), Z), gt, cams)


def load_labeled(path, delimiter=","):
    """Samples as rows with the class label in the last column.

    Lines starting with ``#`` are skipped. Returns data as d x N.
    """
    data, labels = [], []
    width = None
    with open(path) as fh:
        for lineno, text in enumerate(fh, start=1):
            text = text.strip()
            if not text or text.startswith("#"):
                continue
            fields = text.split(delimiter)
            if width is None:
                width = len(fields)
                if width < 2:
                    raise ParseError("need at least one feature and a label", lineno, path)
            if len(fields) != width:
                raise ParseError(f"expected {width} fields, found {len(fields)}", lineno, path)
            data.append(_parse_row(",".join(fields[:-1]), lineno, path))
            labels.append(fields[-1].strip())
    if not data:
        raise ParseError("no samples", None, path)
    labels = np.array(labels)
    try:
        labels = labels.astype(int)
    except ValueError:
        pass
    return LabeledData(np.array(data).T, labels)


def save_labeled(path, data):
    with open(path, "w") as fh:
        fh.write("# features..., label\n")
        for x, y in zip(data.data.T, data.labels):
            fh.write(_format_row(x) + f",{y}\n")

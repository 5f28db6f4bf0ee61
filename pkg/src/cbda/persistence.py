"""On-disk formats: active-label files (text and binary) and run manifests.

Text active-label file::

    # cbda-active-labels 1
    # num_images=100 height=64 width=64 num_classes=5 manifest=<id>
    image_index<TAB>row<TAB>col<TAB>true_class<TAB>al_iteration<TAB>pseudo_class
    0<TAB>3<TAB>7<TAB>2<TAB>1<TAB>2
    ...

Records are sorted by ``(image_index, row, col)``; ``pseudo_class`` is -1 when
unknown.  The binary variant is ``MAGIC``, a little-endian uint32 header
length, a JSON header, a uint64 record count and packed int64 records.
"""

from __future__ import annotations

import hashlib
import io
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import ActiveLabelStore
from .errors import ConfigError

LABEL_SCHEMA_VERSION = 1
MANIFEST_SCHEMA_VERSION = 1
TEXT_MAGIC = "# cbda-active-labels"
BINARY_MAGIC = b"CBDAAL\x00\x01"
COLUMNS = ("image_index", "row", "col", "true_class", "al_iteration", "pseudo_class")

_BIN_DTYPE = np.dtype([(name, "<i8") for name in COLUMNS])


def canonical_hash(obj) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


# ---------------------------------------------------------------------------
# active labels


def _header(store: ActiveLabelStore, manifest_id: str) -> dict:
    s = store.shape
    return {
        "version": LABEL_SCHEMA_VERSION,
        "num_images": s.num_images,
        "height": s.height,
        "width": s.width,
        "num_classes": s.num_classes,
        "manifest": manifest_id,
    }


def write_active_labels(store: ActiveLabelStore, path, manifest_id: str = "", binary: bool = False) -> Path:
    path = Path(path)
    rec = store.records()
    header = _header(store, manifest_id)
    if binary:
        head = json.dumps(header, sort_keys=True).encode()
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC)
            fh.write(struct.pack("<I", len(head)))
            fh.write(head)
            fh.write(struct.pack("<Q", len(rec)))
            fh.write(rec.astype(_BIN_DTYPE).tobytes())
        return path
    buf = io.StringIO()
    buf.write(f"{TEXT_MAGIC} {LABEL_SCHEMA_VERSION}\n")
    buf.write(
        "# num_images={num_images} height={height} width={width} "
        "num_classes={num_classes} manifest={manifest}\n".format(**header)
    )
    buf.write("\t".join(COLUMNS) + "\n")
    if len(rec):
        table = np.column_stack([rec[c] for c in COLUMNS])
        np.savetxt(buf, table, fmt="%d", delimiter="\t")
    path.write_text(buf.getvalue())
    return path


def read_active_labels(path) -> tuple[ActiveLabelStore, dict]:
    """Load an active-label file (either variant); returns ``(store, header)``."""
    path = Path(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(BINARY_MAGIC))
        if magic == BINARY_MAGIC:
            (n_head,) = struct.unpack("<I", fh.read(4))
            header = json.loads(fh.read(n_head))
            (count,) = struct.unpack("<Q", fh.read(8))
            rec = np.frombuffer(fh.read(count * _BIN_DTYPE.itemsize), dtype=_BIN_DTYPE)
            if len(rec) != count:
                raise ValueError(f"{path}: truncated binary active-label file")
            columns = {c: rec[c] for c in COLUMNS}
        else:
            header, columns = _read_text(path)
    store = ActiveLabelStore(header["num_images"], header["height"], header["width"], header["num_classes"])
    if len(columns["row"]):
        pseudo = columns["pseudo_class"]
        for it in np.unique(columns["al_iteration"]):
            sel = columns["al_iteration"] == it
            store.add(
                columns["image_index"][sel], columns["row"][sel], columns["col"][sel],
                columns["true_class"][sel], int(it), pseudo[sel],
            )
    return store, header


def _read_text(path: Path):
    with open(path) as fh:
        first = fh.readline()
        if not first.startswith(TEXT_MAGIC):
            raise ValueError(f"{path}: not an active-label file")
        meta = fh.readline().lstrip("#").split()
        header = {"version": int(first.split()[-1])}
        for item in meta:
            key, _, value = item.partition("=")
            header[key] = value if key == "manifest" else int(value)
        cols = fh.readline().strip().split("\t")
        if tuple(cols) != COLUMNS:
            raise ValueError(f"{path}: unexpected columns {cols}")
        body = fh.read()
    if body.strip():
        table = np.loadtxt(io.StringIO(body), dtype=np.int64, delimiter="\t", ndmin=2)
    else:
        table = np.empty((0, len(COLUMNS)), dtype=np.int64)
    return header, {c: table[:, j] for j, c in enumerate(COLUMNS)}


# ---------------------------------------------------------------------------
# manifests


@dataclass
class RunManifest:
    config_hash: str
    scenario_hash: str
    seed: int
    strategy: str | None
    heuristic: str | None
    schedule: dict
    artifacts: dict = field(default_factory=dict)
    tool_version: str = ""
    schema_versions: dict = field(
        default_factory=lambda: {"manifest": MANIFEST_SCHEMA_VERSION, "active_labels": LABEL_SCHEMA_VERSION}
    )
    extra: dict = field(default_factory=dict)

    @property
    def manifest_id(self) -> str:
        return canonical_hash(asdict(self))[:16]

    def to_dict(self) -> dict:
        return {"manifest_id": self.manifest_id, **asdict(self)}

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")
        return path

    @classmethod
    def read(cls, path) -> "RunManifest":
        data = json.loads(Path(path).read_text())
        stored_id = data.pop("manifest_id", None)
        try:
            manifest = cls(**data)
        except TypeError as exc:
            raise ConfigError(f"{path}: malformed manifest ({exc})", "manifest") from exc
        if stored_id is not None and stored_id != manifest.manifest_id:
            raise ConfigError(f"{path}: manifest id does not match its content", "manifest_id")
        return manifest


def save_ground_truth(maps: np.ndarray, path) -> Path:
    path = Path(path)
    with open(path, "wb") as fh:
        np.save(fh, np.ascontiguousarray(maps), allow_pickle=False)
    return path


def load_ground_truth(path) -> np.ndarray:
    return np.load(path, allow_pickle=False)

"""Scenario dataset loaders with a uniform sample model.

Three layouts are supported:

* MVTec-style image tree: ``<root>/<category>/train/good`` plus
  ``<root>/<category>/test/<class>`` where class ``good`` is label 0 and
  every other class is an anomaly type.
* Stripped-wire image tree: one directory per quality class under the
  root; the class named ``normal`` (or ``good``) is label 0. The first
  file of each class is kept as a reference sample.
* Crimp curve CSV: ``id,label,defect_class,v0..v499``; the first three
  non-anomalous curves in file order become the few-shot references.
* Crimp curve directory: one single-column file per curve, grouped into
  per-class subdirectories (class ``ok``/``good``/``normal`` is label 0).

Everything is ordered lexicographically so reloading an unchanged tree is
byte-for-byte deterministic, and reference/test splits are disjoint by
construction.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

from .errors import EmptyPoolError, FormatError, LayoutError
from .features import CURVE_LENGTH, Curve

IMAGE_EXTENSIONS = {
    ".png": "image/png",
    ".jpg": "image/jpeg",
    ".jpeg": "image/jpeg",
    ".bmp": "image/bmp",
    ".tif": "image/tiff",
    ".tiff": "image/tiff",
}

NORMAL_CLASS_NAMES = ("good", "normal", "ok")
CRIMP_REFERENCE_COUNT = 3


class Split(Enum):
    REFERENCE = "reference"
    TEST = "test"


@dataclass(frozen=True)
class ImageSource:
    path: str
    media_type: str


@dataclass(frozen=True)
class CurveSource:
    curve_id: str


@dataclass(frozen=True)
class SampleRecord:
    id: str
    source: ImageSource | CurveSource
    label: int
    defect_class: str | None
    split: Split


@dataclass(frozen=True)
class DatasetManifest:
    scenario: str
    root: str
    counts: dict[tuple[int, str | None, Split], int]
    checksum: str

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "root": self.root,
            "counts": {
                f"{label}|{defect or ''}|{split.value}": n
                for (label, defect, split), n in sorted(
                    self.counts.items(), key=lambda kv: (kv[0][0], kv[0][1] or "", kv[0][2].value)
                )
            },
            "checksum": self.checksum,
        }

    def write_json(self, path: Path | str) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n", encoding="utf-8"
        )


@dataclass
class DatasetBundle:
    manifest: DatasetManifest
    samples: list[SampleRecord]
    curves: dict[str, Curve] = field(default_factory=dict)

    @property
    def reference_samples(self) -> list[SampleRecord]:
        return [s for s in self.samples if s.split is Split.REFERENCE]

    @property
    def test_samples(self) -> list[SampleRecord]:
        return [s for s in self.samples if s.split is Split.TEST]


def _count(samples: list[SampleRecord]) -> dict:
    counts: dict[tuple[int, str | None, Split], int] = {}
    for s in samples:
        key = (s.label, s.defect_class, s.split)
        counts[key] = counts.get(key, 0) + 1
    return counts


def _file_list_checksum(paths: list[Path], root: Path) -> str:
    names = "\n".join(sorted(str(p.relative_to(root)) for p in paths))
    return hashlib.sha256(names.encode("utf-8")).hexdigest()


def _image_files(directory: Path) -> list[Path]:
    return sorted(
        p for p in directory.iterdir() if p.is_file() and p.suffix.lower() in IMAGE_EXTENSIONS
    )


def _image_source(path: Path) -> ImageSource:
    return ImageSource(path=str(path), media_type=IMAGE_EXTENSIONS[path.suffix.lower()])


def load_mvtec_layout(root: Path | str, category: str) -> DatasetBundle:
    """MVTec-style tree: train/good references, test/<class> queries."""
    root = Path(root)
    base = root / category
    train_good = base / "train" / "good"
    test_dir = base / "test"
    if not train_good.is_dir() or not test_dir.is_dir():
        raise LayoutError(f"expected {category}/train/good and {category}/test under {root}")

    samples: list[SampleRecord] = []
    all_files: list[Path] = []

    for path in _image_files(train_good):
        all_files.append(path)
        samples.append(
            SampleRecord(
                id=f"train/good/{path.name}",
                source=_image_source(path),
                label=0,
                defect_class=None,
                split=Split.REFERENCE,
            )
        )

    class_dirs = sorted(p for p in test_dir.iterdir() if p.is_dir())
    test_count = 0
    for class_dir in class_dirs:
        is_good = class_dir.name in NORMAL_CLASS_NAMES
        for path in _image_files(class_dir):
            all_files.append(path)
            test_count += 1
            samples.append(
                SampleRecord(
                    id=f"test/{class_dir.name}/{path.name}",
                    source=_image_source(path),
                    label=0 if is_good else 1,
                    defect_class=None if is_good else class_dir.name,
                    split=Split.TEST,
                )
            )
    if test_count == 0:
        raise LayoutError(f"no test images under {test_dir}")

    manifest = DatasetManifest(
        scenario="cable",
        root=str(base),
        counts=_count(samples),
        checksum=_file_list_checksum(all_files, base),
    )
    return DatasetBundle(manifest=manifest, samples=samples)


def select_one_shot_reference(bundle: DatasetBundle) -> SampleRecord:
    """The lexicographically first reference-pool sample; the rest of the
    pool is excluded from every experiment."""
    pool = bundle.reference_samples
    if not pool:
        raise EmptyPoolError("reference pool is empty")
    return min(pool, key=lambda s: s.id)


def load_stripped_wire(root: Path | str) -> DatasetBundle:
    """Per-class directories; first file of each class is the reference."""
    root = Path(root)
    if not root.is_dir():
        raise LayoutError(f"{root} is not a directory")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not any(p.name in NORMAL_CLASS_NAMES for p in class_dirs):
        raise LayoutError(f"no normal-class directory (one of {NORMAL_CLASS_NAMES}) under {root}")

    samples: list[SampleRecord] = []
    all_files: list[Path] = []
    for class_dir in class_dirs:
        files = _image_files(class_dir)
        if not files:
            raise LayoutError(f"class directory {class_dir} has no images")
        is_good = class_dir.name in NORMAL_CLASS_NAMES
        for i, path in enumerate(files):
            all_files.append(path)
            samples.append(
                SampleRecord(
                    id=f"{class_dir.name}/{path.name}",
                    source=_image_source(path),
                    label=0 if is_good else 1,
                    defect_class=None if is_good else class_dir.name,
                    split=Split.REFERENCE if i == 0 else Split.TEST,
                )
            )

    manifest = DatasetManifest(
        scenario="stripped_wire",
        root=str(root),
        counts=_count(samples),
        checksum=_file_list_checksum(all_files, root),
    )
    return DatasetBundle(manifest=manifest, samples=samples)


def downscale_images(bundle: DatasetBundle, out_dir: Path | str, max_dimension: int) -> DatasetBundle:
    """Materialize resized copies of every image sample for cost control.

    Off by default and never used in benchmark mode; original files are
    left untouched and the returned bundle points at the copies.
    """
    from PIL import Image  # optional dependency, only needed for this flag

    out_dir = Path(out_dir)
    samples: list[SampleRecord] = []
    for s in bundle.samples:
        if not isinstance(s.source, ImageSource):
            samples.append(s)
            continue
        src = Path(s.source.path)
        dst = out_dir / s.id
        dst.parent.mkdir(parents=True, exist_ok=True)
        with Image.open(src) as img:
            if max(img.size) > max_dimension:
                img.thumbnail((max_dimension, max_dimension))
                img.save(dst)
            else:
                dst.write_bytes(src.read_bytes())
        samples.append(
            SampleRecord(
                id=s.id,
                source=ImageSource(path=str(dst), media_type=s.source.media_type),
                label=s.label,
                defect_class=s.defect_class,
                split=s.split,
            )
        )
    return DatasetBundle(manifest=bundle.manifest, samples=samples, curves=bundle.curves)


def load_crimp_csv(path: Path | str) -> DatasetBundle:
    """Curve CSV; the first three non-anomalous rows become references."""
    path = Path(path)
    curves: dict[str, Curve] = {}
    rows: list[tuple[str, int, str | None]] = []
    with path.open(newline="", encoding="utf-8") as handle:
        reader = csv.reader(handle)
        header = next(reader, None)
        if header is None:
            raise FormatError(f"{path} is empty")
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3 + CURVE_LENGTH:
                raise FormatError(
                    f"{path}:{line_no}: expected {3 + CURVE_LENGTH} columns, found {len(row)}"
                )
            curve_id, label_text, defect = row[0], row[1], row[2] or None
            if label_text not in ("0", "1"):
                raise FormatError(f"{path}:{line_no}: label must be 0 or 1, got {label_text!r}")
            try:
                values = tuple(float(v) for v in row[3:])
            except ValueError as exc:
                raise FormatError(f"{path}:{line_no}: non-numeric value ({exc})") from None
            label = int(label_text)
            curves[curve_id] = Curve(values=values, id=curve_id, label=label, defect_class=defect)
            rows.append((curve_id, label, defect))

    ok_seen = 0
    samples: list[SampleRecord] = []
    for curve_id, label, defect in rows:
        if label == 0 and ok_seen < CRIMP_REFERENCE_COUNT:
            split = Split.REFERENCE
            ok_seen += 1
        else:
            split = Split.TEST
        samples.append(
            SampleRecord(
                id=curve_id,
                source=CurveSource(curve_id=curve_id),
                label=label,
                defect_class=defect,
                split=split,
            )
        )
    if ok_seen < CRIMP_REFERENCE_COUNT:
        raise FormatError(
            f"{path}: need at least {CRIMP_REFERENCE_COUNT} non-anomalous curves for references"
        )

    manifest = DatasetManifest(
        scenario="crimp_features",
        root=str(path),
        counts=_count(samples),
        checksum=hashlib.sha256(path.read_bytes()).hexdigest(),
    )
    return DatasetBundle(manifest=manifest, samples=samples, curves=curves)


def load_crimp_dir(root: Path | str) -> DatasetBundle:
    """One-file-per-curve variant: per-class subdirectories, one force value
    per line; the first three normal-class curves become references."""
    root = Path(root)
    if not root.is_dir():
        raise LayoutError(f"{root} is not a directory")
    class_dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not any(p.name in NORMAL_CLASS_NAMES for p in class_dirs):
        raise LayoutError(f"no normal-class directory (one of {NORMAL_CLASS_NAMES}) under {root}")

    curves: dict[str, Curve] = {}
    rows: list[tuple[str, int, str | None]] = []
    all_files: list[Path] = []
    for class_dir in class_dirs:
        files = sorted(p for p in class_dir.iterdir() if p.is_file())
        if not files:
            raise LayoutError(f"class directory {class_dir} has no curve files")
        is_good = class_dir.name in NORMAL_CLASS_NAMES
        for path in files:
            all_files.append(path)
            lines = [line for line in path.read_text(encoding="utf-8").splitlines() if line.strip()]
            if len(lines) != CURVE_LENGTH:
                raise FormatError(f"{path}: expected {CURVE_LENGTH} values, found {len(lines)}")
            try:
                values = tuple(float(v) for v in lines)
            except ValueError as exc:
                raise FormatError(f"{path}: non-numeric value ({exc})") from None
            curve_id = f"{class_dir.name}/{path.stem}"
            label = 0 if is_good else 1
            defect = None if is_good else class_dir.name
            curves[curve_id] = Curve(values=values, id=curve_id, label=label, defect_class=defect)
            rows.append((curve_id, label, defect))

    ok_seen = 0
    samples: list[SampleRecord] = []
    for curve_id, label, defect in rows:
        if label == 0 and ok_seen < CRIMP_REFERENCE_COUNT:
            split = Split.REFERENCE
            ok_seen += 1
        else:
            split = Split.TEST
        samples.append(
            SampleRecord(
                id=curve_id,
                source=CurveSource(curve_id=curve_id),
                label=label,
                defect_class=defect,
                split=split,
            )
        )
    if ok_seen < CRIMP_REFERENCE_COUNT:
        raise FormatError(
            f"{root}: need at least {CRIMP_REFERENCE_COUNT} normal curves for references"
        )

    manifest = DatasetManifest(
        scenario="crimp_features",
        root=str(root),
        counts=_count(samples),
        checksum=_file_list_checksum(all_files, root),
    )
    return DatasetBundle(manifest=manifest, samples=samples, curves=curves)


def override_references(bundle: DatasetBundle, reference_ids: list[str]) -> DatasetBundle:
    """Re-split with an explicit reference set instead of the first-file rule.

    Every listed id becomes a reference; everything else is a test sample.
    Partitions stay disjoint and exhaustive.
    """
    wanted = set(reference_ids)
    known = {s.id for s in bundle.samples}
    missing = wanted - known
    if missing:
        raise LayoutError(f"unknown reference id(s): {', '.join(sorted(missing))}")
    samples = [
        SampleRecord(
            id=s.id,
            source=s.source,
            label=s.label,
            defect_class=s.defect_class,
            split=Split.REFERENCE if s.id in wanted else Split.TEST,
        )
        for s in bundle.samples
    ]
    manifest = DatasetManifest(
        scenario=bundle.manifest.scenario,
        root=bundle.manifest.root,
        counts=_count(samples),
        checksum=bundle.manifest.checksum,
    )
    return DatasetBundle(manifest=manifest, samples=samples, curves=bundle.curves)

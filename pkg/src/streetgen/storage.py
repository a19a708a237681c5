"""File formats: channel archives, datasets, checkpoints, vector I/O.

All array containers are zip archives with a ``meta.json`` sidecar and one
raw binary file per channel (row-major, little-endian; float32 for value
channels, uint8 for code/binary channels). Zip entries carry a fixed
timestamp so identical content produces identical bytes.
"""

from __future__ import annotations

import hashlib
import io
import json
import zipfile
from pathlib import Path
from typing import Any

import numpy as np
from PIL import Image

from .geometry import (
    HIERARCHY_INTENSITY,
    MapFrame,
    PatternType,
    RoadClass,
    StreetSegment,
    pattern_code_table,
)
from .rasterize import MultiChannelMap

_ZIP_DATE = (1980, 1, 1, 0, 0, 0)

MAP_FORMAT = "streetgen-map"
RECORD_FORMAT = "streetgen-record"
CHECKPOINT_FORMAT = "streetgen-checkpoint"
DATASET_FORMAT = "streetgen-dataset"
FORMAT_VERSION = 1

#: dtype code per channel name; anything not listed is stored as float32.
CHANNEL_DTYPES: dict[str, str] = {
    "pattern": "<u1",
    "mask": "<u1",
    "junctions": "<u1",
    "pattern_guidance": "<u1",
}


def _write_entry(zf: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_ZIP_DATE)
    info.compress_type = zipfile.ZIP_DEFLATED
    zf.writestr(info, data)


def _json_bytes(obj: Any) -> bytes:
    return json.dumps(obj, indent=1, sort_keys=True).encode("utf-8")


def save_channel_archive(path, channels: dict[str, np.ndarray], meta: dict) -> None:
    """Write named 2-D arrays plus a JSON sidecar into one zip archive."""
    path = Path(path)
    channel_meta = []
    blobs = {}
    for name, arr in channels.items():
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise ValueError(f"channel '{name}' must be 2-D, got shape {arr.shape}")
        dtype = CHANNEL_DTYPES.get(name, "<f4")
        data = np.ascontiguousarray(arr.astype(np.dtype(dtype), copy=False))
        channel_meta.append(
            {
                "name": name,
                "dtype": dtype,
                "shape": list(arr.shape),
                "file": f"channels/{name}.bin",
            }
        )
        blobs[f"channels/{name}.bin"] = data.tobytes(order="C")
    sidecar = dict(meta)
    sidecar["channels"] = channel_meta
    path.parent.mkdir(parents=True, exist_ok=True)
    with zipfile.ZipFile(path, "w") as zf:
        _write_entry(zf, "meta.json", _json_bytes(sidecar))
        for name in sorted(blobs):
            _write_entry(zf, name, blobs[name])


def load_channel_archive(path) -> tuple[dict[str, np.ndarray], dict]:
    with zipfile.ZipFile(path, "r") as zf:
        meta = json.loads(zf.read("meta.json"))
        channels = {}
        for entry in meta["channels"]:
            raw = zf.read(entry["file"])
            arr = np.frombuffer(raw, dtype=np.dtype(entry["dtype"]))
            channels[entry["name"]] = arr.reshape(entry["shape"]).copy()
    return channels, meta


def save_map(path, mc_map: MultiChannelMap) -> None:
    frame = mc_map.frame
    meta = {
        "format": MAP_FORMAT,
        "version": FORMAT_VERSION,
        "origin": list(frame.origin),
        "resolution": frame.resolution,
        "width": frame.width,
        "height": frame.height,
        "hierarchy_intensity": {c.value: v for c, v in HIERARCHY_INTENSITY.items()},
        "pattern_codes": pattern_code_table(),
    }
    save_channel_archive(path, mc_map.channels, meta)


def load_map(path) -> MultiChannelMap:
    channels, meta = load_channel_archive(path)
    if meta.get("format") != MAP_FORMAT:
        raise ValueError(f"{path} is not a {MAP_FORMAT} archive")
    frame = MapFrame(
        origin=tuple(meta["origin"]),
        resolution=meta["resolution"],
        width=meta["width"],
        height=meta["height"],
    )
    return MultiChannelMap(frame=frame, channels=channels)


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


# ---------------------------------------------------------------------------
# GeoJSON-style vector I/O
# ---------------------------------------------------------------------------


def streets_to_geojson(segments: list[StreetSegment]) -> dict:
    return {
        "type": "FeatureCollection",
        "features": [
            {
                "type": "Feature",
                "geometry": {
                    "type": "LineString",
                    "coordinates": [[x, y] for x, y in seg.polyline],
                },
                "properties": {"highway": seg.road_class.value},
            }
            for seg in segments
        ],
    }


def streets_from_geojson(doc: dict) -> list[StreetSegment]:
    segments = []
    for i, feat in enumerate(doc.get("features", [])):
        geom = feat.get("geometry", {})
        if geom.get("type") != "LineString":
            continue
        props = feat.get("properties", {}) or {}
        highway = props.get("highway", "residential")
        try:
            road_class = RoadClass(highway)
        except ValueError as exc:
            raise ValueError(
                f"feature {i}: unknown highway class {highway!r}"
            ) from exc
        segments.append(
            StreetSegment(
                polyline=tuple((x, y) for x, y in geom["coordinates"]),
                road_class=road_class,
            )
        )
    return segments


def patterns_to_geojson(polygons: list[tuple[Any, PatternType]]) -> dict:
    features = []
    for poly, ptype in polygons:
        verts = poly.vertices if hasattr(poly, "vertices") else tuple(poly)
        ring = [[x, y] for x, y in verts]
        ring.append(ring[0])
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "Polygon", "coordinates": [ring]},
                "properties": {"pattern": PatternType(ptype).name.lower()},
            }
        )
    return {"type": "FeatureCollection", "features": features}


def patterns_from_geojson(doc: dict) -> list[tuple[tuple, PatternType]]:
    out = []
    codes = pattern_code_table()
    for i, feat in enumerate(doc.get("features", [])):
        geom = feat.get("geometry", {})
        if geom.get("type") != "Polygon":
            continue
        props = feat.get("properties", {}) or {}
        name = props.get("pattern", "unlabeled")
        if name not in codes:
            raise ValueError(f"feature {i}: unknown pattern type {name!r}")
        ring = geom["coordinates"][0]
        out.append((tuple((x, y) for x, y in ring), PatternType(codes[name])))
    return out


def write_geojson(path, doc: dict) -> None:
    Path(path).write_text(json.dumps(doc, indent=1))


def read_geojson(path) -> dict:
    return json.loads(Path(path).read_text())


# ---------------------------------------------------------------------------
# DEM raster input
# ---------------------------------------------------------------------------


def load_dem(path, scale: float = 1.0, offset: float = 0.0) -> np.ndarray:
    """Load a DEM from a 16-bit grayscale PNG or a channel archive.

    PNG values are mapped to meters as ``value * scale + offset``.
    """
    path = Path(path)
    if path.suffix.lower() == ".png":
        img = Image.open(path)
        arr = np.asarray(img, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"DEM PNG must be single-channel, got shape {arr.shape}")
        return (arr * scale + offset).astype(np.float32)
    channels, _ = load_channel_archive(path)
    if "elevation" not in channels:
        raise ValueError(f"{path} holds no 'elevation' channel")
    return channels["elevation"].astype(np.float32)


def save_dem_png(path, elevation: np.ndarray, scale: float, offset: float) -> None:
    """Store elevation as 16-bit PNG with the inverse of ``load_dem`` scaling."""
    values = (np.asarray(elevation, dtype=np.float64) - offset) / scale
    if values.min() < 0 or values.max() > 65535:
        raise ValueError("scaled elevation exceeds the uint16 PNG range")
    img = Image.fromarray(np.round(values).astype(np.uint16))
    img.save(path)


# ---------------------------------------------------------------------------
# Checkpoints: named parameter tensors + architecture JSON + run metadata
# ---------------------------------------------------------------------------


def save_checkpoint(
    path,
    params: dict[str, dict[str, np.ndarray]],
    specs: dict[str, dict],
    meta: dict,
) -> None:
    """``params``/``specs`` are keyed by network name (generator, discriminator)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    full_meta = {"format": CHECKPOINT_FORMAT, "version": FORMAT_VERSION, **meta}
    with zipfile.ZipFile(path, "w") as zf:
        _write_entry(zf, "meta.json", _json_bytes(full_meta))
        for net, spec in sorted(specs.items()):
            _write_entry(zf, f"{net}/spec.json", _json_bytes(spec))
        for net in sorted(params):
            for name in sorted(params[net]):
                buf = io.BytesIO()
                np.save(buf, np.asarray(params[net][name]))
                _write_entry(zf, f"{net}/params/{name}.npy", buf.getvalue())


def load_checkpoint(path) -> tuple[dict, dict, dict]:
    """Returns (params per net, specs per net, meta)."""
    params: dict[str, dict[str, np.ndarray]] = {}
    specs: dict[str, dict] = {}
    try:
        with zipfile.ZipFile(path, "r") as zf:
            meta = json.loads(zf.read("meta.json"))
            if meta.get("format") != CHECKPOINT_FORMAT:
                raise ValueError(f"{path} is not a {CHECKPOINT_FORMAT} archive")
            for entry in zf.namelist():
                parts = entry.split("/")
                if entry.endswith("/spec.json"):
                    specs[parts[0]] = json.loads(zf.read(entry))
                elif len(parts) == 3 and parts[1] == "params":
                    net, _, fname = parts
                    arr = np.load(io.BytesIO(zf.read(entry)))
                    params.setdefault(net, {})[fname[: -len(".npy")]] = arr
    except (zipfile.BadZipFile, KeyError, json.JSONDecodeError) as exc:
        raise ValueError(f"corrupt checkpoint {path}: {exc}") from exc
    return params, specs, meta

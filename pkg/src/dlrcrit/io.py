"""File formats: material and geometry JSON, run records and trace CSV.

Material file::

    {"groups": G, "chi": [...],
     "materials": [{"name": ..., "D": [...], "sigma_t": [...],
                    "nu_sigma_f": [...], "sigma_s": [[...], ...]}]}

``sigma_s[g_from][g_to]``. Geometry file::

    {"layers": [{"material": "fuel" | 0 | null, "thickness": 5.0}, ...]}

where ``null`` marks a hollow layer.
"""
import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import InvalidInputError, ValidationError
from .reactor import LayeredGeometry, Material, MaterialLibrary
from .trace import IterationTrace, TraceRecord

TRACE_HEADER = ("n", "k", "delta", "rank", "theta", "cost")
RUN_SCHEMA = "dlrcrit.run/1"


def _load_json(path, what):
    path = Path(path)
    if not path.is_file():
        raise InvalidInputError(f"{what} file not found: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise InvalidInputError(f"{path}: not valid JSON ({exc})") from exc


def _field(obj, key, path):
    if not isinstance(obj, dict):
        raise ValidationError(f"{path}: expected an object", path)
    if key not in obj:
        raise ValidationError(f"{path}.{key}: missing field", f"{path}.{key}")
    return obj[key]


def _numbers(value, path, shape):
    try:
        arr = np.array(value, dtype=np.float64)
    except (TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: expected numbers ({exc})", path) from exc
    if arr.shape != shape:
        raise ValidationError(f"{path}: expected shape {shape}, got {arr.shape}", path)
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{path}: non-finite entry", path)
    return arr


def library_from_dict(data):
    """Build a :class:`MaterialLibrary` from the parsed material schema."""
    G = _field(data, "groups", "$")
    if isinstance(G, bool) or not isinstance(G, int) or G < 1:
        raise ValidationError(f"$.groups: expected a positive integer, got {G!r}", "$.groups")
    chi = _numbers(_field(data, "chi", "$"), "$.chi", (G,))
    mats = _field(data, "materials", "$")
    if not isinstance(mats, list) or not mats:
        raise ValidationError("$.materials: expected a non-empty list", "$.materials")
    out = []
    for i, m in enumerate(mats):
        p = f"$.materials[{i}]"
        name = _field(m, "name", p)
        if not isinstance(name, str):
            raise ValidationError(f"{p}.name: expected a string", f"{p}.name")
        vec = {key: _numbers(_field(m, key, p), f"{p}.{key}", (G,))
               for key in ("D", "sigma_t", "nu_sigma_f")}
        ss = _numbers(_field(m, "sigma_s", p), f"{p}.sigma_s", (G, G))
        out.append(Material(name, vec["D"], vec["sigma_t"], ss, vec["nu_sigma_f"]))
    return MaterialLibrary(chi, tuple(out))


def parse_materials(path, return_extra=False):
    """Read a material file. ``return_extra`` also returns unknown top-level keys."""
    data = _load_json(path, "materials")
    lib = library_from_dict(data)
    if return_extra:
        extra = {k: v for k, v in data.items() if k not in ("groups", "chi", "materials")}
        return lib, extra
    return lib


def library_to_dict(library):
    return {
        "groups": library.group_count,
        "chi": library.chi.tolist(),
        "materials": [
            {"name": m.name, "D": m.diffusion.tolist(), "sigma_t": m.sigma_t.tolist(),
             "nu_sigma_f": m.nu_sigma_f.tolist(), "sigma_s": m.sigma_s.tolist()}
            for m in library.materials
        ],
    }


def serialize_materials(library, path=None):
    """Canonical JSON text of ``library``; written to ``path`` if given.

    Floats use the shortest round-trip representation, so parsing the text
    back gives bit-identical arrays.
    """
    text = json.dumps(library_to_dict(library), indent=1) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def geometry_from_dict(data, library=None):
    layers = _field(data, "layers", "$")
    if not isinstance(layers, list) or not layers:
        raise ValidationError("$.layers: expected a non-empty list", "$.layers")
    out = []
    for i, layer in enumerate(layers):
        p = f"$.layers[{i}]"
        mat = _field(layer, "material", p)
        thickness = _field(layer, "thickness", p)
        if isinstance(mat, str):
            if library is None:
                raise ValidationError(f"{p}.material: names need a library", f"{p}.material")
            try:
                mat = library.index(mat)
            except KeyError:
                raise ValidationError(f"{p}.material: unknown material {mat!r}",
                                      f"{p}.material") from None
        elif mat is not None and (isinstance(mat, bool) or not isinstance(mat, int)):
            raise ValidationError(f"{p}.material: expected name, index or null",
                                  f"{p}.material")
        if isinstance(thickness, bool) or not isinstance(thickness, (int, float)):
            raise ValidationError(f"{p}.thickness: expected a number", f"{p}.thickness")
        out.append((mat, thickness))
    geom = LayeredGeometry(tuple(out))
    if library is not None:
        used = [m for m, _ in geom.layers if m is not None]
        if max(used) >= len(library):
            raise ValidationError(f"geometry references material {max(used)}, library has "
                                  f"{len(library)}", "material index")
    return geom


def parse_geometry(path, library=None):
    return geometry_from_dict(_load_json(path, "geometry"), library)


def geometry_to_dict(geometry, library=None):
    def name(m):
        if m is None or library is None:
            return m
        return library.materials[m].name

    return {"layers": [{"material": name(m), "thickness": t} for m, t in geometry.layers]}


def serialize_geometry(geometry, library=None, path=None):
    text = json.dumps(geometry_to_dict(geometry, library), indent=1) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


def digest(obj):
    """SHA-256 of the canonical JSON form of ``obj``."""
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()


def _finite_or_str(x):
    if isinstance(x, float) and not math.isfinite(x):
        return repr(x)
    return x


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    return _finite_or_str(obj)


@dataclass
class RunRecord:
    """Self-describing record of one run.

    ``wall_time`` is kept on the object but only written to ``result.json``
    when requested, so that records of identical runs are byte-identical.
    """

    method: str
    digests: dict
    config: dict
    seeds: dict
    result: dict
    trace: list = field(default_factory=list)
    wall_time: float = None
    schema: str = RUN_SCHEMA

    def to_dict(self, include_wall_time=False):
        d = asdict(self)
        if not include_wall_time:
            d.pop("wall_time")
        return _jsonable(d)

    def write(self, path, include_wall_time=False):
        text = json.dumps(self.to_dict(include_wall_time), indent=1, sort_keys=True) + "\n"
        Path(path).write_text(text)
        return text

    @classmethod
    def read(cls, path):
        data = json.loads(Path(path).read_text())
        return cls(**data)


def trace_rows(trace):
    return [[r.n, r.k, r.delta, r.rank, r.theta, r.cost] for r in trace]


def _fmt(x):
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


def write_trace_csv(trace, path):
    """Write ``n,k,delta,rank,theta,cost`` rows at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRACE_HEADER)
        for row in trace_rows(trace):
            w.writerow([_fmt(x) for x in row])


def read_trace_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != TRACE_HEADER:
        raise InvalidInputError(f"{path}: expected header {','.join(TRACE_HEADER)}")
    records = []
    for row in rows[1:]:
        n, k, delta, rank, theta, cost = row
        cost = float(cost) if any(c in cost for c in ".eEn") else int(cost)
        records.append(TraceRecord(int(n), float(k), float(delta), int(rank), float(theta), cost))
    return IterationTrace(records)

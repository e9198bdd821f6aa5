"""Model definition files: versioned YAML schema and loader.

Schema ``sco-model/1``.  Planar models list links in topological order;
``parent`` names either ``base`` or an earlier link.  Spatial models carry
aggregate centroidal parameters only (see spatial.py).  Field errors name
the offending path, e.g. ``links[1].mass``.
"""

from __future__ import annotations

import importlib.resources
import math
import pathlib

import yaml

from .planar import ContactSpec, LinkSpec, PlanarModel
from .spatial import QuadrupedStub

SCHEMA = "sco-model/1"


class ModelFileError(ValueError):
    """Malformed model file; message names the field."""


def _need(d: dict, key: str, where: str):
    if key not in d:
        raise ModelFileError(f"{where}.{key} missing")
    return d[key]


def _num(d, key, where):
    v = _need(d, key, where)
    if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(float(v)):
        raise ModelFileError(f"{where}.{key} must be a finite number")
    return float(v)


def _pair(d, key, where):
    v = _need(d, key, where)
    if not isinstance(v, (list, tuple)) or len(v) != 2:
        raise ModelFileError(f"{where}.{key} must be a pair")
    return (float(v[0]), float(v[1]))


def _load_planar(doc: dict, name: str) -> PlanarModel:
    base = _need(doc, "base", name)
    base_mass = _num(base, "mass", "base")
    base_inertia = _num(base, "inertia", "base")
    base_com = _pair(base, "com", "base")
    links, index = [], {"base": -1}
    for k, ld in enumerate(doc.get("links", [])):
        where = f"links[{k}]"
        lname = _need(ld, "name", where)
        parent = _need(ld, "parent", where)
        if parent not in index:
            raise ModelFileError(f"{where}.parent unknown: {parent!r}")
        joint = ld.get("joint", "revolute")
        if joint not in ("revolute", "prismatic"):
            raise ModelFileError(f"{where}.joint must be revolute or prismatic")
        links.append(LinkSpec(
            name=lname, parent=index[parent], attach=_pair(ld, "attach", where),
            mount_angle=_num(ld, "mount_angle", where), joint=joint,
            mass=_num(ld, "mass", where), inertia=_num(ld, "inertia", where),
            length=_num(ld, "length", where), com=_num(ld, "com", where),
            limits=_pair(ld, "limits", where) if "limits" in ld else (-2.0 * math.pi, 2.0 * math.pi),
            torque_limit=_num(ld, "torque_limit", where) if "torque_limit" in ld else 200.0))
        index[lname] = k
    contacts = []
    for k, cd in enumerate(doc.get("contacts", [])):
        where = f"contacts[{k}]"
        link = _need(cd, "link", where)
        if link not in index:
            raise ModelFileError(f"{where}.link unknown: {link!r}")
        contacts.append(ContactSpec(name=_need(cd, "name", where),
                                    link=index[link], point=_pair(cd, "point", where)))
    if not contacts:
        raise ModelFileError("contacts must be nonempty")
    home = doc.get("home", [0.0] * len(links))
    if len(home) != len(links):
        raise ModelFileError("home must list one angle per link")
    return PlanarModel(
        name=name,
        base_mass=base_mass,
        base_inertia=base_inertia,
        base_com=base_com,
        links=links, contacts=contacts,
        mu=_num(doc, "mu", name) if "mu" in doc else 0.8,
        gravity=_num(doc, "gravity", name) if "gravity" in doc else 9.81,
        home_theta=tuple(float(v) for v in home))


def _load_spatial(doc: dict, name: str) -> QuadrupedStub:
    inertia = _need(doc, "inertia", name)
    if not isinstance(inertia, (list, tuple)) or len(inertia) != 3:
        raise ModelFileError(f"{name}.inertia must be a 3-vector diagonal")
    hips = _need(doc, "hip_offsets", name)
    if not isinstance(hips, (list, tuple)) or not hips:
        raise ModelFileError(f"{name}.hip_offsets must be a nonempty list")
    return QuadrupedStub(
        name=name, mass=_num(doc, "mass", name),
        inertia=tuple(float(v) for v in inertia),
        hip_offsets=tuple(tuple(float(x) for x in h) for h in hips),
        leg_reach=_num(doc, "leg_reach", name),
        n_joints_per_leg=int(doc.get("n_joints_per_leg", 3)),
        torque_limit=_num(doc, "torque_limit", name) if "torque_limit" in doc else 60.0,
        mu=_num(doc, "mu", name) if "mu" in doc else 0.8,
        gravity=_num(doc, "gravity", name) if "gravity" in doc else 9.81)


def load_model(source):
    """Load a model from a path, or by bundled name (hopper, biped, quadruped)."""
    path = pathlib.Path(source)
    if not path.exists():
        cand = bundled_path(str(source))
        if cand is None:
            raise ModelFileError(f"model file not found: {source}")
        path = cand
    try:
        doc = yaml.safe_load(path.read_text())
    except yaml.YAMLError as e:
        raise ModelFileError(f"{path}: not valid YAML: {e}") from e
    if not isinstance(doc, dict):
        raise ModelFileError(f"{path}: model file must be a mapping")
    if doc.get("schema") != SCHEMA:
        raise ModelFileError(f"{path}: schema must be {SCHEMA!r}, got {doc.get('schema')!r}")
    name = doc.get("name", path.stem)
    kind = doc.get("type", "planar")
    if kind == "planar":
        return _load_planar(doc, name)
    if kind == "spatial":
        return _load_spatial(doc, name)
    raise ModelFileError(f"{path}: type must be planar or spatial, got {kind!r}")


def bundled_path(name: str):
    name = name.removesuffix(".yaml")
    ref = importlib.resources.files("scotraj.models") / "data" / f"{name}.yaml"
    with importlib.resources.as_file(ref) as p:
        return p if p.exists() else None

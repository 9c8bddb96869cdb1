"""JSON model files: parsing, validation and canonical serialization.

A model document either lists variables and factors explicitly or uses a
generator / pairwise convenience block; the schema is documented in
docs/model-format.md.  Parsing produces a ModelSpec; serialization always
emits the explicit form with sorted keys, so serialize(parse(doc)) is a
canonical fixed point.
"""

import json

import numpy as np

from . import hypergraph as hg
from . import models as md
from .families import (
    DiscreteFactorFamily,
    FixedMeanGaussianPairFamily,
    FixedMeanGaussianVertexFamily,
    GaussianPairFamily,
    GaussianVertexFamily,
    InferenceFamily,
    binary_vertex,
    multinomial_vertex,
)

SCHEMA_VERSION = 1


class ModelFormatError(ValueError):
    """Malformed model document; carries json line/column when available."""


def _fail(msg):
    raise ModelFormatError(msg)


def _vertex_family_from_entry(entry):
    kind = entry.get("kind")
    if kind == "binary":
        return binary_vertex()
    if kind == "multinomial":
        if "states" not in entry:
            _fail("multinomial variable %r needs 'states'" % entry.get("id"))
        return multinomial_vertex(int(entry["states"]))
    if kind == "gaussian":
        return GaussianVertexFamily()
    if kind == "gaussian_fixed_mean":
        return FixedMeanGaussianVertexFamily(float(entry.get("mean", 0.0)))
    _fail("variable %r has unknown kind %r" % (entry.get("id"), kind))


def _factor_family(graph, fi, vertex_families):
    mem = graph.factor_members[fi]
    vfs = [vertex_families[vi] for vi in mem]
    kinds = {vf.kind for vf in vfs}
    if kinds == {"discrete"}:
        return DiscreteFactorFamily(graph.factors[fi], vfs)
    if kinds == {"gaussian"}:
        return GaussianPairFamily(graph.factors[fi], vfs)
    if kinds == {"gaussian_fixed_mean"}:
        return FixedMeanGaussianPairFamily(graph.factors[fi], vfs)
    _fail("factor %d mixes incompatible variable kinds %r" % (fi, kinds))


def _theta_from_names(ff, theta_map, factor_id):
    names = list(ff.stat_names)
    th = np.zeros(ff.dim)
    for key, val in theta_map.items():
        if key not in names:
            _fail(
                "factor %r: unknown statistic %r (known: %s)"
                % (factor_id, key, ", ".join(names))
            )
        th[names.index(key)] = float(val)
    return th


def model_from_dict(doc):
    if not isinstance(doc, dict):
        _fail("model document must be a JSON object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        _fail("unsupported schema_version %r" % version)
    if "generator" in doc:
        return _model_from_generator(doc["generator"])
    if "pairwise" in doc:
        if "factors" in doc:
            _fail("'pairwise' block cannot be combined with explicit factors")
        return _model_from_pairwise(doc)
    if "variables" not in doc or "factors" not in doc:
        _fail("model document needs 'variables' and 'factors'")

    var_entries = doc["variables"]
    vertex_ids = []
    vertex_fams = []
    for entry in var_entries:
        if "id" not in entry:
            _fail("variable entry without 'id'")
        vertex_ids.append(str(entry["id"]))
        vertex_fams.append(_vertex_family_from_entry(entry))
    if len(set(vertex_ids)) != len(vertex_ids):
        _fail("duplicate variable id")

    factor_entries = doc["factors"]
    member_lists = []
    labels = []
    for k, entry in enumerate(factor_entries):
        labels.append(str(entry.get("id", "f%d" % k)))
        members = [str(m) for m in entry.get("members", [])]
        for m in members:
            if m not in vertex_ids:
                _fail("factor %r uses unknown variable %r" % (labels[-1], m))
        member_lists.append(members)
    try:
        graph = hg.build_factor_graph(vertex_ids, member_lists)
    except hg.GraphStructureError as err:
        _fail(str(err))

    factor_fams = [
        _factor_family(graph, fi, vertex_fams)
        for fi in range(graph.n_factors)
    ]
    family = InferenceFamily(graph, vertex_fams, factor_fams)
    thetas = []
    for fi, entry in enumerate(factor_entries):
        theta_map = entry.get("theta", {})
        thetas.append(_theta_from_names(factor_fams[fi], theta_map, labels[fi]))
    try:
        return md.ModelSpec(graph, family, thetas, labels)
    except md.ModelValidationError as err:
        _fail(str(err))


def _model_from_pairwise(doc):
    """Binary pairwise convenience: J keyed by 'a,b', h keyed by 'a'."""
    var_entries = doc["variables"]
    vertex_ids = [str(e["id"]) for e in var_entries]
    for entry in var_entries:
        if entry.get("kind", "binary") != "binary":
            _fail("pairwise block needs binary variables")
    block = doc["pairwise"]
    couplings = {}
    member_lists = []
    for key, val in block.get("J", {}).items():
        pair = [p.strip() for p in key.split(",")]
        if len(pair) != 2 or any(p not in vertex_ids for p in pair):
            _fail("pairwise J key %r is not a known vertex pair" % key)
        couplings[len(member_lists)] = float(val)
        member_lists.append(pair)
    fields = {}
    for key, val in block.get("h", {}).items():
        if key not in vertex_ids:
            _fail("pairwise h key %r is not a known vertex" % key)
        fields[vertex_ids.index(key)] = float(val)
    graph = hg.build_factor_graph(vertex_ids, member_lists)
    return md.binary_pairwise_model(graph, couplings, fields or None)


def _model_from_generator(gen):
    kind = gen.get("type")
    if kind == "cycle":
        n = int(gen["n"])
        fam = gen.get("family", "binary")
        if fam == "binary":
            return md.cycle_ising_model(
                n, float(gen.get("J", 0.0)), float(gen.get("h", 0.0))
            )
        if fam == "gaussian_fixed_mean":
            return md.fixed_mean_gaussian_model(
                hg.cycle_graph(n),
                float(gen.get("cross", 0.0)),
                float(gen.get("diag", -0.5)),
            )
        _fail("cycle generator: unknown family %r" % fam)
    if kind == "complete":
        return md.complete_ising_model(
            int(gen["n"]), float(gen.get("J", 0.0)), float(gen.get("h", 0.0))
        )
    if kind == "torus":
        fam = gen.get("family", "binary")
        rows, cols = int(gen["rows"]), int(gen["cols"])
        if fam == "binary":
            return md.torus_ising_model(
                rows, cols, float(gen.get("J", 0.0)), float(gen.get("h", 0.0))
            )
        if fam == "gaussian_fixed_mean":
            return md.fixed_mean_gaussian_model(
                hg.torus_graph(rows, cols),
                float(gen.get("cross", 0.0)),
                float(gen.get("diag", -0.5)),
            )
        _fail("torus generator: unknown family %r" % fam)
    if kind == "grid_edge_torus":
        return md.grid_edge_torus_model(
            int(gen["rows"]),
            int(gen["cols"]),
            float(gen.get("K", 0.0)),
            float(gen.get("J", 0.0)),
        )
    if kind == "path":
        n = int(gen["n"])
        return md.binary_pairwise_model(
            hg.path_graph(n),
            float(gen.get("J", 0.0)),
            {vi: float(gen.get("h", 0.0)) for vi in range(n)}
            if gen.get("h")
            else None,
        )
    _fail("unknown generator type %r" % kind)


def parse_model(text):
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as err:
        raise ModelFormatError(
            "invalid JSON at line %d column %d: %s"
            % (err.lineno, err.colno, err.msg)
        ) from err
    return model_from_dict(doc)


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        return parse_model(fh.read())


def _kind_entry(vf, vid):
    if vf.kind == "discrete":
        if vf.dim == 1 and vf.n_states == 2 and vf.stat_names == ("x",):
            return {"id": vid, "kind": "binary"}
        return {"id": vid, "kind": "multinomial", "states": vf.n_states}
    if vf.kind == "gaussian":
        return {"id": vid, "kind": "gaussian"}
    return {"id": vid, "kind": "gaussian_fixed_mean", "mean": vf.mean}


def model_to_dict(model):
    g = model.graph
    variables = [
        _kind_entry(model.family.vertex_families[vi], str(g.vertices[vi]))
        for vi in range(g.n_vertices)
    ]
    factors = []
    for fi, ff in enumerate(model.family.factor_families):
        theta = {
            name: float(val)
            for name, val in zip(ff.stat_names, model.thetabar[fi])
            if val != 0.0
        }
        factors.append(
            {
                "id": model.factor_labels[fi],
                "members": [str(v) for v in g.factors[fi]],
                "theta": dict(sorted(theta.items())),
            }
        )
    return {
        "schema_version": SCHEMA_VERSION,
        "variables": variables,
        "factors": factors,
    }


def serialize_model(model):
    return json.dumps(model_to_dict(model), indent=2, sort_keys=True) + "\n"

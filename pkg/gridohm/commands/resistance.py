import itertools
import logging
from typing import Any, Dict, List, Optional, Tuple

from gridohm.exceptions import InvalidQueryError, InvalidRequestError
from gridohm.models.lattice import LatticeSpec, ResistanceQuery
from gridohm.models.request import CommandResult, Engine, OutputFormat, RunRequest
from gridohm.models.results import ResistanceResult, TorusConfig
from gridohm.services.catalog import builtin, list_catalog
from gridohm.services.lattice_model import canonical_json, load_lattice
from gridohm.services.mappings import MAPPINGS, chain_resistance, mapped_resistance
from gridohm.services.spectral_engine import spectral_engine
from gridohm.services.torus_oracle import torus_oracle
from gridohm.utils.formatting import render_csv, render_json, render_table

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_NOT_CONVERGED = 3


def resolve_lattice(req: RunRequest) -> Tuple[str, LatticeSpec]:
    """(display name, canonical spec) for the request's lattice source"""
    if req.spec_path is not None:
        if req.params:
            raise InvalidRequestError("--param only applies to catalog lattices")
        return req.spec_path, load_lattice(req.spec_path)
    return req.lattice, builtin(req.lattice, req.params).spec


def _query(req: RunRequest, spec: LatticeSpec) -> ResistanceQuery:
    if not req.has_query:
        raise InvalidRequestError("a query needs --from, --to and --offset")
    if len(req.offset) != spec.dimension:
        raise InvalidQueryError(
            f"offset {list(req.offset)} has length {len(req.offset)}, lattice dimension is {spec.dimension}"
        )
    for site in (req.source, req.target):
        if not 0 <= site < spec.p:
            raise InvalidQueryError(f"site {site + 1} does not exist (lattice has {spec.p} sites)")
    return ResistanceQuery.between(req.source, req.target, req.offset)


def _query_fields(q: ResistanceQuery) -> Dict[str, Any]:
    return {"from": q.alpha + 1, "to": q.beta + 1, "offset": list(q.offset)}


def _render(req: RunRequest, payload: Dict[str, Any], header: List[str], rows: List[List[Any]]) -> str:
    if req.output == OutputFormat.JSON:
        return render_json(payload)
    if req.output == OutputFormat.CSV:
        return render_csv(header, rows)
    return render_table(header, rows)


def _result_fields(result: ResistanceResult, timing: bool) -> Dict[str, Any]:
    fields = {
        "value": result.value,
        "error_estimate": result.error_estimate,
        "order_used": result.order_used,
        "evaluations": result.evaluations,
        "converged": result.converged,
    }
    if timing:
        fields["wall_time"] = result.wall_time
    return fields


def cmd_compute(req: RunRequest) -> CommandResult:
    """One resistance with the requested engine"""
    name, spec = resolve_lattice(req)
    q = _query(req, spec)
    payload: Dict[str, Any] = {"lattice": name, "engine": req.engine.value, "query": _query_fields(q)}
    exit_code = EXIT_OK

    if req.engine == Engine.SPECTRAL:
        result = spectral_engine.resistance(spec, q, req.quadrature)
        payload.update(_result_fields(result, req.timing))
        if not result.converged:
            exit_code = EXIT_NOT_CONVERGED
        header = ["from", "to", "offset", "value", "error_estimate", "order_used", "converged"]
        row = [q.alpha + 1, q.beta + 1, q.offset, result.value, result.error_estimate, result.order_used, result.converged]

    elif req.engine == Engine.TORUS:
        if req.torus_sizes is None:
            raise InvalidRequestError("the torus engine needs --torus sizes")
        t = TorusConfig(sizes=req.torus_sizes)
        value = torus_oracle.torus_resistance_realspace(spec, q, t)
        payload.update({"value": value, "torus": list(t.sizes)})
        header = ["from", "to", "offset", "value", "torus"]
        row = [q.alpha + 1, q.beta + 1, q.offset, value, t.sizes]

    else:
        if req.lattice not in MAPPINGS:
            raise InvalidRequestError(
                f"the mapping engine supports {sorted(MAPPINGS)}, not {name!r}"
            )
        resistance = float(req.params.get("R", 1.0))
        mapped = mapped_resistance(req.lattice, q.alpha, q.beta, *q.offset, cfg=req.quadrature, resistance=resistance)
        payload.update(
            {
                "value": mapped.value,
                "error_estimate": mapped.error_estimate,
                "constant": mapped.constant,
                "terms": [{"reference": list(idx), "coefficient": c} for idx, c in mapped.terms],
            }
        )
        header = ["from", "to", "offset", "value", "error_estimate"]
        row = [q.alpha + 1, q.beta + 1, q.offset, mapped.value, mapped.error_estimate]

    logger.info(f"Computed {name} {q.alpha + 1}->{q.beta + 1} {list(q.offset)} with {req.engine.value}")
    return CommandResult(output=_render(req, payload, header, [row]), exit_code=exit_code)


def cmd_table(req: RunRequest) -> CommandResult:
    """All ordered site pairs at every offset with components in [-max_offset, max_offset]"""
    name, spec = resolve_lattice(req)
    span = range(-req.max_offset, req.max_offset + 1)
    offsets = list(itertools.product(span, repeat=spec.dimension))
    queries = [
        ResistanceQuery.between(a, b, s)
        for s in offsets
        for a in range(spec.p)
        for b in range(spec.p)
    ]
    results = spectral_engine.resistances(spec, queries, req.quadrature)

    entries = []
    rows = []
    for q, r in zip(queries, results):
        entries.append({**_query_fields(q), **_result_fields(r, req.timing)})
        rows.append([q.alpha + 1, q.beta + 1, q.offset, r.value, r.error_estimate])
    payload = {"lattice": name, "max_offset": req.max_offset, "entries": entries}
    header = ["from", "to", "offset", "value", "error_estimate"]
    exit_code = EXIT_OK if all(r.converged for r in results) else EXIT_NOT_CONVERGED
    return CommandResult(output=_render(req, payload, header, rows), exit_code=exit_code)


def cmd_converge(req: RunRequest) -> CommandResult:
    """Spectral orders and torus sizes side by side for one query"""
    name, spec = resolve_lattice(req)
    q = _query(req, spec)
    if not req.orders and not req.sizes:
        raise InvalidRequestError("give --orders and/or --sizes")

    reference: Optional[float] = None
    if req.lattice == "chain2":
        params = {"R1": 1.0, "R2": 1.0, **req.params}
        reference = chain_resistance(q.alpha, q.beta, q.offset[0], params["R1"], params["R2"])

    spectral = spectral_engine.convergence_study(spec, q, req.orders) if req.orders else []
    tori = [TorusConfig(sizes=(n,) * spec.dimension) for n in req.sizes]
    torus = torus_oracle.convergence_to_infinite(spec, q, tori) if tori else []

    rows: List[List[Any]] = [["spectral", m, v] for m, v in spectral]
    rows += [["torus", sizes[0], v] for sizes, v in torus]
    payload: Dict[str, Any] = {
        "lattice": name,
        "query": _query_fields(q),
        "spectral": [{"order": m, "value": v} for m, v in spectral],
        "torus": [{"sizes": list(sizes), "value": v} for sizes, v in torus],
    }
    header = ["method", "size", "value"]
    if reference is not None:
        payload["closed_form"] = reference
        rows = [row + [reference] for row in rows]
        header.append("closed_form")
    return CommandResult(output=_render(req, payload, header, rows))


def cmd_catalog(
    export: Optional[str] = None,
    params: Optional[Dict[str, float]] = None,
    output: OutputFormat = OutputFormat.JSON,
) -> CommandResult:
    """List the catalog, or print one entry as a lattice document"""
    if export is not None:
        return CommandResult(output=canonical_json(builtin(export, params).spec))
    entries = list_catalog()
    rows = [[name, d, p, citation, builtin(name).description] for name, d, p, citation in entries]
    header = ["name", "dimension", "sites", "citation", "description"]
    if output == OutputFormat.JSON:
        payload = {"lattices": [dict(zip(header, row)) for row in rows]}
        return CommandResult(output=render_json(payload))
    if output == OutputFormat.CSV:
        return CommandResult(output=render_csv(header, rows))
    return CommandResult(output=render_table(header, rows))

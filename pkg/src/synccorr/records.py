"""Line-delimited JSON records with fixed float precision.

Floats are written in the shortest form that round-trips exactly by default;
``digits=6`` gives the human-readable form. Output is compact (no
spaces) and key order is the construction order, so equal inputs give
byte-identical lines.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .hull import HullCertificate
from .oracle import InclusionReport, RankedTriple, ReductionStep
from .realize import Realization, VerificationReport
from .slices import CorrelationTensor, SliceCertificate


def _float(x: float, digits: int) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    if x == 0:
        return "0"
    if digits >= 17:
        return repr(x)
    return format(x, f".{digits}g")


def dumps(obj, digits: int = 17) -> str:
    if isinstance(obj, dict):
        return "{" + ",".join(json.dumps(str(k)) + ":" + dumps(v, digits) for k, v in obj.items()) + "}"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist(), digits)
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps(v, digits) for v in obj) + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj), digits)
    if isinstance(obj, complex):
        return dumps([obj.real, obj.imag], digits)
    if obj is None:
        return "null"
    return json.dumps(str(obj))


def loads(line: str):
    return json.loads(line)


def _matrix(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def matrix_from_record(rows) -> np.ndarray:
    a = np.asarray(rows, dtype=float)
    if a.ndim != 3 or a.shape[-1] != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("a matrix record is a square array of [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


# ---------------------------------------------------------------------------
# record builders


def certificate_record(cert) -> dict:
    if isinstance(cert, SliceCertificate):
        rec = {"record": "certificate", "verdict": cert.verdict, "r": cert.r, "p": cert.p,
               "r_std": cert.r_std, "order": list(cert.slice_map.order), "flips": list(cert.slice_map.flips)}
        hull = cert.hull
        direction = cert.direction
        x = cert.x
    elif isinstance(cert, HullCertificate):
        rec = {"record": "certificate", "verdict": cert.verdict, "p": cert.p}
        hull, direction, x = cert, cert.direction, cert.x
    else:
        raise TypeError(f"not a certificate: {type(cert).__name__}")
    rec.update({"distance": hull.distance, "margin": hull.margin, "gap": hull.gap, "iterations": hull.iterations})
    if hull.weights is not None:
        rec["weights"] = hull.weights
        rec["witnesses"] = [None if w is None else {"q": w[0], "s": w[1]} for w in hull.witnesses]
    if x is not None:
        rec["x"] = x
    if direction is not None:
        rec["direction"] = direction
    return rec


def realization_record(real: Realization) -> dict:
    return {
        "record": "realization",
        "blocks": list(real.algebra.dims),
        "weights": list(real.algebra.weights),
        "dimension": real.algebra.total_dimension,
        "marginals": real.marginals,
        "correlation": real.correlation,
        "projections": [[_matrix(b) for b in blocks] for blocks in real.projections],
    }


def verification_record(rep: VerificationReport) -> dict:
    return {"record": "verification", "passed": rep.passed, "checks": dict(rep.checks), "details": dict(rep.details)}


def tensor_record(t: CorrelationTensor) -> dict:
    entries = []
    for x in range(3):
        for y in range(3):
            for i in range(2):
                for j in range(2):
                    entries.append({"x": x + 1, "y": y + 1, "i": i, "j": j, "p": float(t.values[x, y, i, j])})
    return {"record": "tensor", "valid": t.valid, "negative": [[x + 1, y + 1, i, j] for x, y, i, j in t.negative], "entries": entries}


def ranked_triple_record(rt: RankedTriple) -> dict:
    return {"record": "ranked_triple", "d": rt.d, "ranks": list(rt.ranks), "traces": rt.traces,
            "projections": [_matrix(p) for p in rt.projections]}


def ranked_triple_from_record(rec: dict) -> RankedTriple:
    if rec.get("record") != "ranked_triple":
        raise ValueError("expected a ranked_triple record")
    mats = tuple(matrix_from_record(m) for m in rec["projections"])
    return RankedTriple(int(rec["d"]), tuple(rec["ranks"]), mats)


def reduction_step_record(step: ReductionStep) -> dict:
    return {
        "record": "reduction_step",
        "d": step.d,
        "pair": [step.pair[0] + 1, step.pair[1] + 1],
        "target": step.target + 1,
        "t": step.t,
        "left": None if step.left is None else ranked_triple_record(step.left),
        "right": None if step.right is None else ranked_triple_record(step.right),
        "combined": step.combined(),
    }


def inclusion_record(rep: InclusionReport) -> dict:
    return {
        "record": "inclusion",
        "proposition": rep.proposition,
        "params": dict(rep.params),
        "trials": rep.trials,
        "violations": rep.violations,
        "inconclusive": rep.inconclusive,
        "max_outward_distance": rep.max_outward_distance,
        "eps": rep.eps,
        "wall_time": rep.wall_time,
        **rep.extra,
    }


__all__ = [
    "dumps", "loads", "matrix_from_record", "certificate_record", "realization_record",
    "verification_record", "tensor_record", "ranked_triple_record", "ranked_triple_from_record",
    "reduction_step_record", "inclusion_record",
]

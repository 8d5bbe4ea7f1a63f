"""Scenario files: loading, validation and construction of the run objects.

A scenario is a JSON object with a ``kind`` and one block named after it::

    {"kind": "affine_sim",
     "affine_sim": {"model": {"kind": "DoublyAffine", "n": 2, "A": 1.0, "B": 0.0},
                    "potential": {"kind": "DilatationHarmonic", "k": 1.0},
                    "initial": {"phi": [[1, 0], [0, 1]], "phidot": [[0, 1], [-1, 0]]},
                    "integrator": {"method": "dopri5", "rel_tol": 1e-10},
                    "tspan": [0, 10]}}

``born_infeld`` blocks hold ``e``, ``b`` and either a list ``r`` or an
``r_grid`` ``{"start", "stop", "num"}``; ``tetrad_eval`` blocks hold ``frame``,
``params``, ``points``, ``eta`` and the constants ``A``, ``B``, ``C``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .dynamics import IntegratorConfig
from .energetics import (
    DilatationHarmonic,
    IsotropicPolynomial,
    KineticModel,
    ModelKind,
    ZeroPotential,
    required_constants,
)
from .errors import ParseError, SemanticError
from .frames import BUILTIN_FRAMES
from .kinematics import InertiaParameters, KinematicState

KINDS = ("affine_sim", "born_infeld", "tetrad_eval")
POTENTIALS = ("zero", "DilatationHarmonic", "IsotropicPolynomial")
METHODS = ("dopri5", "gauss4", "rk4")
FRAME_DIMS = {"exponential-2d": 2, "affine-line": 2, "so3-leftinvariant": 3}
FRAME_PARAMS = {
    "coordinate": ("dim",),
    "exponential-2d": ("rate",),
    "affine-line": ("rate",),
    "so3-leftinvariant": ("scale",),
}

# scenario key -> InertiaParameters field
_CONSTANT_KEYS = {"A": "A_coeff", "B": "B_coeff", "I": "I_scalar", "J": "J",
                  "alpha": "alpha", "Ltensor": "Ltensor", "Rtensor": "Rtensor"}
_FIELD_KEYS = {v: k for k, v in _CONSTANT_KEYS.items()}


@dataclass(frozen=True)
class Scenario:
    kind: str
    block: dict
    name: str
    seed: Optional[int] = None
    path: Optional[str] = None


def parse_scenario_text(text: str, path: Optional[str] = None) -> dict:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno, exc.colno) from None
    if not isinstance(data, dict):
        raise ParseError("top level must be an object", path, 1, 1)
    return data


def load_scenario(path) -> Scenario:
    """Read and validate a scenario file (``OSError`` propagates for I/O failures)."""
    path = Path(path)
    text = path.read_text(encoding="utf-8")
    data = parse_scenario_text(text, str(path))
    return validate(data, default_name=path.stem, path=str(path))


class _Checker:
    def __init__(self):
        self.violations = []

    def fail(self, where, msg):
        self.violations.append(f"{where}: {msg}")

    def number(self, block, key, where, required=True, positive=False, nonneg=False, default=None):
        if key not in block:
            if required:
                self.fail(f"{where}.{key}", "missing")
            return default
        val = block[key]
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            self.fail(f"{where}.{key}", "must be a number")
            return default
        val = float(val)
        if not math.isfinite(val):
            self.fail(f"{where}.{key}", "must be finite")
        elif positive and not val > 0:
            self.fail(f"{where}.{key}", "must be positive")
        elif nonneg and val < 0:
            self.fail(f"{where}.{key}", "must be non-negative")
        return val

    def array(self, val, shape, where):
        try:
            arr = np.array(val, dtype=float)
        except (TypeError, ValueError):
            self.fail(where, "must be a numeric array")
            return None
        if isinstance(val, bool) or arr.dtype == object:
            self.fail(where, "must be a numeric array")
            return None
        if shape is not None and arr.shape != shape:
            self.fail(where, f"must have shape {list(shape)}, got {list(arr.shape)}")
            return None
        if not np.all(np.isfinite(arr)):
            self.fail(where, "must be finite")
            return None
        return arr

    def mapping(self, block, key, where, required=True):
        if key not in block:
            if required:
                self.fail(f"{where}.{key}", "missing")
            return None
        val = block[key]
        if not isinstance(val, dict):
            self.fail(f"{where}.{key}", "must be an object")
            return None
        return val


def validate(data: dict, default_name: str = "scenario", path: Optional[str] = None) -> Scenario:
    """Check a parsed scenario; raises :class:`SemanticError` listing every violation."""
    ck = _Checker()
    kind = data.get("kind")
    if kind not in KINDS:
        ck.fail("kind", f"must be one of {', '.join(KINDS)}")
        raise SemanticError(ck.violations)
    present = [k for k in KINDS if k in data]
    if present != [kind]:
        ck.fail("scenario", f"exactly one block named {kind!r} is required, found {present}")
    for key in data:
        if key not in ("kind", "seed", "output", "description") + KINDS:
            ck.fail(key, "unknown key")
    seed = data.get("seed")
    if seed is not None and (isinstance(seed, bool) or not isinstance(seed, int) or seed < 0):
        ck.fail("seed", "must be a non-negative integer")
    name = data.get("output", default_name)
    if not isinstance(name, str) or not name or "/" in name:
        ck.fail("output", "must be a plain file stem")
    block = data.get(kind)
    if not isinstance(block, dict):
        ck.fail(kind, "must be an object")
    else:
        {"affine_sim": _check_affine, "born_infeld": _check_bi, "tetrad_eval": _check_tetrad}[kind](
            block, ck, kind)
    if ck.violations:
        raise SemanticError(ck.violations)
    return Scenario(kind, block, name, seed, path)


def _model_dim(model: dict, initial: Optional[dict]) -> Optional[int]:
    n = model.get("n")
    if n is None and isinstance(initial, dict) and "phi" in initial:
        n = len(initial["phi"]) if isinstance(initial["phi"], list) else None
    return n


def _check_affine(block, ck: _Checker, where):
    model = ck.mapping(block, "model", where)
    initial = ck.mapping(block, "initial", where)
    n = None
    if model is not None:
        mw = f"{where}.model"
        try:
            mkind = ModelKind(model.get("kind"))
        except ValueError:
            ck.fail(f"{mw}.kind", f"must be one of {', '.join(k.value for k in ModelKind)}")
            mkind = None
        n = _model_dim(model, initial)
        if isinstance(n, bool) or not isinstance(n, int) or n < 1:
            ck.fail(f"{mw}.n", "must be a positive integer (or inferred from initial.phi)")
            n = None
        ck.number(model, "m", mw, required=False, positive=True)
        if mkind is not None:
            for field in required_constants(mkind):
                key = _FIELD_KEYS[field]
                if key not in model:
                    ck.fail(f"{mw}.{key}", f"required by {mkind.value}")
        for key in ("A", "B", "I", "alpha"):
            if key in model:
                ck.number(model, key, mw)
        if n is not None:
            for key, shape in (("J", (n, n)), ("Ltensor", (n * n, n * n)), ("Rtensor", (n * n, n * n)),
                               ("g", (n, n)), ("eta", (n, n))):
                if key in model:
                    arr = ck.array(model[key], shape, f"{mw}.{key}")
                    if arr is not None and key in ("J", "g", "eta") and not np.allclose(arr, arr.T):
                        ck.fail(f"{mw}.{key}", "must be symmetric")
    pot = block.get("potential", {"kind": "zero"})
    if not isinstance(pot, dict):
        ck.fail(f"{where}.potential", "must be an object")
    else:
        pw = f"{where}.potential"
        pkind = pot.get("kind", "zero")
        if pkind not in POTENTIALS:
            ck.fail(f"{pw}.kind", f"must be one of {', '.join(POTENTIALS)}")
        elif pkind == "DilatationHarmonic":
            ck.number(pot, "k", pw)
        elif pkind == "IsotropicPolynomial":
            terms = pot.get("terms")
            if not isinstance(terms, list):
                ck.fail(f"{pw}.terms", "must be a list of {degrees, coefficient} objects")
            else:
                for i, term in enumerate(terms):
                    tw = f"{pw}.terms[{i}]"
                    if not isinstance(term, dict):
                        ck.fail(tw, "must be an object")
                        continue
                    degs = term.get("degrees")
                    if not (isinstance(degs, list) and all(isinstance(d, int) and not isinstance(d, bool)
                                                           and d >= 1 for d in degs)):
                        ck.fail(f"{tw}.degrees", "must be a list of integers >= 1")
                    ck.number(term, "coefficient", tw)
    if initial is not None and n is not None:
        iw = f"{where}.initial"
        if "random" in initial:
            rnd = initial["random"]
            if not isinstance(rnd, dict):
                ck.fail(f"{iw}.random", "must be an object")
            else:
                ck.number(rnd, "scale", f"{iw}.random", required=False, positive=True)
        else:
            for key, shape, required in (("phi", (n, n), True), ("phidot", (n, n), True),
                                         ("x", (n,), False), ("v", (n,), False)):
                if key in initial:
                    arr = ck.array(initial[key], shape, f"{iw}.{key}")
                    if key == "phi" and arr is not None and abs(np.linalg.det(arr)) < 1e-13:
                        ck.fail(f"{iw}.phi", "must be nonsingular")
                elif required:
                    ck.fail(f"{iw}.{key}", "missing")
    integ = block.get("integrator", {})
    if not isinstance(integ, dict):
        ck.fail(f"{where}.integrator", "must be an object")
    else:
        iw = f"{where}.integrator"
        method = integ.get("method", "dopri5")
        if method not in METHODS:
            ck.fail(f"{iw}.method", f"must be one of {', '.join(METHODS)}")
        for key in ("rel_tol", "abs_tol", "max_step"):
            ck.number(integ, key, iw, required=False, positive=True)
        ck.number(integ, "singularity_guard", iw, required=False, nonneg=True)
        ck.number(integ, "step", iw, required=method in ("gauss4", "rk4"), positive=True)
    tspan = block.get("tspan")
    if not (isinstance(tspan, list) and len(tspan) == 2
            and all(isinstance(t, (int, float)) and not isinstance(t, bool) and math.isfinite(t)
                    for t in tspan)):
        ck.fail(f"{where}.tspan", "must be a pair of finite numbers")
    elif tspan[0] == tspan[1]:
        ck.fail(f"{where}.tspan", "must have distinct end points")
    ck.number(block, "horizon", where, required=False, positive=True)
    if "volume_preserving" in block and not isinstance(block["volume_preserving"], bool):
        ck.fail(f"{where}.volume_preserving", "must be true or false")


def _check_bi(block, ck: _Checker, where):
    ck.number(block, "e", where, positive=True)
    ck.number(block, "b", where, positive=True)
    if "r" in block:
        r = ck.array(block["r"], None, f"{where}.r")
        if r is not None and (r.ndim != 1 or r.size == 0 or np.any(r < 0)):
            ck.fail(f"{where}.r", "must be a non-empty list of non-negative radii")
    else:
        grid = ck.mapping(block, "r_grid", where)
        if grid is not None:
            gw = f"{where}.r_grid"
            start = ck.number(grid, "start", gw, nonneg=True)
            stop = ck.number(grid, "stop", gw, positive=True)
            num = grid.get("num")
            if isinstance(num, bool) or not isinstance(num, int) or num < 1:
                ck.fail(f"{gw}.num", "must be a positive integer")
            if start is not None and stop is not None and stop < start:
                ck.fail(gw, "stop must not be below start")
    if "r_max" in block and block["r_max"] != "inf":
        ck.number(block, "r_max", where, positive=True)
    ck.number(block, "r_min", where, required=False, nonneg=True)


def _check_tetrad(block, ck: _Checker, where):
    frame = block.get("frame")
    dim = None
    if frame not in BUILTIN_FRAMES:
        ck.fail(f"{where}.frame", f"must be one of {', '.join(BUILTIN_FRAMES)}")
    params = block.get("params", {})
    if not isinstance(params, dict):
        ck.fail(f"{where}.params", "must be an object")
        params = {}
    if frame in BUILTIN_FRAMES:
        for key in params:
            if key not in FRAME_PARAMS[frame]:
                ck.fail(f"{where}.params.{key}", f"not a parameter of {frame}")
        if frame == "coordinate":
            dim = params.get("dim", 4)
            if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
                ck.fail(f"{where}.params.dim", "must be a positive integer")
                dim = None
        else:
            dim = FRAME_DIMS[frame]
            for key in params:
                ck.number(params, key, f"{where}.params", positive=True)
    points = block.get("points")
    pts = ck.array(points, None, f"{where}.points") if points is not None else None
    if points is None:
        ck.fail(f"{where}.points", "missing")
    elif pts is not None and (pts.ndim != 2 or pts.shape[0] == 0 or (dim and pts.shape[1] != dim)):
        ck.fail(f"{where}.points", f"must be a non-empty list of {dim}-component points")
    eta = block.get("eta", "minkowski")
    if isinstance(eta, str):
        if eta not in ("minkowski", "euclidean"):
            ck.fail(f"{where}.eta", "must be 'minkowski', 'euclidean' or a matrix")
    elif dim is not None:
        arr = ck.array(eta, (dim, dim), f"{where}.eta")
        if arr is not None and (not np.allclose(arr, arr.T) or abs(np.linalg.det(arr)) < 1e-14):
            ck.fail(f"{where}.eta", "must be symmetric and nonsingular")
    for key in ("A", "B", "C"):
        ck.number(block, key, where, required=False)


# --------------------------------------------------------------------------
# construction


def build_model(block: dict, n: int) -> KineticModel:
    model = block["model"]
    kw = {field: model[key] for key, field in _CONSTANT_KEYS.items() if key in model}
    for key in ("A_coeff", "B_coeff", "I_scalar", "alpha"):
        if key in kw:
            kw[key] = float(kw[key])
    params = InertiaParameters(m=float(model.get("m", 1.0)), **kw)
    return KineticModel(model["kind"], params, n, g=model.get("g"), eta=model.get("eta"))


def build_potential(block: dict):
    pot = block.get("potential", {"kind": "zero"})
    kind = pot.get("kind", "zero")
    if kind == "DilatationHarmonic":
        return DilatationHarmonic(float(pot["k"]))
    if kind == "IsotropicPolynomial":
        return IsotropicPolynomial({tuple(t["degrees"]): float(t["coefficient"]) for t in pot["terms"]})
    return ZeroPotential()


def build_initial(block: dict, n: int, rng: np.random.Generator) -> KinematicState:
    initial = block["initial"]
    if "random" in initial:
        scale = float(initial["random"].get("scale", 0.3))
        phi = np.eye(n) + scale * rng.standard_normal((n, n))
        phidot = scale * rng.standard_normal((n, n))
        return KinematicState(np.zeros(n), np.zeros(n), phi, phidot)
    return KinematicState(initial.get("x", np.zeros(n)), initial.get("v", np.zeros(n)),
                          initial["phi"], initial["phidot"])


def build_integrator(block: dict) -> IntegratorConfig:
    integ = dict(block.get("integrator", {}))
    return IntegratorConfig(**{k: (v if k == "method" else float(v)) for k, v in integ.items()})


def affine_dimension(block: dict) -> int:
    return int(_model_dim(block["model"], block.get("initial")))


def tetrad_dimension(block: dict) -> int:
    frame = block["frame"]
    if frame == "coordinate":
        return int(block.get("params", {}).get("dim", 4))
    return FRAME_DIMS[frame]

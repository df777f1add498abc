"""Versioned JSON model files.

Every file carries ``"schema": 1`` and a ``"kind"``.  Complex arrays are nested
lists whose innermost entries are ``[re, im]`` pairs; real arrays are plain
nested lists.  NaN and infinities are rejected.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray

from .channelcore import KrausFamily
from .errors import SMPSError, ValidationError
from .market import MarketCase1, MarketCase2
from .master import LindbladGenerator
from .projection import ProjectionFamily
from .qsde import CountingModel, DiffusiveModel
from .smps import StochasticMPS, finite_memory_embedding, from_elementwise_positive, markov_embedding

SCHEMA = 1


class ModelFormatError(SMPSError, ValueError):
    """Malformed or unreadable model file."""


def _reject_constant(name: str):
    raise ModelFormatError(f"non-finite number {name} is not allowed")


def parse_json(text: str, source: str = "<string>") -> dict:
    """Strict parse; errors carry the line and column of the problem."""
    try:
        obj = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{source}: {e.msg} at line {e.lineno} column {e.colno}") from None
    _check_finite(obj)
    if not isinstance(obj, dict):
        raise ModelFormatError(f"{source}: top level must be an object")
    if obj.get("schema") != SCHEMA:
        raise ModelFormatError(f"{source}: unsupported schema {obj.get('schema')!r} (expected {SCHEMA})")
    if "kind" not in obj:
        raise ModelFormatError(f"{source}: missing 'kind'")
    return obj


def _check_finite(obj: Any) -> None:
    if isinstance(obj, float) and not math.isfinite(obj):
        raise ModelFormatError("non-finite number is not allowed")
    if isinstance(obj, list):
        for x in obj:
            _check_finite(x)
    elif isinstance(obj, dict):
        for x in obj.values():
            _check_finite(x)


def read_json(path: str | Path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ModelFormatError(f"cannot read {path}: {e.strerror}") from None
    return parse_json(text, str(path))


def decode_complex(x: Any, name: str = "array") -> NDArray:
    try:
        a = np.array(x, dtype=float)
    except (TypeError, ValueError):
        raise ModelFormatError(f"{name}: not a rectangular numeric array") from None
    if a.ndim < 1 or a.shape[-1] != 2:
        raise ModelFormatError(f"{name}: complex entries must be [re, im] pairs")
    return a[..., 0] + 1j * a[..., 1]


def decode_real(x: Any, name: str = "array") -> NDArray:
    try:
        return np.array(x, dtype=float)
    except (TypeError, ValueError):
        raise ModelFormatError(f"{name}: not a rectangular numeric array") from None


def encode_complex(a: NDArray) -> list:
    a = np.asarray(a, dtype=complex)
    return np.stack([a.real, a.imag], axis=-1).tolist()


def encode_real(a: NDArray) -> list:
    return np.asarray(a, dtype=float).tolist()


def dumps(obj: dict) -> str:
    return json.dumps({"schema": SCHEMA, **obj}, indent=1, allow_nan=False)


def write_json(obj: dict, path: str | Path) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def _get(obj: dict, key: str, default: Any = ...) -> Any:
    if key in obj:
        return obj[key]
    if default is ...:
        raise ModelFormatError(f"missing field {key!r} for kind {obj.get('kind')!r}")
    return default


def _cx(obj: dict, key: str, default: Any = None) -> NDArray | None:
    v = _get(obj, key, None if default is None else ...)
    return default if v is None else decode_complex(v, key)


def _generator(obj: dict) -> LindbladGenerator:
    Rs = tuple(decode_complex(r, "Rs") for r in _get(obj, "Rs", []))
    return LindbladGenerator(_cx(obj, "H", ...), Rs)


# --- per-kind encoders ---------------------------------------------------------------------


def encode_smps(s: StochasticMPS) -> dict:
    if not s.is_translation_invariant():
        sites = [[encode_complex(op) for op in fam.operators] for fam in s.sites]
        extra = {"sites": sites}
    else:
        extra = {"operators": [encode_complex(op) for op in s.sites[0].operators], "N": s.N}
    return {"kind": "smps", "alphabet": list(s.alphabet), **extra,
            "rho": encode_complex(s.rho), "closure": encode_complex(s.closure)}


def encode_generator(g: LindbladGenerator) -> dict:
    return {"H": encode_complex(g.H), "Rs": [encode_complex(r) for r in g.Rs]}


def encode_market(case: MarketCase1 | MarketCase2) -> dict:
    out = {"kind": "market1" if isinstance(case, MarketCase1) else "market2",
           "alpha": case.alpha, "r": case.r, "sigma": case.sigma, **encode_generator(case.g),
           "R": encode_complex(case.R), "rho": encode_complex(case.rho)}
    if isinstance(case, MarketCase2):
        out.update(m=case.m, S0=case.S0)
    if case.X is not None:
        out["X"] = encode_complex(case.X)
    return out


# --- loading -------------------------------------------------------------------------------


def _smps(obj: dict) -> StochasticMPS:
    alphabet = tuple(_get(obj, "alphabet"))
    rho, closure = _cx(obj, "rho"), _cx(obj, "closure")
    if "sites" in obj:
        sites = tuple(KrausFamily(alphabet, tuple(decode_complex(op, "sites") for op in fam))
                      for fam in obj["sites"])
        d = sites[0].dim
        return StochasticMPS(sites, np.eye(d) / d if rho is None else rho, np.eye(d) if closure is None else closure)
    fam = KrausFamily(alphabet, tuple(decode_complex(op, "operators") for op in _get(obj, "operators")))
    return StochasticMPS.uniform(fam, int(_get(obj, "N")), rho, closure)


def _diffusive(obj: dict) -> DiffusiveModel:
    return DiffusiveModel(_generator(obj), _cx(obj, "R", ...), float(_get(obj, "m", 0.0)),
                          float(_get(obj, "sigma", 1.0)), _cx(obj, "rho"), _cx(obj, "X"))


def _counting(obj: dict) -> CountingModel:
    return CountingModel(_cx(obj, "H", ...), _cx(obj, "U", ...), float(_get(obj, "mu")),
                         _cx(obj, "rho"), _cx(obj, "X"))


def _market(obj: dict) -> MarketCase1 | MarketCase2:
    args = (float(_get(obj, "alpha")), float(_get(obj, "r")), float(_get(obj, "sigma")), _generator(obj),
            _cx(obj, "R", ...), _cx(obj, "rho"), _cx(obj, "X"))
    if obj["kind"] == "market1":
        return MarketCase1(*args)
    return MarketCase2(*args, m=float(_get(obj, "m", 0.0)), S0=float(_get(obj, "S0", 1.0)))


LOADERS = {
    "smps": _smps,
    "markov": lambda o: markov_embedding(decode_real(_get(o, "T"), "T"), decode_real(_get(o, "pi"), "pi"),
                                         int(_get(o, "N")), _get(o, "alphabet", None)),
    "finite_memory": lambda o: finite_memory_embedding(decode_real(_get(o, "T"), "T"),
                                                       decode_real(_get(o, "p0"), "p0"), int(_get(o, "N"))),
    "elementwise": lambda o: from_elementwise_positive(
        decode_real(_get(o, "B"), "B"), decode_real(_get(o, "L"), "L"),
        None if o.get("R") is None else decode_real(o["R"], "R"), int(_get(o, "N")), _get(o, "alphabet", None)),
    "generator": _generator,
    "diffusive": _diffusive,
    "counting": _counting,
    "projection": lambda o: ProjectionFamily(decode_complex(_get(o, "blocks"), "blocks")),
    "market1": _market,
    "market2": _market,
}

# kinds that carry their data as a plain dict for the caller to interpret
RAW_KINDS = {"rates", "birth_death"}


def build_model(obj: dict) -> Any:
    """Domain object for ``obj['kind']``.

    Raises:
        ModelFormatError: for unknown kinds or malformed fields.
        ValidationError: when the data parses but violates model invariants.
    """
    kind = obj["kind"]
    if kind in RAW_KINDS:
        return obj
    if kind not in LOADERS:
        raise ModelFormatError(f"unknown model kind {kind!r}")
    try:
        return LOADERS[kind](obj)
    except (KeyError, TypeError, IndexError) as e:
        raise ModelFormatError(f"malformed {kind} model: {e}") from None


def load_model(path: str | Path) -> tuple[str, Any, dict]:
    """``(kind, model, raw)`` for a model file."""
    obj = read_json(path)
    return obj["kind"], build_model(obj), obj


def models_dir() -> Path:
    return Path(__file__).with_name("models")


def shipped_model(name: str) -> Path:
    p = models_dir() / f"{name}.json"
    if not p.exists():
        raise ValidationError(f"no shipped model named {name!r}")
    return p

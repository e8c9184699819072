"""Classification data for real forms of the classical bounded symmetric domains
and for the recursive examples, stored verbatim in ``data/real_forms.json``."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .errors import InvalidParams, UnknownType
from .expr import Expression

DOMAIN_TYPES = ("AIII", "DIII", "BDI_q2", "CI")
RECURSIVE = "recursive"

_REQUIRED = {"AIII": ("p", "q"), "DIII": ("n",), "BDI_q2": ("p",), "CI": ("n",)}


@dataclass(frozen=True)
class RealFormTableEntry:
    domain_type: str
    parameter_conditions: str
    real_form_symbols: tuple[str, ...]
    ambient: str = ""
    dim_c: str = ""


@dataclass(frozen=True)
class RecursiveExample:
    row: int
    family: str
    type: str
    hermitian: str
    real_form: str
    condition: str


@lru_cache(maxsize=1)
def _load() -> dict:
    text = resources.files("reflectlab").joinpath("data/real_forms.json").read_text("utf-8")
    return json.loads(text)


def appendix_rows() -> list[dict]:
    return list(_load()["appendix_b"])


def recursive_examples() -> list[RecursiveExample]:
    return [RecursiveExample(**row) for row in _load()["recursive_examples"]]


def _validate(domain_type: str, params: dict) -> dict:
    missing = [k for k in _REQUIRED[domain_type] if k not in params]
    if missing:
        raise InvalidParams(f"{domain_type} needs parameters {missing}")
    clean = {}
    for key, value in params.items():
        if value is None:
            continue
        if int(value) != value or value < 0:
            raise InvalidParams(f"{key}={value} must be a non-negative integer")
        clean[key] = int(value)
    if domain_type == "AIII":
        if clean["p"] < 1 or clean["q"] < 1:
            raise InvalidParams("A III needs p, q >= 1")
        if clean["p"] > clean["q"]:
            raise InvalidParams("A III rows are tabulated for p <= q")
    elif domain_type == "BDI_q2":
        if clean["p"] < 1:
            raise InvalidParams("BD I needs p >= 1")
        if "k" in clean and not 0 <= clean["k"] <= clean["p"] // 2:
            raise InvalidParams(f"k={clean['k']} outside 0..[p/2]")
    elif clean["n"] < 1:
        raise InvalidParams(f"{domain_type} needs n >= 1")
    return clean


def lookup_real_forms(domain_type: str, **params) -> list:
    """Rows matching ``domain_type`` and its parameters.

    ``domain_type`` is one of ``AIII`` (p, q), ``DIII`` (n), ``BDI_q2`` (p,
    optional k), ``CI`` (n), or ``recursive`` with ``row`` (1-5) or ``family``.
    """
    if domain_type == RECURSIVE:
        rows = recursive_examples()
        if "row" in params and params["row"] is not None:
            rows = [r for r in rows if r.row == int(params["row"])]
        if "family" in params and params["family"] is not None:
            rows = [r for r in rows if r.family == params["family"]]
        if not rows:
            raise InvalidParams(f"no recursive example matches {params}")
        return rows
    if domain_type not in DOMAIN_TYPES:
        raise UnknownType(f"unknown domain type {domain_type!r}; expected {DOMAIN_TYPES}")
    env = _validate(domain_type, params)
    out = []
    for row in appendix_rows():
        if row["type"] != domain_type:
            continue
        if bool(Expression(row["predicate"])(env)):
            out.append(
                RealFormTableEntry(
                    row["type"], row["condition"], tuple(row["symbols"]), row["ambient"],
                    row["dim_c"],
                )
            )
    return out

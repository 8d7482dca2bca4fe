"""JSON reading and writing for instances, shift vectors and reports."""
from __future__ import annotations

import json
import sys
from fractions import Fraction
from pathlib import Path
from typing import Any

from .core import InputError, Instance, Item, Mode, ShiftVector


def parse_rational(v) -> Fraction:
    """Integers or strings like ``"3"``, ``"7/2"``, ``"0.25"``; floats are refused."""
    if isinstance(v, bool):
        raise InputError(f"not a rational: {v!r}")
    if isinstance(v, int):
        return Fraction(v)
    if isinstance(v, str):
        try:
            return Fraction(v.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise InputError(f"not a rational: {v!r}") from exc
    raise InputError(f"rationals must be integers or strings, got {v!r}")


def fmt(v) -> str:
    return str(Fraction(v))


def _read_json(path) -> Any:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path} is not valid JSON: {exc}") from exc


def instance_from_dict(data) -> Instance:
    if not isinstance(data, dict) or "items" not in data:
        raise InputError("instance JSON needs an 'items' list")
    try:
        mode = Mode(data.get("mode", "discrete"))
    except ValueError as exc:
        raise InputError(f"unknown mode {data.get('mode')!r}") from exc
    items = data["items"]
    if not isinstance(items, list):
        raise InputError("'items' must be a list")
    out = []
    for k, it in enumerate(items):
        if not isinstance(it, dict) or set(it) - {"T", "H"} or not {"T", "H"} <= set(it):
            raise InputError(f"item {k} must be an object with keys 'T' and 'H'")
        out.append(Item(it["T"], it["H"]))
    return Instance(tuple(out), mode)


def instance_to_dict(instance: Instance) -> dict:
    return {"mode": instance.mode.value,
            "items": [{"T": it.interval, "H": it.quantity} for it in instance.items]}


def load_instance(path) -> Instance:
    return instance_from_dict(_read_json(path))


def load_shifts(path, instance: Instance) -> ShiftVector:
    data = _read_json(path)
    if not isinstance(data, dict) or not isinstance(data.get("shifts"), list):
        raise InputError("shift JSON needs a 'shifts' list")
    return ShiftVector.for_instance(instance, [parse_rational(v) for v in data["shifts"]])


def shifts_to_list(shifts) -> list[str]:
    return [fmt(s) for s in shifts]


def dumps(data) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"


def write_text(text: str, path=None) -> None:
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)

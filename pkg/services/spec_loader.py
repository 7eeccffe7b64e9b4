"""
Readers for the JSON input files: graph specs, substitution rules and
path pairs.
"""

import json
import logging
import os
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

from core.config import SPECS_DIR
from core.errors import GraphSpecError, PathInvalid
from services.graph_core import TAU_EXTENDED, TRUNCATED, BratteliGraph, PathWord, build_graph, path_word

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RulesSpec:
    rules: Dict[str, Tuple[str, ...]]
    alphabet: Optional[Tuple[str, ...]]
    horizontal_tr: Optional[List]
    horizontal_lg: Optional[List]
    star_edge: Optional[str]
    betas: Tuple[Tuple[Fraction, ...], ...]


def resolve_path(path: str) -> str:
    """Accept a path or the name of a bundled spec"""
    if os.path.exists(path):
        return path
    bundled = os.path.join(SPECS_DIR, path if path.endswith(".json") else f"{path}.json")
    if os.path.exists(bundled):
        return bundled
    raise GraphSpecError(f"input file {path!r} not found")


def load_json(path: str) -> Any:
    path = resolve_path(path)
    try:
        with open(path, "r", encoding="utf-8") as handle:
            return json.load(handle)
    except json.JSONDecodeError as exc:
        raise GraphSpecError(f"{path} is not valid JSON: {exc}") from exc


def load_graph_spec(path: str, rho: Optional[float] = None) -> BratteliGraph:
    spec = load_json(path)
    if not isinstance(spec, dict):
        raise GraphSpecError(f"{path}: a graph spec must be a JSON object")
    if rho is not None:
        spec = dict(spec, rho=rho)
    logger.info("Loading graph spec %s", path)
    return build_graph(spec)


def _parse_word(word: Any) -> Tuple[str, ...]:
    if isinstance(word, str):
        return tuple(word.split())
    return tuple(str(e) for e in word)


def load_rules(path: str) -> RulesSpec:
    """Substitution rules: {alphabet?, rules, H_tr?, H_lg?, star_edge?, betas?}"""
    raw = load_json(path)
    if not isinstance(raw, dict) or "rules" not in raw:
        raise GraphSpecError(f"{path}: rules file needs a 'rules' object")
    rules = {str(v): _parse_letters(w) for v, w in raw["rules"].items()}
    alphabet = tuple(str(v) for v in raw["alphabet"]) if "alphabet" in raw else None
    try:
        betas = tuple(tuple(Fraction(str(c)) for c in beta) for beta in raw.get("betas", [[0, 1]]))
    except (TypeError, ValueError) as exc:
        raise GraphSpecError(f"{path}: betas must be coefficient lists: {exc}") from exc
    return RulesSpec(
        rules=rules,
        alphabet=alphabet,
        horizontal_tr=raw.get("H_tr"),
        horizontal_lg=raw.get("H_lg"),
        star_edge=raw.get("star_edge"),
        betas=betas,
    )


def _parse_letters(word: Any) -> Tuple[str, ...]:
    if isinstance(word, str):
        return tuple(word.split()) if " " in word else tuple(word)
    return tuple(str(c) for c in word)


def parse_word(g: BratteliGraph, word: Any, mode: str = TAU_EXTENDED) -> PathWord:
    return path_word(g, _parse_word(word), mode)


def load_pairs(path: str, g: BratteliGraph) -> List[Tuple[PathWord, PathWord]]:
    """
    Pairs of words, either [[x, y], ...] or {"pairs": [{"x": ..., "y": ..., "mode": ...}]};
    a word is a list of edge ids or a space-separated string.
    """
    raw = load_json(path)
    entries = raw.get("pairs", []) if isinstance(raw, dict) else raw
    default_mode = raw.get("mode", TAU_EXTENDED) if isinstance(raw, dict) else TAU_EXTENDED
    pairs = []
    for entry in entries:
        if isinstance(entry, dict):
            mode = entry.get("mode", default_mode)
            x, y = entry["x"], entry["y"]
        elif isinstance(entry, Sequence) and len(entry) == 2:
            mode = default_mode
            x, y = entry
        else:
            raise PathInvalid(f"cannot read pair {entry!r}")
        if mode not in (TAU_EXTENDED, TRUNCATED):
            raise PathInvalid(f"unknown path mode {mode!r}")
        pairs.append((parse_word(g, x, mode), parse_word(g, y, mode)))
    return pairs

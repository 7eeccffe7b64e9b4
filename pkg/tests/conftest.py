import math

import pytest

from services.graph_core import build_graph
from services.spec_loader import load_graph_spec, load_rules
from services.tiling import build_substitution

GOLDEN = (1 + math.sqrt(5)) / 2


def dyadic_spec(**overrides):
    spec = {
        "vertices": ["o"],
        "edges": [["0", "o", "o"], ["1", "o", "o"]],
        "star_edge": "0",
        "tau": {"0": "0", "1": "0"},
        "horizontal": [["0", "1", "+"], ["1", "0", "-"]],
        "rho": 0.5,
    }
    spec.update(overrides)
    return spec


def fibonacci_spec(**overrides):
    spec = {
        "vertices": ["a", "b"],
        "edges": [["aa", "a", "a"], ["ab", "a", "b"], ["ba", "b", "a"]],
        "star_edge": "aa",
        "rho": 1 / GOLDEN,
    }
    spec.update(overrides)
    return spec


def rank_one_spec(**overrides):
    # A = [[1, 2], [2, 4]] has eigenvalues 5 and 0; the maximal H weighs the two vertices unevenly
    spec = {
        "vertices": ["a", "b"],
        "edges": [["aa", "a", "a"], ["ab1", "a", "b"], ["ab2", "a", "b"],
                  ["ba1", "b", "a"], ["ba2", "b", "a"],
                  ["bb1", "b", "b"], ["bb2", "b", "b"], ["bb3", "b", "b"], ["bb4", "b", "b"]],
        "star_edge": "aa",
        "rho": 0.1,
    }
    spec.update(overrides)
    return spec


def tribonacci_spec(**overrides):
    spec = {
        "vertices": ["a", "b", "c"],
        "edges": [["aa", "a", "a"], ["ab", "a", "b"], ["ba", "b", "a"],
                  ["ac", "a", "c"], ["cb", "c", "b"]],
        "star_edge": "aa",
        "rho": 0.5,
    }
    spec.update(overrides)
    return spec


@pytest.fixture
def dyadic():
    return build_graph(dyadic_spec())


@pytest.fixture
def fibonacci():
    return build_graph(fibonacci_spec())


@pytest.fixture
def tribonacci():
    return build_graph(tribonacci_spec())


@pytest.fixture
def rank_one():
    return build_graph(rank_one_spec())


@pytest.fixture
def ev1():
    return load_graph_spec("ev1")


@pytest.fixture
def log_term():
    return load_graph_spec("log_term")


@pytest.fixture(scope="session")
def fib_sub():
    spec = load_rules("fibonacci")
    return build_substitution(spec.rules, spec.alphabet, horizontal=spec.horizontal_tr, star_edge=spec.star_edge)


@pytest.fixture(scope="session")
def trib_sub():
    spec = load_rules("tribonacci")
    return build_substitution(spec.rules, spec.alphabet, star_edge=spec.star_edge)

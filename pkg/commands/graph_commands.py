"""
Commands on a single stationary Bratteli diagram: analyze, zeta, heat,
measure and telescope.
"""

import logging
import math
from typing import List, Sequence, Tuple

import numpy as np

from core.config import NON_DIAGONALIZABLE_WARNING, RESIDUE_CONVENTION_WARNING
from core.errors import DepthExceeded, DivergesAt, ToleranceFailure, ValidationError
from core.utils import parallel_map
from commands.base import Command, CommandOutput
from services.eigen import graph_eigendata
from services.forms import Cylinder
from services.graph_core import (
    BratteliGraph,
    PathWord,
    check_connectivity,
    enumerate_paths,
    graph_matrix,
    horizontal_count,
    is_primitive,
    telescope,
)
from services.metric import telescoping_lipschitz_check
from services.spec_loader import load_graph_spec, resolve_path
from services.spectral import (
    heat_trace_sweep,
    leading_residue,
    log_coefficient,
    mellin_cross_check,
    poles_and_residues,
    spectral_dimension,
    spectral_measure,
    state_cesaro,
    zeta_closed,
    zeta_series,
)

logger = logging.getLogger(__name__)

MAX_TABLE_DEPTH = 10


class GraphCommand(Command):
    """A command whose first input is a graph spec"""

    def load(self) -> BratteliGraph:
        return load_graph_spec(self.param("spec"), self.param("rho"))

    def inputs(self) -> List[str]:
        return [resolve_path(self.param("spec"))]


def measure_table(g: BratteliGraph, depth: int) -> List[Tuple[str, float]]:
    """mu of every cylinder of length 1..depth"""
    if depth > MAX_TABLE_DEPTH:
        raise DepthExceeded(f"measure tables are limited to depth {MAX_TABLE_DEPTH}")
    return [(" ".join(path), spectral_measure(g, PathWord(path)))
            for n in range(1, depth + 1) for path in enumerate_paths(g, n)]


def _graph_summary(g: BratteliGraph) -> dict:
    return {
        "vertices": list(g.vertices),
        "edges": len(g.edges),
        "horizontal_pairs": len(g.horizontal),
        "star_edge": g.star_edge,
        "rho": g.rho,
        "h_connected": check_connectivity(g),
    }


class AnalyzeCommand(GraphCommand):
    def __init__(self):
        super().__init__(
            name="analyze",
            description="Primitivity, eigen data, dimension, poles with residues and the spectral measure",
            required_params=["spec"],
            optional_params={"depth": 3, "kmax": 0, "rho": None},
        )

    def run(self) -> CommandOutput:
        g = self.load()
        ed = graph_eigendata(g)
        warnings = []
        results = {
            "graph": _graph_summary(g),
            "primitivity": is_primitive(graph_matrix(g)),
            "eigen": ed,
            "s0": spectral_dimension(g),
        }
        if ed.diagonalizable:
            zeta = poles_and_residues(g, int(self.param("kmax")))
            results["zeta"] = {
                "leading_residue": leading_residue(g),
                "period": zeta.period,
                "poles": list(zeta.poles),
            }
            warnings.extend(zeta.warnings)
            has_one = any(abs(lam - 1) < 1e-12 for lam in ed.eigenvalues)
            results["log_term"] = {"eigenvalue_one": has_one, "coefficient": log_coefficient(g)}
            lhs, rhs = mellin_cross_check(g)
            results["mellin"] = {"half_gamma_residue": lhs, "heat_mean": rhs,
                                 "relative_error": abs(lhs - rhs) / abs(rhs)}
        else:
            logger.warning("Graph matrix is not diagonalizable, skipping closed forms")
            warnings.append(NON_DIAGONALIZABLE_WARNING)
        table = measure_table(g, int(self.param("depth")))
        results["measure"] = dict(table)
        return CommandOutput(results, self.inputs(), warnings, ["word", "measure"], table)


def _parse_complex(raw) -> complex:
    try:
        return complex(str(raw).replace(" ", ""))
    except ValueError as exc:
        raise ValidationError(f"cannot read {raw!r} as a complex number") from exc


class ZetaCommand(GraphCommand):
    def __init__(self):
        super().__init__(
            name="zeta",
            description="Zeta function by closed form and truncated series, with poles and residues",
            required_params=["spec"],
            optional_params={"z": ["2"], "depth": 60, "kmax": 2, "rho": None},
        )

    def run(self) -> CommandOutput:
        g = self.load()
        ed = graph_eigendata(g)
        warnings = [RESIDUE_CONVENTION_WARNING]
        if not ed.diagonalizable:
            warnings = [NON_DIAGONALIZABLE_WARNING]
        rows, values = [], []
        for raw in self.param("z"):
            z = _parse_complex(raw)
            closed = zeta_closed(g, z) if ed.diagonalizable else None
            try:
                series, tail = zeta_series(g, z, int(self.param("depth")))
            except DivergesAt:
                series, tail = None, None
            values.append({"z": z, "closed": closed, "series": series, "tail_bound": tail})
            rows.append([z, closed, series, tail])
        results = {"s0": spectral_dimension(g), "values": values}
        if ed.diagonalizable:
            zeta = poles_and_residues(g, int(self.param("kmax")))
            results["period"] = zeta.period
            results["poles"] = list(zeta.poles)
        return CommandOutput(results, self.inputs(), warnings, ["z", "closed", "series", "tail_bound"], rows)


class HeatCommand(GraphCommand):
    def __init__(self):
        super().__init__(
            name="heat",
            description="Heat-kernel trace: direct series against the small-t expansion over a t grid",
            required_params=["spec"],
            optional_params={"t_min": 1e-8, "t_max": 1e-2, "points": 25, "eps": None, "K": None, "rho": None},
        )

    def run(self) -> CommandOutput:
        t_min, t_max, points = float(self.param("t_min")), float(self.param("t_max")), int(self.param("points"))
        if t_min <= 0 or t_max <= t_min:
            raise ValidationError(f"need 0 < t_min < t_max, got t_min={t_min}, t_max={t_max}")
        if points < 2:
            raise ValidationError("the t grid needs at least two points")
        g = self.load()
        ts = np.geomspace(t_min, t_max, points)
        sweep = heat_trace_sweep(g, ts, self.param("eps"), self.param("K"))
        warnings = []
        results = {"s0": spectral_dimension(g), "sweep": sweep}
        if graph_eigendata(g).diagonalizable:
            lhs, rhs = mellin_cross_check(g)
            results["mellin"] = {"half_gamma_residue": lhs, "heat_mean": rhs}
        else:
            warnings.append(NON_DIAGONALIZABLE_WARNING)
        rows = [list(row) + [scaled] for row, scaled in zip(sweep.rows(), sweep.scaled_direct)]
        return CommandOutput(results, self.inputs(), warnings,
                             ["t", "direct", "expansion", "residual", "scaled_direct"], rows)


class MeasureCommand(GraphCommand):
    def __init__(self):
        super().__init__(
            name="measure",
            description="Spectral measure of cylinders, its additivity and the Cesaro state of indicators",
            required_params=["spec"],
            optional_params={"depth": 5, "state_depth": 3, "levels": 30, "rho": None},
        )

    def run(self) -> CommandOutput:
        g = self.load()
        depth, levels = int(self.param("depth")), int(self.param("levels"))
        table = dict(measure_table(g, depth))

        additivity = 0.0
        for n in range(1, depth):
            for path in enumerate_paths(g, n):
                parent = table[" ".join(path)]
                children = math.fsum(table[" ".join(path + (e,))] for e in g.out_edges(g.range(path[-1])))
                additivity = max(additivity, abs(parent - children))

        words = [path for n in range(1, min(depth, int(self.param("state_depth"))) + 1)
                 for path in enumerate_paths(g, n)]
        states = parallel_map(lambda w: state_cesaro(g, Cylinder.indicator(w), levels).value.real, words)
        state_error = max((abs(s - table[" ".join(w)]) for w, s in zip(words, states)), default=0.0)

        rows = [[" ".join(w), table[" ".join(w)], s] for w, s in zip(words, states)]
        results = {
            "measure": table,
            "additivity_error": additivity,
            "state_levels": levels,
            "states": {" ".join(w): s for w, s in zip(words, states)},
            "state_error": state_error,
        }
        return CommandOutput(results, self.inputs(), [], ["word", "measure", "state"], rows)


class TelescopeCommand(GraphCommand):
    def __init__(self):
        super().__init__(
            name="telescope",
            description="Telescoped graph: invariance of dimension and measure, Lipschitz equivalence of the metric",
            required_params=["spec"],
            optional_params={"p": 2, "samples": 100, "depth": 8, "seed": 0, "rho": None},
        )

    def run(self) -> CommandOutput:
        g = self.load()
        p = int(self.param("p"))
        gp = telescope(g, p)
        s0, s0p = spectral_dimension(g), spectral_dimension(gp)
        counts = [
            {"n": n, "telescoped": horizontal_count(gp, n),
             "original_sum": sum(horizontal_count(g, (n - 1) * p + i) for i in range(1, p + 1))}
            for n in range(1, 4)
        ]
        measure_error = max(
            abs(spectral_measure(gp, PathWord((".".join(path),))) - spectral_measure(g, PathWord(path)))
            for path in enumerate_paths(g, p)
        )
        check = telescoping_lipschitz_check(g, p, int(self.param("samples")), int(self.param("depth")),
                                            int(self.param("seed")))
        results = {
            "p": p,
            "s0": s0,
            "s0_telescoped": s0p,
            "s0_invariant": abs(s0 - s0p) <= 1e-12 * max(1.0, s0),
            "counts": counts,
            "counts_match": all(c["telescoped"] == c["original_sum"] for c in counts),
            "measure_error": measure_error,
            "lipschitz": check,
        }
        rows = [[c["n"], c["telescoped"], c["original_sum"]] for c in counts]
        output = CommandOutput(results, self.inputs(), [], ["n", "telescoped", "original_sum"], rows)
        if not check.all_pass:
            output.failure = ToleranceFailure(
                f"Lipschitz sandwich failed: ratios in [{check.observed_min:g}, {check.observed_max:g}] "
                f"outside [{check.c_low:g}, {check.c_high:g}]")
        elif not results["counts_match"]:
            output.failure = ToleranceFailure("horizontal edge counts of the telescoped graph do not add up")
        return output


def graph_commands() -> Sequence[Command]:
    return [AnalyzeCommand(), ZetaCommand(), HeatCommand(), MeasureCommand(), TelescopeCommand()]

"""
Commands on the metric side: Connes distances and the level-n Dirichlet forms.
"""

import logging
from typing import Dict, Sequence

import numpy as np

from core.config import CIRCLE_EMBEDDING_NOTE
from core.errors import ToleranceFailure, ValidationError, WrongGraph
from commands.base import Command, CommandOutput
from commands.graph_commands import GraphCommand
from services.forms import CircleTrig, Cylinder, circle_dirichlet_energy, is_dyadic, markov_check, q_limit, qn_form
from services.metric import distance_matrix, distance_rows, random_tau_word
from services.spec_loader import load_pairs, resolve_path

logger = logging.getLogger(__name__)


class DistanceCommand(GraphCommand):
    def __init__(self):
        super().__init__(
            name="distance",
            description="Connes distances with tail bounds, optionally checked against the Dijkstra oracle",
            required_params=["spec"],
            optional_params={"pairs": None, "depth": 12, "oracle": False, "samples": 8, "seed": 0, "rho": None},
        )

    def run(self) -> CommandOutput:
        g = self.load()
        depth = int(self.param("depth"))
        if self.param("pairs") is None:
            return self._matrix(g, depth)

        pairs = load_pairs(self.param("pairs"), g)
        oracle = bool(self.param("oracle"))
        rows = distance_rows(g, pairs, depth, oracle)
        header = ["x", "y", "distance", "tail_bound", "n_xy", "c_xy"] + (["oracle", "oracle_match"] if oracle else [])
        output = CommandOutput(
            {"depth": depth, "distances": rows},
            self.inputs() + [resolve_path(self.param("pairs"))],
            [],
            header,
            [[row[k] for k in header] for row in rows],
        )
        mismatches = [row for row in rows if oracle and not row["oracle_match"]]
        if mismatches:
            output.failure = ToleranceFailure(
                f"{len(mismatches)} pair(s) differ from the geodesic oracle by more than the tail bound",
                details={"pairs": [[row["x"], row["y"]] for row in mismatches]},
            )
        return output

    def _matrix(self, g, depth: int) -> CommandOutput:
        # no pairs file: distance matrix of seeded random words from the star vertex
        rng = np.random.default_rng(int(self.param("seed")))
        words = [random_tau_word(g, depth, rng, start=g.star_vertex) for _ in range(int(self.param("samples")))]
        matrix = distance_matrix(g, words, depth)
        labels = [" ".join(w.edges) for w in words]
        rows = [[label] + list(row) for label, row in zip(labels, matrix.tolist())]
        return CommandOutput({"depth": depth, "words": labels, "matrix": matrix}, self.inputs(), [],
                             ["word"] + [f"w{i}" for i in range(len(words))], rows)


def parse_trig(raw: str) -> Dict[int, complex]:
    """'1:1,-1:1' -> {1: 1, -1: 1}"""
    coefficients: Dict[int, complex] = {}
    try:
        for term in str(raw).split(","):
            k, c = term.split(":")
            coefficients[int(k)] = coefficients.get(int(k), 0) + complex(c.replace(" ", ""))
    except ValueError as exc:
        raise ValidationError(f"cannot read trig polynomial {raw!r}, expected 'k:c,k:c'") from exc
    return coefficients


class FormCommand(GraphCommand):
    def __init__(self):
        super().__init__(
            name="form",
            description="Level-n Dirichlet forms: circle limit, locality on cylinders and the Markov property",
            required_params=["spec"],
            optional_params={"trig": None, "depth": 20, "samples": 50, "markov_level": 4,
                             "cylinder_depth": 2, "seed": 0, "eps": None, "rho": None},
        )

    def run(self) -> CommandOutput:
        g = self.load()
        depth = int(self.param("depth"))
        results, warnings, header, rows = {"rho": g.rho}, [], None, None

        if self.param("trig") is not None:
            if not is_dyadic(g):
                raise WrongGraph("trigonometric observables need the dyadic graph")
            coefficients = parse_trig(self.param("trig"))
            report = q_limit(g, CircleTrig(coefficients), CircleTrig(coefficients), depth)
            energy = circle_dirichlet_energy(coefficients)
            results["circle"] = {
                "coefficients": {str(k): c for k, c in sorted(coefficients.items())},
                "form": report,
                "energy": energy,
                "relative_error": abs(report.limit - energy) / energy if report.limit is not None and energy else None,
            }
            warnings.append(CIRCLE_EMBEDDING_NOTE)
            header, rows = ["n", "q_n"], report.rows()

        rng = np.random.default_rng(int(self.param("seed")))
        cyl_depth, level = int(self.param("cylinder_depth")), int(self.param("markov_level"))
        markov, local = [], True
        for _ in range(int(self.param("samples"))):
            f = Cylinder.random(g, cyl_depth, rng)
            markov.append(markov_check(g, f, level, self.param("eps")))
            if local:
                local = all(qn_form(g, f, f, n) == 0 for n in (cyl_depth + 1, cyl_depth + 2))
        results["cylinder"] = {"depth": cyl_depth, "vanishes_beyond_depth": local}
        results["markov"] = {
            "level": level,
            "samples": len(markov),
            "all_hold": all(m.holds for m in markov),
            "max_ratio": max((m.q_clipped / m.q_original for m in markov if m.q_original > 0), default=0.0),
        }
        if header is None:
            header = ["sample", "q_original", "q_clipped", "holds"]
            rows = [[i, m.q_original, m.q_clipped, m.holds] for i, m in enumerate(markov)]

        output = CommandOutput(results, self.inputs(), warnings, header, rows)
        if not results["markov"]["all_hold"]:
            output.failure = ToleranceFailure("clipping increased the form for some cylinder function")
        elif not local:
            output.failure = ToleranceFailure("q_n of a cylinder function is non-zero beyond its depth")
        return output


def metric_commands() -> Sequence[Command]:
    return [DistanceCommand(), FormCommand()]

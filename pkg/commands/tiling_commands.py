"""
Commands on one-dimensional substitution tilings: the Pisot Laplacians and
the tensor triple on the hull.
"""

import logging
import math
from fractions import Fraction
from typing import List, Sequence, Tuple

from core.config import NON_UNIMODULAR_WARNING
from core.errors import ValidationError
from commands.base import Command, CommandOutput
from services.graph_core import with_rho
from services.spec_loader import RulesSpec, load_rules, resolve_path
from services.spectral import tensor_heat_trace_double_sum
from services.tiling import (
    Substitution1D,
    beta_from_return_value,
    build_substitution,
    dirichlet_parameters,
    horizontal_geometry,
    laplacian_eigenvalue,
    longitudinal_graph,
    omega_slope,
    omega_triple,
    q_tr_numeric,
)

logger = logging.getLogger(__name__)


def parse_beta(raw) -> Tuple[Fraction, ...]:
    """'0,1' -> (0, 1), the coefficients of beta(r_h0) in powers of theta"""
    if isinstance(raw, (list, tuple)):
        return tuple(Fraction(str(c)) for c in raw)
    try:
        return tuple(Fraction(c.strip()) for c in str(raw).split(","))
    except ValueError as exc:
        raise ValidationError(f"cannot read beta {raw!r}, expected comma separated rationals") from exc


class TilingCommand(Command):
    """A command whose first input is a substitution rules file"""

    def load(self) -> Tuple[RulesSpec, Substitution1D]:
        spec = load_rules(self.param("rules"))
        sub = build_substitution(spec.rules, spec.alphabet, horizontal=spec.horizontal_tr,
                                 star_edge=spec.star_edge)
        return spec, sub

    def inputs(self) -> List[str]:
        return [resolve_path(self.param("rules"))]


class PisotCommand(TilingCommand):
    def __init__(self):
        super().__init__(
            name="pisot",
            description="Pisot data, non-resonance certificate and the Laplacian eigenvalues for a list of frequencies",
            required_params=["rules"],
            optional_params={"beta": None, "kmax": None, "n_min": 20, "n_max": 40},
        )

    def run(self) -> CommandOutput:
        spec, sub = self.load()
        params = dirichlet_parameters(sub, self.param("kmax"))
        tr = with_rho(sub.graph, params.rho_tr)
        lg = longitudinal_graph(sub, params.rho_lg, spec.horizontal_lg)
        geo = horizontal_geometry(sub, tr, lg)
        warnings = []
        if not params.pisot.unimodular:
            warnings.append(NON_UNIMODULAR_WARNING)
        if not params.nonresonant:
            warnings.append(f"subleading phases are resonant: {params.verdict}")

        betas = [parse_beta(b) for b in self.param("beta")] if self.param("beta") else list(spec.betas)
        window = (int(self.param("n_min")), int(self.param("n_max")))
        rows, table = [], []
        for coeffs in betas:
            beta = beta_from_return_value(sub, geo, list(coeffs))
            ev_tr = laplacian_eigenvalue(sub, geo, beta, "tr")
            ev_lg = laplacian_eigenvalue(sub, geo, beta, "lg")
            check = q_tr_numeric(sub, geo, beta, window, params.rho_tr)
            value = ",".join(str(c) for c in coeffs)
            table.append({
                "beta_on_first_return": value,
                "beta": repr(beta),
                "eigenvalue_tr": ev_tr,
                "eigenvalue_lg": ev_lg,
                "q_tr_average": check.average,
                "q_tr_relative_error": check.relative_error,
            })
            rows.append([value, ev_tr, ev_lg, check.average, check.relative_error])

        results = {
            "substitution": sub,
            "pisot": params.pisot,
            "rho_tr": params.rho_tr,
            "rho_lg": params.rho_lg,
            "nonresonant": params.nonresonant,
            "min_gap": params.min_gap,
            "certificate": params.verdict,
            "geometry": geo,
            "window": list(window),
            "eigenvalues": table,
        }
        return CommandOutput(results, self.inputs(), warnings,
                             ["beta", "eigenvalue_tr", "eigenvalue_lg", "q_tr_average", "relative_error"], rows)


class OmegaCommand(TilingCommand):
    def __init__(self):
        super().__init__(
            name="omega",
            description="Tensor triple on the hull: dimension, residue positivity and the heat-trace slope",
            required_params=["rules"],
            optional_params={"rho_tr": None, "rho_lg": None, "t_min": 1e-12, "t_max": 1e-6, "points": 13},
        )

    def run(self) -> CommandOutput:
        spec, sub = self.load()
        t_min, t_max = float(self.param("t_min")), float(self.param("t_max"))
        if t_min <= 0 or t_max <= t_min:
            raise ValidationError(f"need 0 < t_min < t_max, got t_min={t_min}, t_max={t_max}")
        omega = omega_triple(sub, self.param("rho_tr"), self.param("rho_lg"),
                             spec.horizontal_tr, spec.horizontal_lg)
        slope = omega_slope(omega, t_min, t_max, int(self.param("points")))
        product = omega.heat_trace(t_max)
        double_sum = tensor_heat_trace_double_sum(omega.transversal, omega.longitudinal, t_max)
        warnings = []
        if not omega.residue.positive:
            warnings.append("residue of the tensor zeta function at s0 is not a positive real")
        results = {
            "substitution": sub,
            "omega": omega,
            "slope_dimension": slope,
            "slope_error": abs(slope - omega.s0),
            "multiplicativity_error": abs(product - double_sum) / abs(double_sum) if double_sum else math.nan,
        }
        return CommandOutput(results, self.inputs(), warnings, ["quantity", "value"],
                             [["s_tr", omega.s_tr], ["s_lg", omega.s_lg], ["s0", omega.s0],
                              ["slope_dimension", slope], ["residue", omega.residue.residue]])


def tiling_commands() -> Sequence[Command]:
    return [PisotCommand(), OmegaCommand()]

import logging
import os
from typing import Any, Dict, Optional

from dotenv import load_dotenv

load_dotenv()

# bratteli-spectra configuration
APP_NAME = "bratteli-spectra"
APP_DESCRIPTION = "Self-similar spectral triples of stationary Bratteli diagrams and substitution tilings"
SCHEMA_VERSION = "1.0"

SPECS_DIR = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "specs")


def _env_int(name: str, default: int) -> int:
    raw = os.getenv(name)
    if raw is None or not raw.strip():
        return default
    try:
        value = int(raw)
    except ValueError:
        return default
    return max(1, value)


THREADS = _env_int("BRATTELI_SPECTRA_THREADS", os.cpu_count() or 1)
LOG_LEVEL = os.getenv("BRATTELI_SPECTRA_LOG_LEVEL", "WARNING").upper()

# Numerical defaults shared by all services
DEFAULT_SETTINGS: Dict[str, Any] = {
    # eigen
    "biorthonormal_tol": 1e-10,
    "normalization_tol": 1e-12,
    "newton_tol": 1e-13,
    "rank_tol": 1e-8,
    "max_matrix_dim": 64,
    # spectral
    "heat_eps": 1e-12,
    "heat_safety": 10.0,
    "frak_f_terms": 40,
    "residue_step": 1e-6,
    "residue_tol": 1e-4,
    "laplace_s_grid": (1e-2, 5e-3, 2.5e-3, 1.25e-3),
    "laplace_tol": 2e-2,
    "cauchy_window": 5,
    # metric
    "oracle_max_depth": 14,
    # forms
    "form_max_depth": 22,
    "aitken_tol": 1e-6,
    "markov_eps": 1e-3,
    # numberfield
    "conjugate_tie_tol": 1e-9,
    "max_field_degree": 8,
    "root_dps": 50,
    # tiling
    "max_supertile_level": 30,
    "max_offsets": 10 ** 6,
    "resonance_kmax": 10 ** 4,
}

RESIDUE_CONVENTION_WARNING = (
    "Residues are reported as C^j_H/(-log rho), the value obtained from the closed form "
    "sum_k C^k lambda_k rho^z/(1 - lambda_k rho^z); the alternative convention "
    "C^j_H lambda_j/(-log rho) is listed under 'alternative_residue' for comparison."
)
NON_DIAGONALIZABLE_WARNING = (
    "Graph matrix is not diagonalizable: closed-form zeta and heat expansions are skipped, "
    "only direct series are reported."
)
NON_UNIMODULAR_WARNING = (
    "Dilation factor is not unimodular: star-map integrality holds only up to a "
    "denominator, phase reduction uses exact traces."
)
CIRCLE_EMBEDDING_NOTE = (
    "Dyadic paths are embedded in the circle by the binary expansion x = sum_i gamma_i 2^-i."
)


def get_setting(name: str, override: Optional[Any] = None) -> Any:
    """Get a numerical setting, honouring an explicit override"""
    if override is not None:
        return override
    return DEFAULT_SETTINGS[name]


def configure_logging(level: Optional[str] = None) -> None:
    """Configure the root logger once; output goes to stderr"""
    root = logging.getLogger()
    resolved = getattr(logging, (level or LOG_LEVEL).upper(), logging.WARNING)
    if not root.handlers:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(name)s: %(message)s"))
        root.addHandler(handler)
    root.setLevel(resolved)

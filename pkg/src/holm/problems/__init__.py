from .builtins import BUILTINS, ab_network, builtin_problem, chain3_network
from .fd import check_jacobian, fd_jacobian, jacobian_error
from .io import ParseError, load_network, read_manifest, read_matrix_market, read_vector, save_network
from .network import (
    BioNetwork,
    NetworkError,
    bio_jacobian,
    bio_residual,
    left_nullspace,
    reduce_rows,
)

__all__ = [
    "BUILTINS",
    "BioNetwork",
    "NetworkError",
    "ParseError",
    "ab_network",
    "bio_jacobian",
    "bio_residual",
    "builtin_problem",
    "chain3_network",
    "check_jacobian",
    "fd_jacobian",
    "jacobian_error",
    "left_nullspace",
    "load_network",
    "read_manifest",
    "read_matrix_market",
    "read_vector",
    "reduce_rows",
    "save_network",
]

"""Numerical verification of the Thomae formula for Z_N curves s^N = prod (z - lambda_i)."""

__version__ = "0.1.0"

from .curve import ZNCurve, differential_basis, genus  # noqa: E402
from .errors import ZNError  # noqa: E402
from .partitions import OrderedPartition  # noqa: E402
from .theta import Characteristic, theta  # noqa: E402

__all__ = ["ZNCurve", "differential_basis", "genus", "ZNError", "OrderedPartition", "Characteristic", "theta",
           "__version__"]

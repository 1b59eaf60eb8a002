"""
Error hierarchy for the Sobolev jet extension toolkit
Every error carries the CLI exit code it maps to
"""

from typing import Optional


class SobolevJetsError(Exception):
    """Base class for all toolkit errors"""

    exit_code = 1


# ============================================================================
# Configuration and schema errors (exit code 2)
# ============================================================================

class ConfigError(SobolevJetsError):
    """Invalid configuration, CLI arguments or input parameters"""

    exit_code = 2


class FieldSchemaError(ConfigError):
    """Jet field JSON does not follow the schema"""


class ExponentError(ConfigError, ValueError):
    """Integrability exponent p is not admissible (p must exceed n)"""


# ============================================================================
# Geometric preconditions
# ============================================================================

class GeometryError(ConfigError, ValueError):
    """Geometric precondition failed (bad dilation factor, point outside box)"""


class DimensionMismatchError(GeometryError):
    """Operands live in different dimensions"""


class EmptySetError(GeometryError):
    """Operation needs a nonempty point set"""


class CollarError(SobolevJetsError, ValueError):
    """Point lies in the unresolved collar around E"""

    exit_code = 2

    def __init__(self, message: str, distance: Optional[float] = None):
        super().__init__(message)
        self.distance = distance


# ============================================================================
# Invariant violations (exit code 3)
# ============================================================================

class InvariantViolation(SobolevJetsError):
    """A construction produced an object that breaks a proven invariant"""

    exit_code = 3


class NetLookupError(InvariantViolation):
    """No admissible net point found while projecting a lacuna"""


class CertificateError(InvariantViolation):
    """Sparsity certificate could not be constructed"""


class DisconnectedGraphError(InvariantViolation):
    """Graph on E (or a metric sample graph) is disconnected"""


class QuadratureError(InvariantViolation):
    """Quadrature refinement disagreement above tolerance"""


# ============================================================================
# Capacity limits (exit code 4)
# ============================================================================

class CapacityError(SobolevJetsError):
    """Problem size exceeds an enumeration limit"""

    exit_code = 4

"""Two-factor multi-server authentication and key agreement, with a simulator,
a symbolic attacker and a cost model."""

from .errors import ProtocolError, Rejected
from .sim import Faults, LoginOutcome, User, World

__version__ = "0.1.0"

__all__ = ["Faults", "LoginOutcome", "ProtocolError", "Rejected", "User", "World", "__version__"]

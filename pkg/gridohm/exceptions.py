from typing import Any, Dict, Optional


class GridohmError(Exception):
    """Base class for every error raised by gridohm.

    `code` is stable and machine-readable; the CLI prints it inside the JSON
    error object.
    """

    code = "GridohmError"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def to_dict(self) -> Dict[str, Any]:
        return {"code": self.code, "message": self.message, "details": self.details}


class InvalidSpecError(GridohmError):
    code = "InvalidSpec"


class SelfLoopError(InvalidSpecError):
    code = "SelfLoop"


class UnknownSiteError(InvalidSpecError):
    code = "UnknownSite"


class NonPositiveResistanceError(InvalidSpecError):
    code = "NonPositiveResistance"


class DisconnectedLatticeError(InvalidSpecError):
    code = "DisconnectedLattice"


class InvalidQueryError(GridohmError):
    code = "InvalidQuery"


class SingularPointError(GridohmError):
    code = "SingularPoint"


class InvalidTorusError(GridohmError):
    code = "InvalidTorus"


class UnknownLatticeError(GridohmError):
    code = "UnknownLattice"


class InvalidRequestError(GridohmError):
    code = "InvalidRequest"


class NoConvergenceError(GridohmError):
    """Raised in strict mode; the best available result travels with it"""

    code = "NoConvergence"

    def __init__(self, message: str, result: Any, details: Optional[Dict[str, Any]] = None):
        super().__init__(message, details)
        self.result = result

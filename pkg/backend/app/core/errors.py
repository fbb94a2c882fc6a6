"""
Pipeline Errors
Exception types shared by every pipeline stage.

Each error carries a message and an HTTP-style status code so the same
exception can surface through the FastAPI app or the command line.
"""
from typing import Optional


class PipelineError(Exception):
    """Base exception for pipeline errors"""
    def __init__(self, message: str, status_code: int = 400):
        self.message = message
        self.status_code = status_code
        super().__init__(self.message)


class InputError(PipelineError):
    """Invalid arguments or mismatched inputs"""
    def __init__(self, message: str):
        super().__init__(message, status_code=400)


class ParseError(PipelineError):
    """Malformed file content; carries the offending line when known"""
    def __init__(self, message: str, line_number: Optional[int] = None, path: Optional[str] = None):
        self.line_number = line_number
        self.path = path
        location = ""
        if path:
            location = f"{path}:"
        if line_number is not None:
            location = f"{location}{line_number}:"
        super().__init__(f"{location} {message}".strip(), status_code=422)


class SchemaError(PipelineError):
    """Well-formed content that violates the expected schema"""
    def __init__(self, message: str, line_number: Optional[int] = None):
        self.line_number = line_number
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message, status_code=422)


class ConstructionError(PipelineError):
    """A scenario or object that cannot be built as described"""
    def __init__(self, message: str):
        super().__init__(message, status_code=400)

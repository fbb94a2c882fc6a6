# Router exports
from . import (
    linking,
    evaluation,
    simulation,
)

__all__ = [
    "linking",
    "evaluation",
    "simulation",
]

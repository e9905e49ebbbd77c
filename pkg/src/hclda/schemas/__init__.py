"""JSON schemas for model files and experiment reports."""

import json
from importlib import resources


def load_schema(name: str) -> dict:
    """``name`` is ``"model"`` or ``"report"``."""
    return json.loads(resources.files(__name__).joinpath(f"{name}.schema.json").read_text())

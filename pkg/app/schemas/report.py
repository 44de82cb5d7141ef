import json
import math
from typing import Any

from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.models.enums import Subcommand

# relative slack under which value <= bound still counts as a pass
CERTIFICATION_SLACK = 1e-8


class Certification(BaseModel):
    """
    Schema for one certified metric of a run
    """

    metric: str
    value: float
    bound: float
    slack: float = Field(default=0.0, ge=0.0)
    passed: bool | None = None

    @model_validator(mode="after")
    def derive_passed(self):
        ok = self.value <= self.bound + self.slack
        if self.passed is None:
            self.passed = ok
        elif self.passed != ok:
            raise ValueError(f"passed={self.passed} contradicts {self.value} vs bound {self.bound}")
        return self

    @classmethod
    def against(cls, metric: str, value: float, bound: float) -> "Certification":
        return cls(
            metric=metric,
            value=value,
            bound=bound,
            slack=CERTIFICATION_SLACK * max(1.0, abs(bound)),
        )


class RunReport(BaseModel):
    """
    Schema for the JSON report every subcommand prints
    """

    model_config = ConfigDict(use_enum_values=True)

    subcommand: Subcommand
    inputs: dict[str, Any] = Field(default_factory=dict)
    outputs: dict[str, Any] = Field(default_factory=dict)
    certification: list[Certification] = Field(default_factory=list)
    timing: float = Field(default=0.0, ge=0.0, description="Wall clock seconds")

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.certification)

    def render(self) -> str:
        return render_json(self.model_dump(mode="python"))


def _format_float(x: float) -> str:
    if math.isnan(x) or math.isinf(x):
        return "null"
    text = format(x, ".17g")
    if "e" not in text and "." not in text:
        text += ".0"
    return text


def render_json(value: Any, indent: int = 2, level: int = 0) -> str:
    """
    JSON text with every float written to 17 significant digits.
    numpy scalars and arrays are rendered as their Python counterparts.
    """
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if hasattr(value, "tolist"):
        value = value.tolist()
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return _format_float(value)
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {render_json(v, indent, level + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple)) for v in value):
            return "[" + ", ".join(render_json(v, indent, level + 1) for v in value) + "]"
        items = [pad + render_json(v, indent, level + 1) for v in value]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(value, "value"):
        return render_json(value.value, indent, level)
    raise TypeError(f"Cannot render {type(value).__name__} as JSON")

"""Typed shapes for model input and output, plus strict parsers."""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from typing import Annotated, Literal, get_args

from pydantic import BaseModel, Field, StrictBool, StrictStr, ValidationError, model_validator

Category = Literal[
    "politics", "geopolitics", "elections", "economy", "finance",
    "earnings", "crypto", "tech", "sports", "culture", "other",
]
CATEGORIES: tuple[str, ...] = get_args(Category)

FIELD_MESSAGES = {
    "is_same_outcome": "You must provide a boolean.",
    "confidence_score": "You must provide a confidence score.",
    "rationale": "You must provide a rationale.",
    "category": "You must assign a category.",
}


class SingleMarket(BaseModel):
    question: StrictStr = Field(min_length=1)
    market_start_time: str
    market_end_time: str
    news_summary: str | None = None


class LabeledCluster(BaseModel):
    markets: str
    category: Category


class MarketRelation(BaseModel):
    question_i: StrictStr
    question_j: StrictStr
    is_same_outcome: StrictBool
    confidence_score: Annotated[float, Field(strict=True, ge=0.0, le=1.0)]
    rationale: StrictStr

    @model_validator(mode="after")
    def _check(self) -> "MarketRelation":
        if not self.rationale.strip():
            raise ValueError("rationale is empty")
        if self.question_i.strip() == self.question_j.strip():
            raise ValueError("question_i and question_j are the same market")
        return self

    @property
    def pair(self) -> tuple[str, str]:
        a, b = self.question_i.strip(), self.question_j.strip()
        return (a, b) if a <= b else (b, a)

    def canonical(self) -> "MarketRelation":
        """Trimmed questions in sorted order; sameness is symmetric so it stays."""
        a, b = self.pair
        return self.model_copy(update={"question_i": a, "question_j": b})


class MarketRelationList(BaseModel):
    relations: list[MarketRelation]


class SchemaError(ValueError):
    """Model output did not fit the expected shape.

    ``fields`` names every offending field (dotted paths for nested ones).
    """

    def __init__(self, message: str, fields: list[str] | None = None):
        super().__init__(message)
        self.fields = fields or []


@dataclass
class TransductionConfig:
    model_name: str = "mock"
    temperature: float = 0.0
    max_retries: int = 2
    concurrency_cap: int = 4

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ValueError("temperature must be non-negative")
        if self.max_retries < 0:
            raise ValueError("max_retries must be non-negative")
        if self.concurrency_cap < 1:
            raise ValueError("concurrency_cap must be positive")


_FENCE = re.compile(r"^```[a-zA-Z]*\s*\n?(.*?)\n?\s*```$", re.DOTALL)


def strip_code_fence(raw: str) -> str:
    text = raw.strip()
    m = _FENCE.match(text)
    return m.group(1).strip() if m else text


def _load_object(raw: str) -> dict:
    try:
        obj = json.loads(strip_code_fence(raw))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"output is not valid JSON: {exc}") from None
    if not isinstance(obj, dict):
        raise SchemaError("output must be a single JSON object")
    return obj


def _schema_error(exc: ValidationError) -> SchemaError:
    fields, lines = [], []
    for err in exc.errors():
        loc = ".".join(str(p) for p in err["loc"])
        leaf = next((str(p) for p in reversed(err["loc"]) if isinstance(p, str)), loc)
        fields.append(leaf)
        hint = FIELD_MESSAGES.get(leaf, "")
        lines.append(f"{loc or '<root>'}: {err['msg']}" + (f" {hint}" if hint else ""))
    return SchemaError("; ".join(lines), fields)


def parse_relation_list(raw: str) -> MarketRelationList:
    """Strictly parse model output into a :class:`MarketRelationList`.

    A surrounding Markdown code fence is tolerated; anything else that is not
    exactly one JSON object of the right shape raises :class:`SchemaError`.
    """
    obj = _load_object(raw)
    try:
        return MarketRelationList.model_validate(obj)
    except ValidationError as exc:
        raise _schema_error(exc) from None


def parse_label(raw: str) -> str:
    obj = _load_object(raw)
    category = obj.get("category")
    if category not in CATEGORIES:
        raise SchemaError(
            f"category {category!r} is not one of {', '.join(CATEGORIES)}. "
            + FIELD_MESSAGES["category"],
            ["category"],
        )
    return category

"""QA records read from JSON Lines files."""

import json
import logging
from pathlib import Path
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from biopars.errors import InputError

logger = logging.getLogger(__name__)


class EvalRecord(BaseModel):
    """One question with its expert reference answer and the candidate answer to score."""

    model_config = ConfigDict(extra="ignore", frozen=True)

    id: str = Field(min_length=1)
    question: str = ""
    reference: str = Field(min_length=1)
    candidate: str = Field(min_length=1)
    contexts: Optional[list[str]] = None
    question_vector: Optional[list[float]] = None
    context_vectors: Optional[list[list[float]]] = None


def load_records(path: str | Path) -> list[EvalRecord]:
    """
    Read one record per non-blank line, keeping file order.

    Raises:
        InputError: A line is not a valid record (carries its 1-based line number),
            or an id appears twice
    """
    records: list[EvalRecord] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                record = EvalRecord.model_validate(json.loads(line))
            except json.JSONDecodeError as e:
                raise InputError(f"{path}:{line_no}: malformed JSON ({e.msg})", line=line_no)
            except ValidationError as e:
                fields = ", ".join(".".join(str(p) for p in err["loc"]) for err in e.errors())
                raise InputError(f"{path}:{line_no}: invalid record ({fields})", line=line_no)
            if record.id in seen:
                raise InputError(f"{path}:{line_no}: duplicate id {record.id!r}", line=line_no)
            seen.add(record.id)
            records.append(record)
    logger.info("Loaded %d records from %s", len(records), path)
    return records

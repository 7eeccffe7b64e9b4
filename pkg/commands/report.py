import json
from typing import Any, Dict, List

from pydantic import BaseModel, Field

from core.config import SCHEMA_VERSION


class Report(BaseModel):
    """Machine-readable result of one command run"""

    schema_version: str = SCHEMA_VERSION
    command: str
    arguments: Dict[str, Any] = Field(default_factory=dict)
    input_digest: str
    results: Dict[str, Any] = Field(default_factory=dict)
    warnings: List[str] = Field(default_factory=list)

    def to_json(self) -> str:
        # sorted keys and no timestamps keep reports byte-identical across runs
        return json.dumps(self.model_dump(), sort_keys=True, indent=2) + "\n"

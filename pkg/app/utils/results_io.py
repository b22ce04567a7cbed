import json
import logging
from pathlib import Path
from typing import Any, Dict, Sequence

import pandas as pd
from pydantic import BaseModel

from app.schemas.experiments import OutputFormat

logger = logging.getLogger(__name__)

# nested reports that only the JSON form carries
JSON_ONLY_FIELDS = {"ledger"}


def table_record(row: BaseModel) -> Dict[str, Any]:
    return row.model_dump(mode="json", exclude=JSON_ONLY_FIELDS)


def to_frame(rows: Sequence[BaseModel]) -> pd.DataFrame:
    return pd.DataFrame([table_record(row) for row in rows])


def write_results(
    rows: Sequence[BaseModel],
    path: str | Path,
    fmt: OutputFormat = OutputFormat.CSV,
    meta: Dict[str, Any] | None = None,
) -> Path:
    """Write result rows with a reproducibility header (command line, master seed, PRNG)."""
    path = Path(path)
    meta = meta or {}
    frame = to_frame(rows)
    if fmt is OutputFormat.CSV:
        with path.open("w", encoding="utf-8", newline="") as fh:
            for key, value in meta.items():
                fh.write(f"# {key}: {value}\n")
            frame.to_csv(fh, index=False)
    else:
        document = {"meta": meta, "rows": [row.model_dump(mode="json") for row in rows]}
        path.write_text(json.dumps(document, indent=2), encoding="utf-8")
    logger.info(f"Wrote {len(frame)} rows to {path}")
    return path


def read_results(path: str | Path, fmt: OutputFormat = OutputFormat.CSV) -> pd.DataFrame:
    path = Path(path)
    if fmt is OutputFormat.CSV:
        return pd.read_csv(path, comment="#")
    document = json.loads(path.read_text(encoding="utf-8"))
    return pd.DataFrame(document["rows"])


def read_meta(path: str | Path, fmt: OutputFormat = OutputFormat.CSV) -> Dict[str, str]:
    path = Path(path)
    if fmt is OutputFormat.JSON:
        return json.loads(path.read_text(encoding="utf-8"))["meta"]
    meta = {}
    with path.open(encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("# "):
                break
            key, _, value = line[2:].rstrip("\n").partition(": ")
            meta[key] = value
    return meta

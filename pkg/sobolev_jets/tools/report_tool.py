"""
Report Tool
Deterministic JSON, CSV and text artifacts for every subcommand
"""

import logging
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import orjson
import pandas as pd

from ..core.jets import format_multi_index

logger = logging.getLogger(__name__)

JSON_OPTIONS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY
ENVELOPE_KEYS = ("success", "generated_at", "artifacts", "timings")


def jsonable(obj: Any) -> Any:
    """Plain JSON tree; non-finite floats become "inf", "-inf" or "nan" strings"""
    if hasattr(obj, "to_dict") and not isinstance(obj, pd.DataFrame):
        return jsonable(obj.to_dict())
    if isinstance(obj, dict):
        return {_key(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        value = float(obj)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    if isinstance(obj, Path):
        return str(obj)
    return obj


def _key(k: Any) -> str:
    if isinstance(k, tuple) and all(isinstance(a, (int, np.integer)) for a in k):
        return format_multi_index(tuple(int(a) for a in k))
    return str(k)


def dumps(payload: Any) -> bytes:
    return orjson.dumps(jsonable(payload), option=JSON_OPTIONS)


def envelope(**payload: Any) -> Dict[str, Any]:
    """Tool result in the shape every subcommand returns"""
    return {
        "success": True,
        "generated_at": datetime.now(timezone.utc).isoformat(),
        "artifacts": [],
        **payload,
    }


def write_report(result: Dict[str, Any], path: Union[str, Path]) -> Path:
    """
    Write the payload of a tool result as JSON.

    Envelope keys and timings are left out so identical runs give identical files.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {k: v for k, v in result.items() if k not in ENVELOPE_KEYS}
    path.write_bytes(dumps(body) + b"\n")
    result.setdefault("artifacts", []).append(str(path))
    logger.info("wrote %s", path)
    return path


def write_csv(result: Dict[str, Any], frame: pd.DataFrame, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format="%.17g")
    result.setdefault("artifacts", []).append(str(path))
    logger.info("wrote %s (%d rows)", path, len(frame))
    return path


def write_text(result: Dict[str, Any], text: str, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")
    result.setdefault("artifacts", []).append(str(path))
    logger.info("wrote %s", path)
    return path


def error_result(error: BaseException, exit_code: int) -> Dict[str, Any]:
    return {
        "success": False,
        "error": type(error).__name__,
        "message": str(error),
        "exit_code": exit_code,
    }

from __future__ import annotations
import hashlib
import json
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional, TextIO

import pandas as pd

FLOAT_FORMAT = '%.11e'  # 12 significant digits


def utc_now_iso() -> str:
    return datetime.now(timezone.utc).isoformat().replace('+00:00', 'Z')


def sha256_json(data: Any) -> str:
    h = hashlib.sha256()
    h.update(json.dumps(data, sort_keys=True, ensure_ascii=False).encode('utf-8'))
    return h.hexdigest()


def frame_to_csv(frame: pd.DataFrame, footer: Optional[Dict[str, Any]] = None) -> str:
    """Deterministic CSV text; ``footer`` becomes one trailing JSON line."""
    text = frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator='\n')
    if footer is not None:
        text += json.dumps(footer, sort_keys=True) + '\n'
    return text


def write_table(frame: pd.DataFrame, out: Optional[Path], stream: TextIO, footer: Optional[Dict[str, Any]] = None) -> Optional[Path]:
    text = frame_to_csv(frame, footer)
    if out is None:
        stream.write(text)
        return None
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open('w', encoding='utf-8', newline='') as f:
        f.write(text)
    return out


def append_run_log(path: Path, record: Dict[str, Any]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open('a', encoding='utf-8') as f:
        f.write(json.dumps(record, ensure_ascii=False) + '\n')

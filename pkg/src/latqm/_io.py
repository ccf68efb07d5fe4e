import json
import os
import tempfile
from pathlib import Path

SIG_DIGITS = 12


def fmt(value) -> str:
    """Fixed 12-significant-digit rendering used by every emitted file."""
    value = float(value)
    if value == 0.0:
        return "0"  # folds -0.0 so outputs stay byte-stable
    return f"{value:.{SIG_DIGITS}g}"


def round_floats(obj):
    """Recursively round floats to 12 significant digits for JSON output."""
    if isinstance(obj, float):
        return float(fmt(obj))
    if isinstance(obj, dict):
        return {k: round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [round_floats(v) for v in obj]
    return obj


def atomic_write_text(path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def atomic_write_json(path, obj) -> Path:
    return atomic_write_text(path, json.dumps(round_floats(obj), indent=2, sort_keys=True) + "\n")

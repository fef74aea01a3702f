import os
import csv
import json
import shutil
import tempfile
import contextlib

import numpy as np
from unidecode import unidecode


def condense_path(full_path: str) -> str:
    """
    Condenses a full path by replacing the home directory with a tilde (~).

    Args:
        full_path (str): The full path to be condensed.

    Returns:
        str: The condensed path with the home directory replaced by a tilde (~).
    """
    home_dir = os.path.expanduser("~")
    condensed_path = os.path.relpath(full_path, home_dir)
    if not condensed_path.startswith(".."):
        condensed_path = "~" + os.path.sep + condensed_path
    return condensed_path


def slugify(name: str) -> str:
    """
    Turns an experiment name into a lower-snake-case file name stem, i.e. "Fréchet EVL" -> "frechet_evl".
    """
    keep_characters = (' ', '_', '-')
    name = unidecode(name)
    name = "".join(c for c in name if c.isalnum() or c in keep_characters).strip().lower()
    return "_".join(name.replace("-", " ").split())


def format_float(value) -> str:
    """
    17 significant digits, enough to round-trip every double.
    """
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def to_json_value(value):
    """
    Converts numpy values and containers into plain JSON values. Non-finite floats become strings.
    """
    if isinstance(value, dict):
        return {str(k): to_json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [to_json_value(v) for v in value]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if np.isfinite(value) else str(value)
    return value


def write_csv(path: str, header: list[str], rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_float(v) if not isinstance(v, str) else v for v in row])


def write_json(path: str, record: dict):
    with open(path, "w") as f:
        json.dump(to_json_value(record), f, indent=4)
        f.write("\n")


@contextlib.contextmanager
def staged_outputs(out_dir: str):
    """
    Yields a staging directory. Its files are moved into out_dir when the block completes and
    discarded when it raises, so a failed run leaves no partial outputs.
    """
    os.makedirs(out_dir, exist_ok=True)
    staging = tempfile.mkdtemp(prefix=".reclab-", dir=out_dir)
    try:
        yield staging
        for name in sorted(os.listdir(staging)):
            os.replace(os.path.join(staging, name), os.path.join(out_dir, name))
    finally:
        shutil.rmtree(staging, ignore_errors=True)

"""
Writing and reading of result files. Outputs contain no timestamps and are written with sorted keys, so that
repeated runs produce identical files; timings are kept in the manifest only.
"""
import hashlib
import io
import json
import os
import zipfile
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

from travelwave import __version__
from travelwave.errors import MissingPrerequisiteError

RESULT_SCHEMA_VERSION = 1
NPZ_FORMAT_VERSION = 1
# fixed modification time of the zip entries in the binary cache
ZIP_DATE = (1980, 1, 1, 0, 0, 0)


def _plain(value: Any) -> Any:
    """
    Converts numpy scalars and arrays for the json module.
    """
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, np.bool_):
        return bool(value)
    raise TypeError(f"{type(value).__name__} is not serializable")


def write_json(filename: str, data: Dict[str, Any]) -> None:
    os.makedirs(os.path.dirname(filename) or ".", exist_ok=True)
    with open(filename, 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True, default=_plain)
        f.write("\n")


def read_json(filename: str, stage: Optional[str] = None) -> Dict[str, Any]:
    """
    Reads a result file. Raises MissingPrerequisiteError if it does not exist.
    :param filename: the file
    :param stage: the stage that writes the file; used in the error message
    """
    if not os.path.exists(filename):
        hint = f"; run '{stage}' first" if stage else ""
        raise MissingPrerequisiteError(f"{os.path.basename(filename)} not found{hint}")
    with open(filename, 'r') as f:
        return json.load(f)


def write_csv(filename: str, header: Sequence[str], rows, fmt: str = '%.12g') -> None:
    """
    Writes a table of numbers (or strings with fmt '%s') with a single header line.
    """
    os.makedirs(os.path.dirname(filename) or ".", exist_ok=True)
    rows = np.asarray(rows)
    if rows.size == 0:
        rows = rows.reshape(0, len(header))
    np.savetxt(filename, rows, fmt=fmt, delimiter=',', header=','.join(header), comments='')


def write_text(filename: str, text: str) -> None:
    os.makedirs(os.path.dirname(filename) or ".", exist_ok=True)
    with open(filename, 'w') as f:
        f.write(text if text.endswith("\n") else text + "\n")


def write_npz(filename: str, arrays: Dict[str, np.ndarray]) -> None:
    """
    Writes arrays in the numpy zip format with fixed entry dates and a `format_version` entry.
    """
    arrays = dict(arrays)
    arrays['format_version'] = np.array(NPZ_FORMAT_VERSION)
    os.makedirs(os.path.dirname(filename) or ".", exist_ok=True)
    with zipfile.ZipFile(filename, 'w', compression=zipfile.ZIP_DEFLATED) as archive:
        for name in sorted(arrays):
            buffer = io.BytesIO()
            np.lib.format.write_array(buffer, np.asarray(arrays[name]), allow_pickle=False)
            info = zipfile.ZipInfo(f"{name}.npy", date_time=ZIP_DATE)
            info.compress_type = zipfile.ZIP_DEFLATED
            archive.writestr(info, buffer.getvalue())


def read_npz(filename: str) -> Dict[str, np.ndarray]:
    if not os.path.exists(filename):
        raise MissingPrerequisiteError(f"{os.path.basename(filename)} not found")
    with np.load(filename, allow_pickle=False) as data:
        arrays = {name: data[name] for name in data.files}
    if int(arrays.get('format_version', -1)) != NPZ_FORMAT_VERSION:
        raise MissingPrerequisiteError(f"{filename} has an unsupported format version")
    return arrays


def file_hash(filename: str) -> str:
    digest = hashlib.sha256()
    with open(filename, 'rb') as f:
        for block in iter(lambda: f.read(1 << 16), b''):
            digest.update(block)
    return digest.hexdigest()


def config_hash(config: Dict[str, Any]) -> str:
    return hashlib.sha256(json.dumps(config, sort_keys=True, default=_plain).encode()).hexdigest()


class RunManifest(object):
    """
    Inventory of an output directory: config hash, version, per stage timings, certification flags and a content
    hash per file.
    """

    FILENAME = "manifest.json"

    def __init__(self, out_dir: str, config: Dict[str, Any]) -> None:
        self.out_dir = out_dir
        self.config_hash = config_hash(config)
        self.timings = {}  # type: Dict[str, float]
        self.certification = {}  # type: Dict[str, bool]
        self.files = []  # type: List[str]
        previous = os.path.join(out_dir, self.FILENAME)
        if os.path.exists(previous):
            with open(previous, 'r') as f:
                data = json.load(f)
            if data.get('config_hash') == self.config_hash:
                self.timings = data.get('timings', {})
                self.certification = data.get('certification', {})
                self.files = sorted(data.get('files', {}))

    def path(self, *parts: str) -> str:
        return os.path.join(self.out_dir, *parts)

    def record(self, filenames: Iterable[str]) -> None:
        for filename in filenames:
            relative = os.path.relpath(filename, self.out_dir)
            if relative not in self.files:
                self.files.append(relative)
        self.files.sort()

    def stage_done(self, stage: str, seconds: float, certified: Optional[bool] = None) -> None:
        self.timings[stage] = round(seconds, 3)
        if certified is not None:
            self.certification[stage] = bool(certified)

    @property
    def certified(self) -> bool:
        return all(self.certification.values())

    def to_dict(self) -> dict:
        files = {name: file_hash(self.path(name)) for name in self.files if os.path.exists(self.path(name))}
        return {'schema_version': RESULT_SCHEMA_VERSION, 'version': __version__, 'config_hash': self.config_hash,
                'timings': self.timings, 'certification': self.certification, 'certified': self.certified,
                'files': files}

    def save(self) -> str:
        filename = self.path(self.FILENAME)
        write_json(filename, self.to_dict())
        return filename

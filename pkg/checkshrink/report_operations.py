"""Input and output operations module for checkshrink."""
import io
import json
import math
import os
import re
import sys
import tempfile

import numpy as np
import pandas as pd

from checkshrink.check_loss import ProblemInstance, TruthInstance
from checkshrink.experiments import Catalogue

INSTANCE_COLUMNS = ("x", "sigma_p", "sigma_f", "b", "h")
CATALOGUE_COLUMNS = ("theta", "price")


class DataFormatError(ValueError):
    """Raised when an input file cannot be parsed; carries the 1-based line number."""

    def __init__(self, path, line, message):
        self.path = path
        self.line = line
        location = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{location}: {message}")


def to_jsonable(value):
    """Plain Python values for JSON: infinities become "inf"/"-inf", NaN becomes null."""
    if isinstance(value, dict):
        return {str(key): to_jsonable(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(item) for item in value]
    if isinstance(value, np.ndarray):
        return [to_jsonable(item) for item in value.tolist()]
    if isinstance(value, (np.integer,)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return None
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


class ReportOperations:
    """Class for reading problem data and writing reports.

    Reports go to ``config.output_path`` through a temporary file in the same
    directory and an atomic rename, or to stdout when no path is set.
    """

    def __init__(self, config, stdout=None):
        """Initialize with configuration."""
        self.config = config
        self.output_path = config.output_path
        self.stdout = stdout if stdout is not None else sys.stdout

    # PUBLIC METHODS - Reading

    def read_instance(self, path, require_theta=False):
        """Read an instance CSV with columns x,sigma_p,sigma_f,b,h and an optional theta.

        Returns:
            tuple: (ProblemInstance, TruthInstance or None)

        Raises:
            DataFormatError: If the file is malformed, with the offending line.
        """
        frame = self._read_csv(path, INSTANCE_COLUMNS + (("theta",) if require_theta else ()))
        columns = {name: self._numeric_column(path, frame, name) for name in INSTANCE_COLUMNS}
        theta = self._numeric_column(path, frame, "theta") if "theta" in frame.columns else None
        for name in ("sigma_p", "sigma_f", "b", "h"):
            self._check_positive(path, frame, columns[name], name)
        inst = ProblemInstance(**columns)
        return inst, TruthInstance(theta) if theta is not None else None

    def read_catalogue(self, path):
        """Read a newsvendor catalogue CSV with columns theta,price."""
        frame = self._read_csv(path, CATALOGUE_COLUMNS)
        theta = self._numeric_column(path, frame, "theta")
        price = self._numeric_column(path, frame, "price")
        self._check_positive(path, frame, price, "price")
        return Catalogue(theta, price)

    # PUBLIC METHODS - Writing

    def write_json(self, payload):
        text = json.dumps(to_jsonable(payload), indent=2, allow_nan=False) + "\n"
        self._write_text(text)

    def write_csv(self, rows, columns):
        """Write dict rows as CSV with the given column order; inf is written as "inf"."""
        frame = pd.DataFrame(list(rows), columns=list(columns))
        buffer = io.StringIO()
        frame.to_csv(buffer, index=False, lineterminator="\n", na_rep="")
        self._write_text(buffer.getvalue())

    # PRIVATE METHODS - Parsing

    def _read_csv(self, path, required):
        try:
            frame = pd.read_csv(path, dtype=str, skipinitialspace=True, skip_blank_lines=False, encoding="utf-8")
        except pd.errors.EmptyDataError as e:
            raise DataFormatError(path, 1, "file is empty") from e
        except pd.errors.ParserError as e:
            match = re.search(r"line (\d+)", str(e))
            raise DataFormatError(path, int(match.group(1)) if match else None, f"malformed CSV ({e})") from e
        except UnicodeDecodeError as e:
            raise DataFormatError(path, None, "file is not UTF-8 encoded") from e

        frame.columns = [str(column).strip() for column in frame.columns]
        missing = [column for column in required if column not in frame.columns]
        if missing:
            raise DataFormatError(path, 1, f"missing column(s) {', '.join(missing)}; header is {','.join(frame.columns)}")
        # Blank lines are dropped but keep their place in the index, so index + 2 is the file line.
        frame = frame.dropna(how="all")
        if frame.empty:
            raise DataFormatError(path, 2, "no data rows")
        return frame

    @staticmethod
    def _numeric_column(path, frame, name):
        raw = frame[name]
        values = pd.to_numeric(raw, errors="coerce")
        bad = values.isna() | ~np.isfinite(values.to_numpy(dtype=float, na_value=np.nan))
        if bad.any():
            position = int(np.flatnonzero(bad.to_numpy())[0])
            raise DataFormatError(path, int(frame.index[position]) + 2, f"column {name} has a non-numeric value {raw.iloc[position]!r}")
        return values.to_numpy(dtype=float)

    @staticmethod
    def _check_positive(path, frame, values, name):
        bad = np.flatnonzero(values <= 0.0)
        if bad.size:
            raise DataFormatError(path, int(frame.index[bad[0]]) + 2, f"column {name} must be strictly positive, got {values[bad[0]]}")

    # PRIVATE METHODS - Output

    def _write_text(self, text):
        if not self.output_path:
            self.stdout.write(text)
            self.stdout.flush()
            return

        directory = os.path.dirname(os.path.abspath(self.output_path))
        handle = tempfile.NamedTemporaryFile(
            mode="w", dir=directory, prefix=".checkshrink-", suffix=".tmp", delete=False, encoding="utf-8", newline=""
        )
        try:
            with handle:
                handle.write(text)
            os.replace(handle.name, self.output_path)
        except BaseException:
            if os.path.exists(handle.name):
                os.unlink(handle.name)
            raise
        if self.config.verbose:
            print(f"Report written to {self.output_path}", file=sys.stderr)

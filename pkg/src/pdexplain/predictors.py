"""Batch scoring contract and built-in learners.

Every model maps a float matrix (one column per schema entry, categorical
cells holding level indices) to one finite prediction per row, and is
deterministic: the same rows always produce the same outputs.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import selectors
import shlex
import subprocess
import tempfile
import threading
import time

import numpy as np

from .errors import FitError, PersistError, PredictError, SchemaError
from .tabular import NUMERIC, ColumnSpec, DataTable

FORMAT_VERSION = 1


class Predictor:
    """Scoring contract: ``predict`` maps an (n, p) matrix to n predictions."""

    #: whether concurrent predict() calls are safe without external locking
    concurrency_safe: bool = True

    @property
    def schema(self) -> tuple[ColumnSpec, ...]:
        raise NotImplementedError

    @property
    def columns(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.schema)

    def predict(self, rows) -> np.ndarray:
        raise NotImplementedError

    def _check_rows(self, rows) -> np.ndarray:
        x = np.ascontiguousarray(np.asarray(rows, dtype=np.float64))
        if x.ndim != 2:
            raise SchemaError(f"expected a 2-d matrix of rows, got ndim={x.ndim}")
        if x.shape[1] != len(self.schema):
            raise SchemaError(
                f"row width {x.shape[1]} does not match the {len(self.schema)}-column model schema"
            )
        return x


class LinearModel(Predictor):
    """Least-squares fit: intercept plus one coefficient per numeric column."""

    def __init__(self, schema, intercept: float, coefficients):
        schema = tuple(schema)
        if any(c.role != NUMERIC for c in schema):
            raise ValueError("LinearModel requires an all-numeric schema")
        coef = np.asarray(coefficients, dtype=np.float64)
        if coef.ndim != 1 or coef.size != len(schema):
            raise ValueError("coefficient count must equal column count")
        coef.setflags(write=False)
        self._schema = schema
        self.intercept = float(intercept)
        self.coefficients = coef

    @property
    def schema(self) -> tuple[ColumnSpec, ...]:
        return self._schema

    def predict(self, rows) -> np.ndarray:
        x = self._check_rows(rows)
        # fixed-order accumulation instead of a BLAS product: per-row results
        # must not depend on how the engine batches rows
        out = np.full(x.shape[0], self.intercept, dtype=np.float64)
        for j in range(x.shape[1]):
            out += x[:, j] * self.coefficients[j]
        return out


def fit_linear(data: DataTable, target: int | str) -> LinearModel:
    """Ordinary least squares of the target on all remaining columns."""
    t = data.column_index(target)
    if data.schema[t].role != NUMERIC:
        raise FitError(f"target column {data.schema[t].name!r} is not numeric")
    feature_idx = [j for j in range(data.n_columns) if j != t]
    for j in feature_idx:
        if data.schema[j].role != NUMERIC:
            raise FitError(f"feature column {data.schema[j].name!r} is categorical; linear fit needs numeric features")
    p = len(feature_idx)
    if data.n <= p:
        raise FitError(f"need more rows ({data.n}) than features ({p})")
    x = data.data[:, feature_idx]
    y = data.data[:, t]
    design = np.hstack([np.ones((data.n, 1)), x])
    beta, _, rank, _ = np.linalg.lstsq(design, y, rcond=None)
    if rank < p + 1:
        raise FitError("singular design matrix (collinear or constant features)")
    schema = tuple(data.schema[j] for j in feature_idx)
    return LinearModel(schema, beta[0], beta[1:])


class PipePredictor(Predictor):
    """External model reached over a line-oriented stdin/stdout protocol.

    Per batch the parent writes a CSV header, ``k`` data rows (numeric cell
    encoding, so categorical cells arrive as level indices) and one blank
    line; the child answers with exactly ``k`` lines, one decimal number
    each. The child process is spawned on first use and kept alive across
    batches. Access is serialized, so ``concurrency_safe`` is False.
    """

    concurrency_safe = False

    def __init__(self, command, schema, batch_size: int = 1000, timeout: float = 30.0):
        self.command = command
        self._argv = shlex.split(command) if isinstance(command, str) else list(command)
        if not self._argv:
            raise ValueError("empty pipe command")
        self._schema = tuple(
            c if isinstance(c, ColumnSpec) else ColumnSpec(str(c), NUMERIC) for c in schema
        )
        if batch_size < 1:
            raise ValueError("batch size must be positive")
        self.batch_size = int(batch_size)
        self.timeout = float(timeout)
        self._proc: subprocess.Popen | None = None
        self._stderr = None
        self._buf = b""
        self._lock = threading.Lock()

    @property
    def schema(self) -> tuple[ColumnSpec, ...]:
        return self._schema

    def predict(self, rows) -> np.ndarray:
        x = self._check_rows(rows)
        out = np.empty(x.shape[0], dtype=np.float64)
        with self._lock:
            self._ensure_child()
            for lo in range(0, x.shape[0], self.batch_size):
                chunk = x[lo:lo + self.batch_size]
                out[lo:lo + chunk.shape[0]] = self._score_batch(chunk)
        return out

    def _ensure_child(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            return
        self._stderr = tempfile.TemporaryFile()
        try:
            self._proc = subprocess.Popen(
                self._argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=self._stderr,
            )
        except OSError as exc:
            raise PredictError(f"cannot start pipe command {self.command!r}: {exc}") from exc
        self._buf = b""

    def _score_batch(self, chunk: np.ndarray) -> np.ndarray:
        proc = self._proc
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(self.columns)
        for row in chunk:
            writer.writerow([repr(float(v)) for v in row])
        payload = buf.getvalue() + "\n"  # trailing blank line marks the batch end
        try:
            proc.stdin.write(payload.encode("utf-8"))
            proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            self._fail(f"child closed stdin while receiving a batch: {exc}")
        lines = self._read_lines(chunk.shape[0])
        values = np.empty(chunk.shape[0], dtype=np.float64)
        for i, line in enumerate(lines):
            try:
                v = float(line)
            except ValueError:
                self._fail(f"child emitted a non-numeric line {line!r}")
            if not math.isfinite(v):
                self._fail(f"child emitted a non-finite prediction {line!r}")
            values[i] = v
        return values

    def _read_lines(self, k: int) -> list[str]:
        deadline = time.monotonic() + self.timeout
        fd = self._proc.stdout.fileno()
        sel = selectors.DefaultSelector()
        sel.register(fd, selectors.EVENT_READ)
        lines: list[str] = []
        try:
            while len(lines) < k:
                while b"\n" in self._buf and len(lines) < k:
                    raw, self._buf = self._buf.split(b"\n", 1)
                    lines.append(raw.decode("utf-8").strip())
                if len(lines) == k:
                    break
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    self._fail(f"timed out after {self.timeout}s waiting for predictions")
                if not sel.select(timeout=remaining):
                    continue
                data = os.read(fd, 65536)
                if not data:
                    self._fail("child closed stdout before answering the batch")
                self._buf += data
        finally:
            sel.close()
        return lines

    def _fail(self, reason: str):
        proc = self._proc
        rc = None
        if proc is not None:
            proc.kill()
            try:
                rc = proc.wait(timeout=5)
            except subprocess.TimeoutExpired:
                rc = None
        tail = b""
        if self._stderr is not None:
            try:
                self._stderr.seek(0, os.SEEK_END)
                size = self._stderr.tell()
                self._stderr.seek(max(0, size - 2000))
                tail = self._stderr.read()
            except (OSError, ValueError):
                tail = b""
        self._proc = None
        msg = f"pipe predictor {self.command!r} failed: {reason}"
        if rc is not None:
            msg += f" (child exit status {rc})"
        if tail.strip():
            msg += f"\nchild stderr tail:\n{tail.decode('utf-8', 'replace')}"
        raise PredictError(msg)

    def close(self) -> None:
        proc, self._proc = self._proc, None
        if proc is not None:
            try:
                proc.stdin.close()
                proc.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                proc.kill()
                proc.wait()
        if self._stderr is not None:
            self._stderr.close()
            self._stderr = None

    def __enter__(self) -> "PipePredictor":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __del__(self):
        try:
            self.close()
        except Exception:
            pass


def _schema_doc(schema) -> list[dict]:
    return [{"name": c.name, "role": c.role, "levels": list(c.levels)} for c in schema]


def _schema_from_doc(doc) -> tuple[ColumnSpec, ...]:
    return tuple(ColumnSpec(d["name"], d["role"], tuple(d["levels"])) for d in doc)


def save_model(model: Predictor, path) -> None:
    """Persist a built-in model as a versioned, self-describing JSON document."""
    from .forest import BaggedForest  # local import avoids a module cycle

    if isinstance(model, LinearModel):
        kind = "linear"
        params = {
            "intercept": model.intercept,
            "coefficients": model.coefficients.tolist(),
        }
    elif isinstance(model, BaggedForest):
        kind = "forest"
        params = model.parameters_doc()
    else:
        raise PersistError(f"cannot persist a model of type {type(model).__name__}")
    doc = {
        "format_version": FORMAT_VERSION,
        "model_kind": kind,
        "schema": _schema_doc(model.schema),
        "parameters": params,
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_model(path) -> Predictor:
    """Load a model saved by :func:`save_model`; predictions match bit-exactly."""
    from .forest import BaggedForest

    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise PersistError(f"cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise PersistError(f"corrupt model document {path}: {exc}") from exc
    try:
        version = doc["format_version"]
        if version != FORMAT_VERSION:
            raise PersistError(f"unsupported model format_version {version!r}")
        kind = doc["model_kind"]
        schema = _schema_from_doc(doc["schema"])
        params = doc["parameters"]
        if kind == "linear":
            return LinearModel(schema, params["intercept"], params["coefficients"])
        if kind == "forest":
            return BaggedForest.from_parameters_doc(schema, params)
        raise PersistError(f"unknown model_kind {kind!r}")
    except PersistError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise PersistError(f"corrupt model document {path}: {exc}") from exc

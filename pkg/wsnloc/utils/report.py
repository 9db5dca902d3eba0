"""CSV output and console tables of wsnloc."""

import csv
import io
from collections.abc import Iterable, Sequence
from textwrap import wrap
from typing import Any

import anyio
import numpy as np
from prettytable import PrettyTable

from ..const import (
    COORD_COLUMNS,
    MEAN_HEADER,
    REFINEMENT_HEADER,
    RMSE_HEADER,
    SIGNIFICANT_DIGITS,
    SWEEP_HEADER,
)
from ..exceptions import ConfigurationError, OutputError
from .logger import _LOGGER


def fmt(value: Any) -> str:
    """Render a number with 9 significant digits; other values as str."""
    if isinstance(value, (bool, np.bool_)):
        return str(int(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.{SIGNIFICANT_DIGITS}g}"
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    """Render a header and rows as CSV text with `\\n` line endings."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(value) for value in row])
    return buffer.getvalue()


def parse_csv(text: str) -> tuple[list[str], list[list[str]]]:
    """Split CSV text into its header and data rows."""
    rows = [row for row in csv.reader(io.StringIO(text)) if row]
    if not rows:
        return [], []
    return [cell.strip() for cell in rows[0]], rows[1:]


async def async_write_text(path: str | anyio.Path, text: str) -> None:
    """Write a text file, creating parent directories."""
    target = anyio.Path(path)
    try:
        await target.parent.mkdir(parents=True, exist_ok=True)
        async with await anyio.open_file(target, "w", encoding="utf-8", newline="") as out:
            await out.write(text)
    except OSError as exc:
        raise OutputError(
            f"Unable to write file '{path}': {exc.strerror} [Error:{exc.errno}]", str(path)
        ) from exc
    _LOGGER.debug(f"::async_write_text:: saved {path}")


async def async_read_text(path: str | anyio.Path) -> str:
    """Read a text file."""
    try:
        return await anyio.Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise OutputError(
            f"Unable to read file '{path}': {exc.strerror} [Error:{exc.errno}]", str(path)
        ) from exc
    except UnicodeDecodeError as exc:
        raise ConfigurationError(f"File '{path}' is not valid UTF-8: {exc.reason}") from exc


def rmse_rows(records: Iterable[Any]) -> list[list[Any]]:
    """Rows of the per-replica RMSE file in replica-major order."""
    rows = []
    for record in sorted(records, key=lambda r: r.replica):
        for cp in record.checkpoints:
            rows.append([record.replica, cp.tick, cp.broadcasts, cp.rmse, cp.wall_ms])
    return rows


async def emit_csv(records: Iterable[Any], path: str | anyio.Path) -> None:
    """Write `replica,tick,broadcasts,rmse_m,wall_ms` for every checkpoint."""
    await async_write_text(path, render_csv(RMSE_HEADER, rmse_rows(records)))


def position_rows(positions: np.ndarray) -> tuple[list[str], list[list[Any]]]:
    """Header and rows `node,x_m,y_m[,z_m]`."""
    positions = np.asarray(positions, dtype=float)
    header = ["node"] + COORD_COLUMNS[: positions.shape[1]]
    return header, [[i, *row] for i, row in enumerate(positions)]


async def emit_positions(positions: np.ndarray, path: str | anyio.Path) -> None:
    """Write final position estimates."""
    header, rows = position_rows(positions)
    await async_write_text(path, render_csv(header, rows))


async def emit_scenario(
    positions: np.ndarray, anchors: Sequence[int], path: str | anyio.Path
) -> None:
    """Write a scenario as `node,x_m,y_m[,z_m],is_anchor`."""
    header, rows = position_rows(positions)
    anchor_set = set(anchors)
    await async_write_text(
        path,
        render_csv(header + ["is_anchor"], [row + [int(row[0] in anchor_set)] for row in rows]),
    )


async def emit_mean(curve: Sequence[Sequence[Any]], path: str | anyio.Path) -> None:
    """Write `tick,broadcasts,rmse_m` rows of the replica-mean curve."""
    await async_write_text(path, render_csv(MEAN_HEADER, curve))


async def emit_sweep(rows: Sequence[Sequence[Any]], path: str | anyio.Path) -> None:
    """Write `q_obs,q_ats,tick,broadcasts,rmse_m` rows."""
    await async_write_text(path, render_csv(SWEEP_HEADER, rows))


async def emit_refinement(summary: Sequence[Any], path: str | anyio.Path) -> None:
    """Write the one-row refinement summary."""
    await async_write_text(path, render_csv(REFINEMENT_HEADER, [summary]))


def parse_positions(text: str, source: str = "<positions>") -> tuple[np.ndarray, tuple[int, ...]]:
    """Parse a positions or scenario CSV; returns positions and anchor indices."""
    header, rows = parse_csv(text)
    coords = [c for c in COORD_COLUMNS if c in header]
    if "node" not in header or len(coords) < 2:
        raise ConfigurationError(f"{source}: expected columns node,x_m,y_m[,z_m], got {header}")
    node_col = header.index("node")
    cols = [header.index(c) for c in coords]
    anchor_col = header.index("is_anchor") if "is_anchor" in header else None
    try:
        ordered = sorted(rows, key=lambda row: int(row[node_col]))
        positions = np.array([[float(row[c]) for c in cols] for row in ordered])
        anchors = tuple(
            int(row[node_col])
            for row in ordered
            if anchor_col is not None and int(row[anchor_col])
        )
    except (ValueError, IndexError) as exc:
        raise ConfigurationError(f"{source}: malformed row ({exc})") from exc
    if [int(row[node_col]) for row in ordered] != list(range(len(ordered))):
        raise ConfigurationError(f"{source}: node ids must be 0..N-1")
    return positions.reshape(len(ordered), len(cols)), anchors


def parse_matrix(text: str, source: str = "<matrix>") -> np.ndarray:
    """Parse a headerless square CSV matrix."""
    try:
        rows = [[float(cell) for cell in row] for row in csv.reader(io.StringIO(text)) if row]
    except ValueError as exc:
        raise ConfigurationError(f"{source}: malformed matrix ({exc})") from exc
    matrix = np.array(rows, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise ConfigurationError(f"{source}: expected a square matrix, got shape {matrix.shape}")
    return matrix


def table_renderer(field_names: Sequence[str], rows: Iterable[Sequence[Any]], width: int = 0) -> str:
    """Render rows as an ASCII table."""
    table = PrettyTable()
    table.field_names = list(field_names)
    for row in rows:
        table.add_row([fill(fmt(value), width) for value in row])
    table.align = "l"
    return table.get_string()


def fill(data: Any, width: int, extra: str | None = None) -> str:
    """Arrange data by table column width."""
    out = str(data) if not extra else f"{data} ('{extra}')"
    return "\n".join([line.ljust(width) for line in wrap(out, width)]) if width > 0 else out

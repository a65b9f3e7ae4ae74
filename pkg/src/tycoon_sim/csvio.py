"""Deterministic CSV emission for experiment results.

Every table starts with a ``# config-hash: <hex>`` comment naming the
fully resolved configuration that produced it, so a result file can be
matched to its inputs long after the run.  Floats are rendered to six
significant digits; reruns with the same configuration and seeds must
produce byte-identical bodies.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json

__all__ = [
    "config_hash",
    "emit_csv",
    "format_field",
    "read_csv",
]


def config_hash(config: dict) -> str:
    """Hex digest of a fully resolved configuration mapping.

    The mapping is canonicalized (sorted keys, no whitespace) before
    hashing so key order in the source document cannot change the hash.
    """
    canon = json.dumps(config, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def format_field(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.6g}"
    return str(value)


def emit_csv(path, header: list[str], rows, config: dict,
             comments: tuple[str, ...] = ()) -> None:
    """Write one result table.

    ``rows`` is an iterable of sequences matching ``header``.  Extra
    ``comments`` lines (already formatted, without the leading ``# ``)
    are written after the config-hash line and before the header.  An
    empty ``rows`` still produces the header, so a no-data run leaves a
    parseable file behind.
    """
    buf = io.StringIO()
    buf.write(f"# config-hash: {config_hash(config)}\n")
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(
                f"row has {len(row)} fields, header has {len(header)}")
        writer.writerow([format_field(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path) -> tuple[str, list[str], list[list[str]]]:
    """Parse back an emitted table: (config hash, header, string rows).

    Comment lines other than the config hash are skipped.  Values come
    back as the printed strings; callers reparse numerics themselves.
    """
    digest = ""
    with open(path, encoding="utf-8", newline="") as fh:
        lines = []
        for line in fh:
            if line.startswith("# "):
                if line.startswith("# config-hash: "):
                    digest = line[len("# config-hash: "):].strip()
                continue
            lines.append(line)
    parsed = list(csv.reader(lines))
    if not parsed:
        raise ValueError(f"{path} has no header row")
    return digest, parsed[0], parsed[1:]

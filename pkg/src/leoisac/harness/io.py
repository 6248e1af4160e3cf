"""Writing and re-reading experiment outputs."""
from __future__ import annotations

from pathlib import Path

from .experiment import ResultTable, RunManifest


def write_results(table: ResultTable, manifest: RunManifest, out_dir) -> dict[str, Path]:
    """results.csv (UTF-8, CRLF) and manifest.json under ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    csv_path = out / "results.csv"
    csv_path.write_bytes(table.to_csv().encode("utf-8"))
    man_path = out / "manifest.json"
    man_path.write_text(manifest.to_json() + "\n", encoding="utf-8")
    return {"results": csv_path, "manifest": man_path}


def read_results(path) -> ResultTable:
    return ResultTable.from_csv(Path(path).read_bytes().decode("utf-8"))

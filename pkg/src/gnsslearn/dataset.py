"""JSON-lines dataset files: one header line, then one line per epoch.

Header: {"format": "gnsslearn-dataset", "version": 1, "config": {...}}
Epoch:  {"t": seconds, "truth": [x, y, z] | null, "sats": [{"id", "sys",
        "pr", "cn0", "el", "los", "bias"}, ...]}

Floats are written with full round-trip precision, so regenerating a file
from the same seed reproduces it byte for byte. Readers reject unknown
format versions.
"""

from __future__ import annotations

import json
from typing import Iterable

from .errors import MalformedDataset, VersionMismatch
from .geodesy import EcefPosition
from .observations import Epoch, GnssSystem, SatelliteObservation
from .validation import check_epoch

DATASET_FORMAT = "gnsslearn-dataset"
DATASET_FORMAT_VERSION = 1


def _epoch_record(epoch: Epoch) -> dict:
    return {
        "t": epoch.t,
        "truth": None if epoch.truth_pos is None else [epoch.truth_pos.x, epoch.truth_pos.y, epoch.truth_pos.z],
        "sats": [
            {
                "id": o.sat_id,
                "sys": o.system.value,
                "pos": [o.sat_pos.x, o.sat_pos.y, o.sat_pos.z],
                "pr": o.pseudorange,
                "cn0": o.cn0,
                "el": o.elevation,
                "los": o.los_truth,
                "bias": o.bias_truth,
            }
            for o in epoch.observations
        ],
    }


def save_dataset(epochs: Iterable[Epoch], path: str, config_echo: dict | None = None) -> None:
    """Write epochs to a JSON-lines file with a self-describing header."""
    header = {"format": DATASET_FORMAT, "version": DATASET_FORMAT_VERSION, "config": config_echo}
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps(header, separators=(",", ":")) + "\n")
        for epoch in epochs:
            fh.write(json.dumps(_epoch_record(epoch), separators=(",", ":")) + "\n")


def _parse_epoch(record: dict, lineno: int) -> Epoch:
    try:
        truth = record["truth"]
        truth_pos = None if truth is None else EcefPosition(float(truth[0]), float(truth[1]), float(truth[2]))
        observations = tuple(
            SatelliteObservation(
                sat_id=str(s["id"]),
                system=GnssSystem(s["sys"]),
                sat_pos=EcefPosition(float(s["pos"][0]), float(s["pos"][1]), float(s["pos"][2])),
                pseudorange=float(s["pr"]),
                cn0=float(s["cn0"]),
                elevation=float(s["el"]),
                los_truth=None if s.get("los") is None else bool(s["los"]),
                bias_truth=None if s.get("bias") is None else float(s["bias"]),
            )
            for s in record["sats"]
        )
        return Epoch(t=float(record["t"]), observations=observations, truth_pos=truth_pos)
    except (KeyError, IndexError, TypeError, ValueError) as exc:
        raise MalformedDataset(f"line {lineno}: bad epoch record: {exc}") from exc


def load_dataset(path: str, validate: bool = True) -> tuple[list[Epoch], dict | None]:
    """Read a dataset file; returns (epochs, header config echo)."""
    with open(path, encoding="utf-8") as fh:
        header_line = fh.readline()
        if not header_line.strip():
            raise MalformedDataset(f"{path}: empty file")
        try:
            header = json.loads(header_line)
        except json.JSONDecodeError as exc:
            raise MalformedDataset(f"{path}: bad header line: {exc}") from exc
        if not isinstance(header, dict) or header.get("format") != DATASET_FORMAT:
            raise MalformedDataset(f"{path}: missing {DATASET_FORMAT} header")
        if header.get("version") != DATASET_FORMAT_VERSION:
            raise VersionMismatch(f"{path}: unsupported dataset version {header.get('version')!r}")

        epochs: list[Epoch] = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedDataset(f"{path} line {lineno}: {exc}") from exc
            epoch = _parse_epoch(record, lineno)
            if validate:
                try:
                    check_epoch(epoch)
                except ValueError as exc:
                    raise MalformedDataset(f"{path} line {lineno}: {exc}") from exc
            epochs.append(epoch)
    return epochs, header.get("config")

"""Subprocess adapters for the reference layer coders: FLIF (lossless) and BPG (lossy).

Images travel through PNG files in a private temporary directory that is
removed on every exit path. BPG always runs in RGB444 mode:

    bpgenc -f 444 -c rgb -b 8 -m 8 -q <q> -o out.bpg in.png
    bpgdec -o out.png in.bpg
    flif -e in.png out.flif
    flif -d in.flif out.png

Binary paths come from LHIC_FLIF_PATH / LHIC_BPGENC_PATH / LHIC_BPGDEC_PATH,
falling back to a PATH lookup.
"""

from __future__ import annotations

import os
import shutil
import subprocess
import tempfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..errors import CodecConfigError, CodecError
from ..imageio import as_image, read_image, write_image
from .base import BPG_ID, FLIF_ID, LosslessCodec, LossyCodec

ENV_VARS = {"flif": "LHIC_FLIF_PATH", "bpgenc": "LHIC_BPGENC_PATH", "bpgdec": "LHIC_BPGDEC_PATH"}
BPG_FLAGS = ("-f", "444", "-c", "rgb", "-b", "8", "-m", "8")


@dataclass(frozen=True)
class ExternalToolConfig:
    flif: str | None = None
    bpgenc: str | None = None
    bpgdec: str | None = None
    timeout: float = 300.0
    temp_dir: str | None = None  # parent for per-call workspaces; None = system default

    @classmethod
    def from_env(cls, **overrides) -> "ExternalToolConfig":
        paths = {tool: os.environ.get(var) or shutil.which(tool) for tool, var in ENV_VARS.items()}
        paths.update(overrides)
        return cls(**paths)

    def binary(self, tool: str) -> str:
        path = getattr(self, tool)
        var = ENV_VARS[tool]
        if not path:
            raise CodecConfigError(f"{tool} binary not found; set {var} or put {tool} on PATH")
        if not (os.path.isfile(path) and os.access(path, os.X_OK)):
            raise CodecConfigError(f"{tool} binary {path!r} (from {var}) is not an executable file")
        return path

    def available(self, *tools: str) -> bool:
        try:
            for t in tools:
                self.binary(t)
        except CodecConfigError:
            return False
        return True


def _run(cmd: list[str], cfg: ExternalToolConfig, stage: str) -> None:
    try:
        proc = subprocess.run(cmd, capture_output=True, timeout=cfg.timeout, check=False)
    except subprocess.TimeoutExpired as exc:
        out = (exc.stdout or b"") + (exc.stderr or b"")
        raise CodecError(f"{cmd[0]} timed out after {cfg.timeout}s", stage=stage, output=out.decode(errors="replace")) from None
    except OSError as exc:
        raise CodecError(f"could not run {cmd[0]}: {exc}", stage=stage) from None
    if proc.returncode != 0:
        out = (proc.stdout + proc.stderr).decode(errors="replace")
        raise CodecError(f"{Path(cmd[0]).name} exited with status {proc.returncode}: {out.strip()[-500:]}", stage=stage, output=out)


class _Workspace:
    def __init__(self, cfg: ExternalToolConfig):
        self._tmp = tempfile.TemporaryDirectory(prefix="lhic-", dir=cfg.temp_dir)
        self.path = Path(self._tmp.name)

    def __enter__(self) -> Path:
        return self.path

    def __exit__(self, *exc) -> None:
        self._tmp.cleanup()


def _read_output(path: Path, stage: str) -> np.ndarray:
    if not path.exists():
        raise CodecError(f"tool reported success but wrote no {path.name}", stage=stage)
    try:
        return read_image(path)
    except Exception as exc:  # Pillow raises a zoo of types on garbage
        raise CodecError(f"unreadable decoder output: {exc}", stage=stage) from None


class FlifCodec(LosslessCodec):
    name = "flif"
    codec_id = FLIF_ID

    def __init__(self, cfg: ExternalToolConfig | None = None):
        self.cfg = cfg or ExternalToolConfig.from_env()

    def encode(self, img: np.ndarray) -> bytes:
        img = as_image(img)
        exe = self.cfg.binary("flif")
        with _Workspace(self.cfg) as tmp:
            write_image(tmp / "in.png", img)
            _run([exe, "-e", str(tmp / "in.png"), str(tmp / "out.flif")], self.cfg, "flif-encode")
            return (tmp / "out.flif").read_bytes()

    def decode(self, data: bytes) -> np.ndarray:
        exe = self.cfg.binary("flif")
        with _Workspace(self.cfg) as tmp:
            (tmp / "in.flif").write_bytes(data)
            _run([exe, "-d", str(tmp / "in.flif"), str(tmp / "out.png")], self.cfg, "flif-decode")
            return _read_output(tmp / "out.png", "flif-decode")


class BpgCodec(LossyCodec):
    """Quality is the BPG quantizer parameter: lower is better, 0..51."""

    name = "bpg"
    codec_id = BPG_ID
    quality_range = (0, 51)
    default_qualities = (30, 35, 40, 45)

    def __init__(self, cfg: ExternalToolConfig | None = None):
        self.cfg = cfg or ExternalToolConfig.from_env()

    def encode(self, img: np.ndarray, quality: int) -> bytes:
        img = as_image(img)
        q = self.check_quality(quality)
        exe = self.cfg.binary("bpgenc")
        with _Workspace(self.cfg) as tmp:
            write_image(tmp / "in.png", img)
            _run([exe, *BPG_FLAGS, "-q", str(q), "-o", str(tmp / "out.bpg"), str(tmp / "in.png")], self.cfg, "bpg-encode")
            return (tmp / "out.bpg").read_bytes()

    def decode(self, data: bytes) -> np.ndarray:
        exe = self.cfg.binary("bpgdec")
        with _Workspace(self.cfg) as tmp:
            (tmp / "in.bpg").write_bytes(data)
            _run([exe, "-o", str(tmp / "out.png"), str(tmp / "in.bpg")], self.cfg, "bpg-decode")
            return _read_output(tmp / "out.png", "bpg-decode")

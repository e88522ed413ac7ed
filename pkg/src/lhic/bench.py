"""Rate-distortion benchmark over an image corpus.

Codec specs accepted by :func:`run_bench`:

* ``lhic:<scaling>[:<enhancement codec>]`` - the layered codec with the given
  residual scaling; the enhancement codec defaults to ``builtin-dct``.
* any registered lossy codec name (``builtin-dct``, ``bpg``) - that codec
  applied to the image directly, as a single-layer baseline.

Rows come out in corpus order, then codec order, then quality-grid order,
followed by per-(codec, quality) averages whose image field is ``AVERAGE``.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import codecs, container
from .errors import LHICError
from .imageio import list_images, read_image
from .metrics import psnr, quality_report
from .models import ACTIVATIONS, Autoencoder, load_model
from .pipeline import EncodeOptions, HybridCodec, pad_to_multiple
from .ranges import ScalingMethod

CSV_COLUMNS = ("image", "codec", "quality", "bpp", "psnr_db", "ms_ssim", "status")
AVERAGE = "AVERAGE"


@dataclass
class RDPoint:
    image: str
    codec: str
    quality: int
    bpp: float
    psnr_db: float
    ms_ssim: float
    status: str = "ok"

    def row(self) -> dict:
        out = asdict(self)
        for k in ("bpp", "psnr_db", "ms_ssim"):
            v = out[k]
            out[k] = "inf" if math.isinf(v) else ("nan" if math.isnan(v) else repr(float(v)))
        return out


@dataclass
class BenchConfig:
    corpus: Path
    codecs: list[str]
    qualities: dict[str, list[int]] = field(default_factory=dict)
    output: Path | None = None
    workers: int = 1
    dat_output: Path | None = None

    def __post_init__(self):
        self.corpus = Path(self.corpus)
        if not self.codecs:
            raise ValueError("at least one codec is required")
        for name, grid in self.qualities.items():
            if not grid:
                raise ValueError(f"empty quality grid for {name}")


@dataclass(frozen=True)
class _Spec:
    label: str
    lossy: str
    scaling: ScalingMethod | None  # None: single-layer baseline


def parse_codec_spec(spec: str) -> _Spec:
    parts = spec.split(":")
    if parts[0] == "lhic":
        if len(parts) not in (2, 3):
            raise ValueError(f"bad layered codec spec {spec!r}; expected lhic:<scaling>[:<codec>]")
        lossy = parts[2] if len(parts) == 3 else "builtin-dct"
        codecs.get_lossy(lossy)
        return _Spec(spec, lossy, ScalingMethod.parse(parts[1]))
    if codecs.is_lossless(spec):
        raise ValueError(f"{spec} is lossless; baselines must be lossy codecs")
    return _Spec(spec, spec, None)


def default_grid(spec: _Spec) -> list[int]:
    return list(codecs.get_lossy(spec.lossy).default_qualities)


def _bench_image(path: Path, specs: list[_Spec], grids: dict[str, list[int]], hybrid: HybridCodec | None) -> list[RDPoint]:
    rows = []
    try:
        img = read_image(path)
    except Exception as exc:
        return [RDPoint(path.name, s.label, q, math.nan, math.nan, math.nan, f"error: {exc}") for s in specs for q in grids[s.label]]
    h, w = img.shape[:2]
    for spec in specs:
        for q in grids[spec.label]:
            try:
                if spec.scaling is None:
                    codec = codecs.get_lossy(spec.lossy)
                    data = codec.encode(img, q)
                    report = quality_report(img, codec.decode(data), container.bpp(data, w, h))
                else:
                    if hybrid is None:
                        raise LHICError("layered codec requested but no model supplied")
                    opts = EncodeOptions(scaling=spec.scaling.name.lower(), quality=q, lossy_codec=spec.lossy)
                    _, _, report = hybrid.evaluate(img, opts)
                rows.append(RDPoint(path.name, spec.label, q, report.bpp, report.psnr_db, report.ms_ssim))
            except Exception as exc:  # one failing point must not sink the run
                rows.append(RDPoint(path.name, spec.label, q, math.nan, math.nan, math.nan, f"error: {exc}"))
    return rows


def _mean(values: list[float]) -> float:
    # inf PSNR (lossless points) propagates, as it should
    return float(np.mean(values)) if values else math.nan


def averages(rows: list[RDPoint], specs: list[_Spec], grids: dict[str, list[int]]) -> list[RDPoint]:
    out = []
    for spec in specs:
        for q in grids[spec.label]:
            ok = [r for r in rows if r.codec == spec.label and r.quality == q and r.status == "ok"]
            status = "ok" if ok else "error: no successful images"
            out.append(
                RDPoint(
                    AVERAGE,
                    spec.label,
                    q,
                    _mean([r.bpp for r in ok]),
                    _mean([r.psnr_db for r in ok]),
                    _mean([r.ms_ssim for r in ok]),
                    status,
                )
            )
    return out


def run_bench(cfg: BenchConfig, model: Autoencoder | None = None) -> list[RDPoint]:
    specs = [parse_codec_spec(c) for c in cfg.codecs]
    grids = {s.label: list(cfg.qualities.get(s.label) or cfg.qualities.get(s.lossy) or default_grid(s)) for s in specs}
    images = list_images(cfg.corpus)
    if not images:
        raise FileNotFoundError(f"no images in {cfg.corpus}")
    hybrid = HybridCodec(model) if model is not None else None
    with ThreadPoolExecutor(max_workers=max(1, cfg.workers)) as pool:
        per_image = list(pool.map(lambda p: _bench_image(p, specs, grids, hybrid), images))
    rows = [r for chunk in per_image for r in chunk]
    rows += averages(rows, specs, grids)
    if cfg.output is not None:
        write_csv(rows, cfg.output)
    if cfg.dat_output is not None:
        write_dat(rows, cfg.dat_output)
    return rows


def write_csv(rows: list[RDPoint], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        for r in rows:
            writer.writerow(r.row())


def read_csv(path) -> list[RDPoint]:
    """Load rows written by :func:`write_csv` (or an external RD table with the same columns)."""
    with open(path, newline="") as fh:
        return [
            RDPoint(
                r["image"],
                r["codec"],
                int(r["quality"]),
                float(r["bpp"]),
                float(r["psnr_db"]),
                float(r["ms_ssim"]),
                r.get("status") or "ok",
            )
            for r in csv.DictReader(fh)
        ]


def write_dat(rows: list[RDPoint], path, overlays: list[RDPoint] = ()) -> None:
    """gnuplot-ready blocks of average points, one indexed block per codec, sorted by bpp."""
    avg = [r for r in list(rows) + list(overlays) if r.image == AVERAGE and r.status == "ok"]
    labels = list(dict.fromkeys(r.codec for r in avg))
    with open(path, "w") as fh:
        for label in labels:
            fh.write(f"# {label}\n# bpp psnr_db ms_ssim quality\n")
            for r in sorted((r for r in avg if r.codec == label), key=lambda r: r.bpp):
                fh.write(f"{r.bpp:.6f} {r.psnr_db:.4f} {r.ms_ssim:.6f} {r.quality}\n")
            fh.write("\n\n")


# ablation --------------------------------------------------------------------

ABLATION_SCALES = (8, 16, 32)
ABLATION_COLUMNS = ("config", "compact_scale", "activation", "quality", "bpp", "psnr_db", "ms_ssim", "coarse_psnr_db", "status")


def ablation_model_path(models_dir, scale: int, activation: str) -> Path:
    return Path(models_dir) / f"s{scale}_{activation}.lhicm"


def run_ablation(
    models_dir,
    corpus,
    qualities=(4,),
    scaling: str = "clip",
    lossy_codec: str = "builtin-dct",
    output=None,
) -> list[dict]:
    """Average RD point per (compact scale, activation, quality) over the corpus.

    Models are looked up as ``s<scale>_<activation>.lhicm``; a missing model
    yields a row with status ``missing model`` instead of aborting.
    """
    images = [(p.name, read_image(p)) for p in list_images(corpus)]
    rows = []
    for s in ABLATION_SCALES:
        for act in ACTIVATIONS:
            label = f"S{s}+{'PReLU' if act == 'prelu' else 'ReLU'}"
            path = ablation_model_path(models_dir, s, act)
            if not path.exists():
                for q in qualities:
                    rows.append(_ablation_row(label, s, act, q, [], [], "missing model"))
                continue
            hybrid = HybridCodec(load_model(path))
            for q in qualities:
                reports, coarse = [], []
                for _, img in images:
                    _, _, rep = hybrid.evaluate(img, EncodeOptions(scaling=scaling, quality=q, lossy_codec=lossy_codec))
                    reports.append(rep)
                    coarse.append(_coarse_psnr(hybrid, img))
                rows.append(_ablation_row(label, s, act, q, reports, coarse, "ok"))
    if output is not None:
        with open(output, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=ABLATION_COLUMNS)
            writer.writeheader()
            writer.writerows(rows)
    return rows


def _coarse_psnr(hybrid: HybridCodec, img: np.ndarray) -> float:
    h, w = img.shape[:2]
    _, coarse = hybrid.coarse(pad_to_multiple(img, hybrid.scale))
    return psnr(img, coarse[:h, :w])


def _ablation_row(label, s, act, q, reports, coarse, status) -> dict:
    return {
        "config": label,
        "compact_scale": s,
        "activation": act,
        "quality": q,
        "bpp": _mean([r.bpp for r in reports]),
        "psnr_db": _mean([r.psnr_db for r in reports]),
        "ms_ssim": _mean([r.ms_ssim for r in reports]),
        "coarse_psnr_db": _mean(coarse),
        "status": status,
    }

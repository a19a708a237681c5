"""Evaluation metrics and the experiment harness.

Per-sample mean absolute (l1) and root-mean-square (l2) errors over the
generation region, context-coverage analysis with a 2-D coverage x error
histogram, and the model-level / junction-retention experiment matrix.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import torch

from . import storage
from .networks import (
    Generator,
    GeneratorSpec,
    input_stack,
    load_param_arrays,
)
from .sampling import Dataset, JunctionSet, Mask, PatchSample, retain_junctions

#: Default histogram bins: coverage 10%-wide, error 1%-wide.
COVERAGE_EDGES = np.round(np.arange(0.0, 1.01, 0.1), 10)
ERROR_EDGES = np.round(np.arange(0.0, 1.01, 0.01), 10)


class MetricError(ValueError):
    """A metric was requested on inputs where it is undefined."""


def _checked_inputs(generated, ground_truth, mask):
    gen = np.asarray(generated, dtype=np.float64)
    gt = np.asarray(ground_truth, dtype=np.float64)
    m = np.asarray(mask.grid if isinstance(mask, Mask) else mask, dtype=np.float64)
    if gen.shape != gt.shape or gen.shape != m.shape:
        raise ValueError(
            f"shape mismatch: generated {gen.shape}, ground truth {gt.shape}, "
            f"mask {m.shape}"
        )
    for name, arr in (("generated", gen), ("ground truth", gt)):
        if arr.min() < -1e-6 or arr.max() > 1 + 1e-6:
            raise ValueError(f"{name} raster values must lie in [0, 1]")
    count = m.sum()
    if count == 0:
        raise MetricError("mask has no generation-region pixels; error undefined")
    return gen, gt, m, count


def l1_error(generated, ground_truth, mask) -> float:
    """Mean absolute per-pixel difference over the generation region."""
    gen, gt, m, count = _checked_inputs(generated, ground_truth, mask)
    return float((np.abs(gen - gt) * m).sum() / count)


def l2_error(generated, ground_truth, mask) -> float:
    """Root-mean-square per-pixel difference over the generation region."""
    gen, gt, m, count = _checked_inputs(generated, ground_truth, mask)
    return float(np.sqrt((np.square(gen - gt) * m).sum() / count))


def context_coverage(mask) -> float:
    """Fraction of the patch outside the generation region."""
    m = np.asarray(mask.grid if isinstance(mask, Mask) else mask)
    return float((m == 0).sum() / m.size)


@dataclass(frozen=True)
class SampleResult:
    sample_id: int
    l1_error: float
    l2_error: float
    context_coverage: float
    model_level: int
    retention_policy: str

    def __post_init__(self):
        for name in ("l1_error", "l2_error", "context_coverage"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value}")


def _bin_index(value: float, edges: np.ndarray) -> int:
    """Half-open bins [e_i, e_{i+1}); the last bin includes its right edge."""
    idx = int(np.searchsorted(edges, value, side="right")) - 1
    return min(max(idx, 0), len(edges) - 2)


def coverage_histogram(
    results: Sequence[SampleResult],
    coverage_edges: np.ndarray = COVERAGE_EDGES,
    error_edges: np.ndarray = ERROR_EDGES,
) -> np.ndarray:
    """Counts per (coverage bin, l2-error bin)."""
    if len(results) == 0:
        raise ValueError("coverage histogram needs at least one result")
    counts = np.zeros((len(coverage_edges) - 1, len(error_edges) - 1), dtype=np.int64)
    for r in results:
        i = _bin_index(r.context_coverage, np.asarray(coverage_edges))
        j = _bin_index(r.l2_error, np.asarray(error_edges))
        counts[i, j] += 1
    return counts


@dataclass
class EvalReport:
    label: str
    model_level: int
    retention_policy: str
    results: list[SampleResult]
    mean_l1: float
    mean_l2: float
    histogram: np.ndarray
    coverage_edges: np.ndarray = field(default_factory=lambda: COVERAGE_EDGES.copy())
    error_edges: np.ndarray = field(default_factory=lambda: ERROR_EDGES.copy())
    checkpoint_hash: str | None = None

    @classmethod
    def from_results(
        cls,
        label: str,
        model_level: int,
        retention_policy: str,
        results: Sequence[SampleResult],
        checkpoint_hash: str | None = None,
    ) -> "EvalReport":
        results = list(results)
        if not results:
            raise ValueError("cannot build a report from zero results")
        return cls(
            label=label,
            model_level=model_level,
            retention_policy=retention_policy,
            results=results,
            mean_l1=float(np.mean([r.l1_error for r in results])),
            mean_l2=float(np.mean([r.l2_error for r in results])),
            histogram=coverage_histogram(results),
            checkpoint_hash=checkpoint_hash,
        )

    def validate(self) -> None:
        if abs(self.mean_l1 - np.mean([r.l1_error for r in self.results])) > 1e-12:
            raise ValueError("mean_l1 does not equal the mean of per-sample l1")
        if abs(self.mean_l2 - np.mean([r.l2_error for r in self.results])) > 1e-12:
            raise ValueError("mean_l2 does not equal the mean of per-sample l2")
        if int(self.histogram.sum()) != len(self.results):
            raise ValueError("histogram does not conserve the sample count")

    def to_json(self) -> dict:
        return {
            "label": self.label,
            "model_level": self.model_level,
            "retention_policy": self.retention_policy,
            "mean_l1": self.mean_l1,
            "mean_l2": self.mean_l2,
            "mean_l1_percent": 100 * self.mean_l1,
            "mean_l2_percent": 100 * self.mean_l2,
            "checkpoint_hash": self.checkpoint_hash,
            "count": len(self.results),
            "coverage_edges": self.coverage_edges.tolist(),
            "error_edges": self.error_edges.tolist(),
            "histogram": self.histogram.tolist(),
            "samples": [
                {
                    "sample_id": r.sample_id,
                    "l1_error": r.l1_error,
                    "l2_error": r.l2_error,
                    "context_coverage": r.context_coverage,
                }
                for r in self.results
            ],
        }

    def save(self, prefix) -> Path:
        """Write <prefix>.json, <prefix>_samples.csv, <prefix>_histogram.csv."""
        prefix = Path(prefix)
        prefix.parent.mkdir(parents=True, exist_ok=True)
        json_path = prefix.with_suffix(".json")
        json_path.write_text(json.dumps(self.to_json(), indent=1))
        with open(prefix.parent / f"{prefix.stem}_samples.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample_id", "l1_error", "l2_error", "context_coverage"])
            for r in self.results:
                writer.writerow([r.sample_id, r.l1_error, r.l2_error, r.context_coverage])
        np.savetxt(
            prefix.parent / f"{prefix.stem}_histogram.csv",
            self.histogram,
            fmt="%d",
            delimiter=",",
        )
        return json_path


def render_coverage_figure(report: EvalReport, png_path) -> Path:
    """Coverage-vs-l2 2-D histogram figure for a report."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 4))
    upper = max(
        0.2, float(np.ceil(max(r.l2_error for r in report.results) * 20) / 20)
    )
    err_cut = np.searchsorted(report.error_edges, upper)
    mesh = ax.pcolormesh(
        report.coverage_edges * 100,
        report.error_edges[: err_cut + 1] * 100,
        report.histogram[:, :err_cut].T,
        cmap="viridis",
    )
    ax.set_xlabel("context coverage (%)")
    ax.set_ylabel("l2 error (%)")
    ax.set_title(report.label)
    fig.colorbar(mesh, ax=ax, label="samples")
    fig.tight_layout()
    fig.savefig(png_path, dpi=120)
    plt.close(fig)
    return Path(png_path)


# ---------------------------------------------------------------------------
# Experiment harness
# ---------------------------------------------------------------------------


def result_for_output(
    sample_id: int,
    sample: PatchSample,
    generated: np.ndarray,
    model_level: int,
    retention_policy: str,
    binarize: bool = False,
) -> SampleResult:
    """Score one generated raster against a sample's ground truth."""
    gen = np.asarray(generated, dtype=np.float64)
    gt = np.asarray(sample.ground_truth_streets, dtype=np.float64)
    if binarize:
        gen = (gen >= 0.5).astype(np.float64)
        gt = (gt > 0).astype(np.float64)
    return SampleResult(
        sample_id=sample_id,
        l1_error=l1_error(gen, gt, sample.mask),
        l2_error=l2_error(gen, gt, sample.mask),
        context_coverage=context_coverage(sample.mask),
        model_level=model_level,
        retention_policy=retention_policy,
    )


def _retention_for(policy: str, rng: np.random.Generator) -> float:
    if policy == "random":
        return float(rng.uniform(0.1, 0.9))
    try:
        return float(policy) / 100.0 if float(policy) > 1 else float(policy)
    except ValueError as exc:
        raise ValueError(
            f"retention policy must be 'random' or a percentage, got {policy!r}"
        ) from exc


def run_experiment(
    checkpoint_path,
    dataset: Dataset | Sequence[PatchSample],
    retention_policy: str = "random",
    rng_seed: int = 0,
    batch_size: int = 16,
    binarize: bool = False,
    label: str | None = None,
) -> EvalReport:
    """Evaluate a generator checkpoint over a test dataset.

    For model levels >= 2 the junction channel is re-rendered per sample
    from the record's stored junction nodes under ``retention_policy``
    ('random' for 10-90% per sample, or a fixed percentage such as '30').
    """
    params, specs, meta = storage.load_checkpoint(checkpoint_path)
    model_level = meta["model_level"]
    gen_spec = GeneratorSpec.from_json(specs["generator"])
    ds_level = getattr(dataset, "model_level", 3)
    if ds_level < model_level:
        raise ValueError(
            f"checkpoint model level {model_level} exceeds dataset level "
            f"{ds_level}: the dataset lacks the guidance channels"
        )
    generator = load_param_arrays(Generator(gen_spec), params["generator"]).eval()

    rng = np.random.default_rng(rng_seed)
    results: list[SampleResult] = []
    pending: list[tuple[int, PatchSample, np.ndarray]] = []

    def flush():
        if not pending:
            return
        batch = torch.from_numpy(np.stack([stack for _, _, stack in pending]))
        with torch.no_grad():
            out = generator(batch).numpy()[:, 0]
        for (sample_id, sample, _), gen in zip(pending, out):
            results.append(
                result_for_output(
                    sample_id, sample, gen, model_level, retention_policy, binarize
                )
            )
        pending.clear()

    for i, sample in enumerate(dataset):
        junction_override = None
        if model_level >= 2:
            fraction = _retention_for(retention_policy, rng)
            junction_override = retain_junctions(
                JunctionSet(sample.junction_points),
                sample.mask,
                fraction,
                rng_seed=int(np.random.SeedSequence([rng_seed, i]).generate_state(1)[0]),
            )
        stack = input_stack(
            sample, model_level=model_level, junction_channel=junction_override
        )
        pending.append((i, sample, stack))
        if len(pending) >= batch_size:
            flush()
    flush()

    report = EvalReport.from_results(
        label=label or f"level{model_level}-{retention_policy}",
        model_level=model_level,
        retention_policy=retention_policy,
        results=results,
        checkpoint_hash=storage.file_sha256(checkpoint_path),
    )
    report.validate()
    return report

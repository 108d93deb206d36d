"""Experiment runner: scenario batches, scoring, STO length sweeps and reports.

Pipeline per recording:
  generate_scenario → SRO estimator → score against ground truth
  → (optional) compensate x2 → STO observations → RANSAC → score

Batch outputs in the output directory:
  manifest.json, timeline.log, experiment.log, report.json, recordings.csv,
  sigma_bands.csv, sto_sweep.csv, summary.md, traces/*.csv, plots/*.svg
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor, as_completed
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .async_model import compensate_sro
from .errors import ConfigError, NoConsensusError, SyncError
from .estimators import EstimateTrace, get_estimator
from .metrics import (
    CSV_COLUMNS,
    MetricsReport,
    RecordingMetrics,
    aggregate_scenario,
    band_spread,
    recording_rows,
    score_trace,
    sigma_band_report,
    sto_error_summary,
    truth_sro_per_segment,
)
from .scene import GroundTruth, generate_scenario
from .schema_validator import SchemaValidator
from .sro_model import trajectory_std
from .sto import ShiftObservation, StoParams, estimate_sto, oracle_distance_provider, ransac_sto
from .utils.atomic_write import atomic_write, atomic_write_csv
from .utils.config_parser import ExperimentConfig, load_config, merge_overrides, parse_experiment, resolve_output_dir
from .utils.config_validator import validate_config, write_validation_errors
from .utils.logger import close_file_handlers, setup_logger


logger = logging.getLogger(__name__)


@dataclass
class RecordingResult:
    """Everything one recording contributes to the batch report."""
    metrics: RecordingMetrics
    trace: Optional[EstimateTrace] = None
    reference_sro: Optional[np.ndarray] = None
    observations: List[ShiftObservation] = field(default_factory=list)


class ExperimentRunner:
    """
    Desk-scale reproduction of the evaluation protocol.

    Scenario evaluations are independent and run on a thread pool; the
    aggregation and all file output happen on the calling thread.
    """

    def __init__(
        self,
        config: ExperimentConfig,
        output_dir: Optional[Union[str, Path]] = None,
        estimator: str = 'dwacd',
    ):
        """
        Args:
            config: Parsed and validated experiment config
            output_dir: Overrides config.output_dir and $WASN_SYNC_OUTPUT_DIR
            estimator: Registered SRO estimator name
        """
        self.config = config
        self.estimator_name = estimator
        get_estimator(estimator, config.dwacd, config.sad)
        self.output_dir = resolve_output_dir(output_dir, config.output_dir)
        self.output_dir.mkdir(parents=True, exist_ok=True)

        self.logger = setup_logger(
            'synchronizer',
            log_file=self.output_dir / 'experiment.log',
            level=config.log_level,
        )
        self.manifest_file = self.output_dir / 'manifest.json'
        self.timeline_file = self.output_dir / 'timeline.log'
        self.manifest: Dict[str, Any] = {
            'experiment': config.name,
            'estimator': estimator,
            'created_at': datetime.now().isoformat(),
            'config': config.to_dict(),
        }

    @classmethod
    def from_file(
        cls,
        config_path: Union[str, Path],
        config_overrides: Optional[Dict[str, Any]] = None,
        output_dir: Optional[Union[str, Path]] = None,
        strict_mode: Optional[bool] = None,
    ) -> 'ExperimentRunner':
        """
        Load, merge overrides, validate (schema, then semantics) and build a runner.

        Raises:
            ConfigError: Unreadable or invalid config; a validation report is
                written to the output directory first
        """
        doc = merge_overrides(load_config(config_path), config_overrides)
        section = doc.get('experiment') if isinstance(doc.get('experiment'), dict) else {}
        strict = bool(section.get('strict_mode', False)) if strict_mode is None else strict_mode
        report_dir = resolve_output_dir(output_dir, section.get('output_dir'))

        schema = SchemaValidator(mode='warn').validate(doc, 'experiment')
        result = validate_config(doc, 'experiment', strict_mode=strict)
        result.errors = list(schema.errors) + result.errors
        result.valid = result.valid and schema.valid
        if not result.valid:
            write_validation_errors(result, report_dir)
            raise ConfigError(f"Invalid experiment config {config_path}", result.errors)
        for warning in result.warnings:
            logger.warning(f"{config_path}: {warning}")

        return cls(parse_experiment(doc), output_dir=output_dir)

    # ── bookkeeping ──────────────────────────────────────

    def _update_manifest(self, stage: str) -> None:
        """manifest.json을 업데이트한다."""
        self.manifest['stage'] = stage
        self.manifest['updated_at'] = datetime.now().isoformat()
        atomic_write(self.manifest_file, self.manifest)

    def _log_timeline(self, level: str, message: str) -> None:
        """timeline.log에 이벤트를 기록한다."""
        timestamp = datetime.now().isoformat()
        with open(self.timeline_file, 'a', encoding='utf-8') as f:
            f.write(f"[{timestamp}] [{level}] {message}\n")

    # ── single recording ─────────────────────────────────

    def evaluate_recording(self, scenario: str, seed: int) -> RecordingResult:
        """
        Simulate one scene, estimate, and score it.

        Raises:
            SyncError: Any failure of simulation or SRO estimation
        """
        cfg = self.config
        started = time.monotonic()
        spec = cfg.scene.build(scenario, seed)
        pair, truth = generate_scenario(spec)

        estimator = get_estimator(self.estimator_name, cfg.dwacd, cfg.sad)
        trace = estimator.run(pair.x1, pair.x2)
        score = score_trace(trace, truth, cfg.dwacd.temporal_distance)

        metrics = RecordingMetrics(
            scenario=scenario,
            seed=seed,
            rmse_sro=score.rmse_sro,
            rmse_delay=score.rmse_delay,
            valid_segments=score.valid_segments,
            sigma_sro=trajectory_std(truth.sro_diff_trajectory),
            sto_true=float(truth.sto_12),
        )
        if score.valid_segments == 0:
            metrics.status = 'failed'
            metrics.error = 'estimator never settled'

        observations: List[ShiftObservation] = []
        if cfg.run_sto and score.valid_segments > 0:
            observations = self._run_sto(pair.x1, pair.x2, trace, truth, spec.resampler_frame_size,
                                         spec.resampler_frame_shift, seed, metrics)

        metrics.duration = round(time.monotonic() - started, 3)
        return RecordingResult(
            metrics=metrics,
            trace=trace,
            reference_sro=truth_sro_per_segment(trace, truth, cfg.dwacd.temporal_distance),
            observations=observations,
        )

    def _run_sto(
        self,
        x1: np.ndarray,
        x2: np.ndarray,
        trace: EstimateTrace,
        truth: GroundTruth,
        frame_size: int,
        frame_shift: int,
        seed: int,
        metrics: RecordingMetrics,
    ) -> List[ShiftObservation]:
        cfg = self.config
        try:
            compensated = compensate_sro(
                x2, trace.segment_centers, trace.sro, trace.sample_rate, frame_size, frame_shift
            )
            provider = oracle_distance_provider(truth, cfg.distance_noise_std, seed)
            mask = cfg.sad.detect(x1)
            estimate, observations = estimate_sto(
                x1, compensated, provider, mask, cfg.sto, coarse_offset=trace.coarse_offset
            )
        except NoConsensusError as e:
            logger.warning(f"seed {seed}: {e}")
            estimate, observations = e.best_estimate, e.observations
        except SyncError as e:
            logger.warning(f"seed {seed}: STO stage failed: {e}")
            metrics.error = f"sto: {e}"
            return []

        if estimate is not None:
            metrics.sto_estimate = estimate.sto
            metrics.sto_error = estimate.sto - truth.sto_12
            metrics.sto_inliers = estimate.inlier_count
        return observations

    # ── batch ────────────────────────────────────────────

    def _jobs(self) -> List[Tuple[str, int]]:
        return [(scenario, seed) for scenario in self.config.scenarios for seed in self.config.seeds()]

    def run_batch(self) -> Tuple[MetricsReport, List[RecordingResult]]:
        """
        Evaluate every (scenario, seed) pair; failures are recorded per seed
        and the batch continues.
        """
        jobs = self._jobs()
        results: List[Optional[RecordingResult]] = [None] * len(jobs)
        self._log_timeline('INFO', f"Batch started: {len(jobs)} recordings, {self.config.workers} worker(s)")
        self._update_manifest('running')

        with ThreadPoolExecutor(max_workers=self.config.workers) as executor:
            future_to_idx = {
                executor.submit(self.evaluate_recording, scenario, seed): i
                for i, (scenario, seed) in enumerate(jobs)
            }
            for future in as_completed(future_to_idx):
                idx = future_to_idx[future]
                scenario, seed = jobs[idx]
                try:
                    results[idx] = future.result()
                except Exception as e:
                    self.logger.error(f"{scenario}/seed={seed} failed: {e}")
                    self._log_timeline('ERROR', f"{scenario}/seed={seed}: {e}")
                    results[idx] = RecordingResult(
                        metrics=RecordingMetrics(scenario=scenario, seed=seed, status='failed', error=str(e))
                    )
                    continue
                m = results[idx].metrics
                if m.succeeded:
                    self._log_timeline(
                        'INFO', f"{scenario}/seed={seed}: RMSE {m.rmse_sro:.3f} ppm, delay {m.rmse_delay:.3f} samples"
                    )
                else:
                    self._log_timeline('WARN', f"{scenario}/seed={seed}: {m.error}")

        report = self._aggregate(results)
        return report, results

    def _aggregate(self, results: Sequence[RecordingResult]) -> MetricsReport:
        report = MetricsReport()
        metrics = [r.metrics for r in results]
        for scenario in self.config.scenarios:
            members = [m for m in metrics if m.scenario == scenario]
            report.scenarios[scenario] = aggregate_scenario(scenario, members)
        report.sigma_bands, report.sigma_notes = sigma_band_report(metrics)
        report.failures = [
            {'scenario': m.scenario, 'seed': m.seed, 'error': m.error}
            for m in metrics if not m.succeeded
        ]
        return report

    def sto_length_sweep(
        self,
        results: Sequence[RecordingResult],
        lengths: Sequence[float],
    ) -> Tuple[Dict[str, Dict[str, Any]], Dict[float, List[float]]]:
        """
        STO error distribution per signal length.

        A length L keeps the observations of segments ending within the first
        L seconds and reruns RANSAC on them.

        Returns:
            (summary per length label, raw errors per length)
        """
        params: StoParams = self.config.sto
        errors: Dict[float, List[float]] = {float(length): [] for length in lengths}
        for result in results:
            m = result.metrics
            if not result.observations or m.sto_true is None:
                continue
            for length in errors:
                limit = length * params.sample_rate
                kept = [
                    o for o in result.observations
                    if o.segment_index * params.segment_shift + params.segment_len <= limit
                ]
                try:
                    estimate = ransac_sto(kept, params=params)
                except NoConsensusError as e:
                    estimate = e.best_estimate
                except SyncError as e:
                    logger.debug(f"{m.scenario}/seed={m.seed} at {length:g} s: {e}")
                    continue
                errors[length].append(estimate.sto - m.sto_true)

        summary = {f"{length:g}": sto_error_summary(values) for length, values in errors.items()}
        return summary, errors

    # ── reports ──────────────────────────────────────────

    def _write_reports(
        self,
        report: MetricsReport,
        results: Sequence[RecordingResult],
        sweep_errors: Dict[float, List[float]],
    ) -> None:
        out = self.output_dir
        ordered = sorted(results, key=lambda r: (r.metrics.scenario, r.metrics.seed))
        atomic_write(out / 'report.json', report.to_dict())
        atomic_write_csv(out / 'recordings.csv', CSV_COLUMNS, recording_rows([r.metrics for r in ordered]))
        atomic_write_csv(
            out / 'sigma_bands.csv',
            ('band', 'count', 'avg_rmse_sro'),
            ((b.label, b.count, b.avg_rmse_sro) for b in report.sigma_bands),
        )
        if report.sto_sweep:
            atomic_write_csv(
                out / 'sto_sweep.csv',
                ('length_s', 'count', 'median', 'q25', 'q75', 'max', 'outliers'),
                (
                    (label, s.get('count', 0), s.get('median', ''), s.get('q25', ''),
                     s.get('q75', ''), s.get('max', ''), s.get('outliers', ''))
                    for label, s in report.sto_sweep.items()
                ),
            )

        plots_enabled = self.config.plots
        if plots_enabled:
            from .utils import plotting

        for result in ordered:
            if result.trace is None:
                continue
            m = result.metrics
            stem = f"{m.scenario}_seed{m.seed}"
            if self.config.write_traces:
                result.trace.to_csv(out / 'traces' / f"{stem}.csv")
            if plots_enabled:
                plotting.plot_sro_trace(
                    out / 'plots' / f"{stem}.svg",
                    np.array([p.time for p in result.trace.points]),
                    result.trace.sro,
                    result.trace.valid,
                    result.reference_sro,
                    title=stem,
                )
        if plots_enabled and sweep_errors:
            plotting.plot_sto_sweep(out / 'plots' / 'sto_sweep.svg', sweep_errors)

        atomic_write(out / 'summary.md', self._summary_markdown(report))

    def _summary_markdown(self, report: MetricsReport) -> str:
        def fmt(value: Optional[float]) -> str:
            return '-' if value is None else f"{value:.3f}"

        lines = [
            f"# {self.config.name}",
            "",
            f"Estimator: `{self.estimator_name}`, {self.config.batch_size} recording(s) per scenario.",
            "",
            "| scenario | recordings | failures | avg RMSE ε (ppm) | avg RMSE τ (samples) | max RMSE τ (samples) |",
            "|---|---|---|---|---|---|",
        ]
        for name, s in report.scenarios.items():
            lines.append(
                f"| {name} | {s.recordings} | {s.failures} | {fmt(s.avg_rmse_sro)} | "
                f"{fmt(s.avg_rmse_delay)} | {fmt(s.max_rmse_delay)} |"
            )
        lines += ["", "## SRO std bands", ""]
        if report.sigma_bands:
            lines += ["| band (ppm) | count | avg RMSE ε (ppm) |", "|---|---|---|"]
            lines += [f"| {b.label} | {b.count} | {fmt(b.avg_rmse_sro)} |" for b in report.sigma_bands]
            lines.append(f"\nSpread: {fmt(band_spread(report.sigma_bands))} ppm")
        lines += [f"- {note}" for note in report.sigma_notes]
        if report.sto_sweep:
            lines += ["", "## STO error vs. signal length", "",
                      "| length (s) | count | median | max | >10 samples |", "|---|---|---|---|---|"]
            for label, s in report.sto_sweep.items():
                lines.append(
                    f"| {label} | {s.get('count', 0)} | {fmt(s.get('median'))} | "
                    f"{fmt(s.get('max'))} | {s.get('outliers', '-')} |"
                )
        if report.failures:
            lines += ["", "## Failures", ""]
            lines += [f"- {f['scenario']}/seed={f['seed']}: {f['error']}" for f in report.failures]
        return '\n'.join(lines) + '\n'

    def run(self) -> MetricsReport:
        """Batch, optional STO sweep, reports."""
        try:
            report, results = self.run_batch()
            sweep_errors: Dict[float, List[float]] = {}
            if self.config.run_sto and self.config.sto_lengths:
                self._update_manifest('sto_sweep')
                report.sto_sweep, sweep_errors = self.sto_length_sweep(results, self.config.sto_lengths)

            self._update_manifest('reporting')
            self._write_reports(report, results, sweep_errors)
            self._update_manifest('completed_with_failures' if report.has_failures else 'completed')
            self._log_timeline(
                'WARN' if report.has_failures else 'INFO',
                f"Batch finished: {len(report.failures)} failure(s)",
            )
            self.logger.info(f"Reports written to {self.output_dir}")
            return report
        finally:
            close_file_handlers(self.logger)

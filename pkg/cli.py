#!/usr/bin/env python3
"""Command-line interface for wasn-sync.

두 노드 비동기 녹음의 시뮬레이션, SRO/STO 추정, 보상, 배치 평가.

사용법:
    wasn-sync simulate -c scenario.yaml -o out/scene
    wasn-sync simulate --trajectory-only -o out/trajectories
    wasn-sync estimate-sro node1.wav node2.wav -o out/trace.csv
    wasn-sync compensate node2.wav out/trace.csv -o out/node2_comp.wav
    wasn-sync estimate-sto node1.wav out/node2_comp.wav --scene out/scene
    wasn-sync evaluate -c experiment.yaml

Exit codes: 0 성공, 1 추정 실패, 2 잘못된 설정
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path
from typing import Any, Dict, Optional

# 라이브러리 로그 억제
logging.basicConfig(level=logging.WARNING)

from synchronizer.errors import ConfigError, NoConsensusError, SyncError  # noqa: E402
from synchronizer.utils.atomic_write import atomic_write  # noqa: E402
from synchronizer.utils.logger import setup_logger, verbosity_level  # noqa: E402

# ─── ANSI ────────────────────────────────────────────────────────────────────

RST   = '\033[0m'
BOLD  = '\033[1m'
DIM   = '\033[2m'
RED   = '\033[91m'
GRN   = '\033[92m'
YLW   = '\033[93m'
CYN   = '\033[96m'

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2

logger = logging.getLogger('synchronizer.cli')


# ─── 설정 로딩 ───────────────────────────────────────────────────────────────

def _load_document(path: Optional[Path], kind: str, strict: bool = False) -> Dict[str, Any]:
    """YAML을 읽고 스키마 + 의미 검증까지 마친 문서를 반환한다.

    path가 None이면 빈 문서(모든 기본값).
    """
    from synchronizer.schema_validator import SchemaValidator, document_kind
    from synchronizer.utils.config_parser import load_config
    from synchronizer.utils.config_validator import raise_for_result, validate_config

    if path is None:
        return {}
    doc = load_config(path)
    if kind == 'params':
        # 추정 파라미터는 시나리오/실험 파일에서도 읽을 수 있다
        kind = document_kind(doc)
    schema = SchemaValidator(mode='strict' if strict else 'warn').validate(doc, kind)
    if not schema.valid:
        raise ConfigError(f"Config {path} does not match the {kind} schema", schema.errors)
    raise_for_result(validate_config(doc, kind, strict_mode=strict), str(path))
    return doc


def _estimator_params(path: Optional[Path], strict: bool = False):
    from synchronizer.utils.config_parser import parse_estimator_params

    doc = _load_document(path, 'params', strict)
    return parse_estimator_params(doc)


def _trace_sidecar(trace_csv: Path) -> Path:
    return trace_csv.with_suffix('.json')


def _load_trace(trace_csv: Path, dwacd):
    """트레이스 CSV와 (있으면) 옆의 JSON 메타데이터로 EstimateTrace를 복원한다."""
    import json

    from synchronizer.errors import IngestionError
    from synchronizer.estimators import EstimateTrace
    from synchronizer.utils.atomic_write import read_csv

    if not trace_csv.exists():
        raise IngestionError(f"Trace file not found: {trace_csv}")
    meta: Dict[str, Any] = {}
    sidecar = _trace_sidecar(trace_csv)
    if sidecar.exists():
        meta = json.loads(sidecar.read_text(encoding='utf-8'))
    rows = read_csv(trace_csv)
    if not rows:
        raise IngestionError(f"Empty trace: {trace_csv}")
    return EstimateTrace.from_rows(
        rows,
        segment_shift=int(meta.get('segment_shift', dwacd.segment_shift)),
        segment_len=int(meta.get('segment_len', dwacd.segment_len)),
        sample_rate=int(meta.get('sample_rate', dwacd.sample_rate)),
        coarse_offset=int(meta.get('coarse_offset', 0)),
    )


# ─── 서브커맨드 ──────────────────────────────────────────────────────────────

def cmd_simulate(args) -> int:
    from synchronizer.scene import export_scenario, generate_scenario
    from synchronizer.utils.config_parser import parse_scenario, resolve_output_dir

    output_dir = resolve_output_dir(args.output)
    if args.trajectory_only:
        return _simulate_trajectories(args, output_dir)

    if args.config is None:
        print(f'{RED}simulate: -c/--config 필요 (또는 --trajectory-only){RST}', file=sys.stderr)
        return EXIT_CONFIG
    doc = _load_document(args.config, 'scenario', args.strict)
    if args.seed is not None:
        doc['scenario']['seed'] = args.seed
    spec = parse_scenario(doc)

    print(f'{CYN}시뮬레이션:{RST} {spec.name}  seed={spec.seed}  {spec.duration:g} s')
    pair, truth = generate_scenario(spec)
    written = export_scenario(pair, truth, output_dir, subtype=args.subtype)
    print(f'{GRN}완료{RST}  {DIM}{len(written)} files → {output_dir}{RST}')
    print(f'  STO {truth.sto_12} samples, ε_12 mean {truth.sro_diff_trajectory.values.mean():+.3f} ppm')
    return EXIT_OK


def _simulate_trajectories(args, output_dir: Path) -> int:
    """과도(transient) / 정상(steady-state) OU 궤적 예시를 CSV(+SVG)로 기록한다."""
    import numpy as np

    from synchronizer.sro_model import OuParams, default_theta, simulate_trajectory

    seed = 0 if args.seed is None else args.seed
    steps = int(round(args.duration * 16000 / 1024))
    examples = {
        'transient': OuParams(theta=default_theta(0.05), mu_inf=20.0, sigma_ou=0.05, delta_start=10.0),
        'steady': OuParams(theta=default_theta(0.05), mu_inf=20.0, sigma_ou=0.05, delta_start=0.0),
    }
    for label, params in examples.items():
        traj = simulate_trajectory(params, steps, seed=seed)
        path = traj.to_csv(output_dir / f'trajectory_{label}.csv')
        print(f'{GRN}{label:<10}{RST} std {np.std(traj.values, ddof=1):.3f} ppm  {DIM}{path}{RST}')
        if args.plot:
            from synchronizer.utils.plotting import plot_trajectory

            time_s = np.arange(len(traj)) * traj.step_duration
            plot_trajectory(output_dir / f'trajectory_{label}.svg', time_s, traj.values, title=label)
    return EXIT_OK


def cmd_estimate_sro(args) -> int:
    from synchronizer.estimators import get_estimator
    from synchronizer.utils.audio_io import ingest_wav

    dwacd, sad, _ = _estimator_params(args.config, args.strict)
    x1 = ingest_wav(args.node1, dwacd.sample_rate, resample=args.resample)
    x2 = ingest_wav(args.node2, dwacd.sample_rate, resample=args.resample)

    estimator = get_estimator(args.estimator, dwacd, sad)
    trace = estimator.run(x1, x2)
    trace.to_csv(args.output)
    atomic_write(_trace_sidecar(args.output), {
        'estimator': trace.estimator,
        'segment_shift': trace.segment_shift,
        'segment_len': trace.segment_len,
        'sample_rate': trace.sample_rate,
        'coarse_offset': trace.coarse_offset,
        'metadata': trace.metadata,
    })

    final = trace.final_sro()
    if final is None:
        print(f'{YLW}유효한 추정 없음 (settling 미완료){RST}  {DIM}{args.output}{RST}')
        return EXIT_FAILURE
    print(
        f'{GRN}ε̂_12 = {final:+.3f} ppm{RST}  '
        f'{DIM}{int(trace.valid.sum())}/{len(trace)} segments, coarse offset {trace.coarse_offset}{RST}'
    )
    if args.plot:
        from synchronizer.utils.plotting import plot_sro_trace

        time_s = trace.segment_centers / trace.sample_rate
        plot_sro_trace(args.output.with_suffix('.svg'), time_s, trace.sro, trace.valid)
    return EXIT_OK


def cmd_compensate(args) -> int:
    from synchronizer.async_model import compensate_sro
    from synchronizer.utils.audio_io import ingest_wav, write_wav

    dwacd, _, _ = _estimator_params(args.config, args.strict)
    trace = _load_trace(args.trace, dwacd)
    x = ingest_wav(args.input, trace.sample_rate)
    y = compensate_sro(x, trace.segment_centers, trace.sro, trace.sample_rate, args.frame_size, args.frame_shift)
    write_wav(args.output, y, trace.sample_rate, subtype=args.subtype)
    print(f'{GRN}보상 완료{RST}  {DIM}{args.output}{RST}')
    return EXIT_OK


def _distance_provider(args):
    from synchronizer.sto import ConstantDistanceProvider, TableDistanceProvider

    if args.scene is not None:
        return TableDistanceProvider.from_scene_dir(args.scene, args.distance_noise, args.seed or 0)
    if args.distances is not None:
        return ConstantDistanceProvider(*args.distances)
    raise ConfigError("estimate-sto needs --scene or --distances D1 D2")


def cmd_estimate_sto(args) -> int:
    from synchronizer.sto import estimate_sto, observations_to_csv
    from synchronizer.utils.audio_io import ingest_wav

    dwacd, sad, sto = _estimator_params(args.config, args.strict)
    provider = _distance_provider(args)
    x1 = ingest_wav(args.node1, sto.sample_rate)
    x2 = ingest_wav(args.node2, sto.sample_rate)
    coarse_offset = args.coarse_offset
    if coarse_offset is None and args.trace is not None:
        coarse_offset = _load_trace(args.trace, dwacd).coarse_offset

    try:
        estimate, observations = estimate_sto(x1, x2, provider, sad.detect(x1), sto, coarse_offset or 0)
    except NoConsensusError as e:
        print(f'{RED}합의 실패:{RST} {e}', file=sys.stderr)
        if e.best_estimate is not None:
            print(f'  {DIM}best effort τ̂_STO = {e.best_estimate.sto:+.2f} samples{RST}')
        return EXIT_FAILURE

    if args.observations is not None:
        observations_to_csv(observations, args.observations)
    print(
        f'{GRN}τ̂_STO = {estimate.sto:+.2f} samples{RST}  '
        f'{DIM}{estimate.inlier_count}/{estimate.num_observations} inliers, '
        f'residual {estimate.residual_rms:.2f}{RST}'
    )
    if args.output is not None:
        atomic_write(args.output, estimate.to_dict())
    return EXIT_OK


def cmd_evaluate(args) -> int:
    from synchronizer.main import ExperimentRunner

    overrides: Dict[str, Any] = {}
    if args.batch_size is not None:
        overrides.setdefault('experiment', {})['batch_size'] = args.batch_size
    if args.workers is not None:
        overrides.setdefault('experiment', {})['workers'] = args.workers
    if args.no_sto:
        overrides.setdefault('experiment', {})['run_sto'] = False

    runner = ExperimentRunner.from_file(
        args.config,
        config_overrides=overrides or None,
        output_dir=args.output,
        strict_mode=True if args.strict else None,
    )
    print(f'{CYN}평가:{RST} {runner.config.name}  {DIM}→ {runner.output_dir}{RST}')
    report = runner.run()

    for name, s in sorted(report.scenarios.items()):
        rmse = '-' if s.avg_rmse_sro is None else f'{s.avg_rmse_sro:.3f} ppm'
        print(f'  {BOLD}{name:<12}{RST} RMSE ε̂ {rmse}  {DIM}{s.recordings - s.failures}/{s.recordings} ok{RST}')
    if report.has_failures:
        print(f'{YLW}{len(report.failures)} recording(s) failed{RST}  {DIM}{runner.output_dir / "summary.md"}{RST}')
        return EXIT_FAILURE
    print(f'{GRN}완료{RST}')
    return EXIT_OK


# ─── 파서 ────────────────────────────────────────────────────────────────────

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog='wasn-sync',
        description='SRO/STO estimation and compensation for two-node acoustic sensor networks',
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  wasn-sync simulate -c scenario.yaml -o out/scene
  wasn-sync estimate-sro out/scene/node1.wav out/scene/node2.wav -o out/trace.csv
  wasn-sync evaluate -c config.yaml
        """,
    )
    parser.add_argument('-v', '--verbose', action='count', default=0, help='-v INFO, -vv DEBUG')
    parser.add_argument('--strict', action='store_true', help='설정 경고를 오류로 처리')
    sub = parser.add_subparsers(dest='cmd')

    # simulate
    sp = sub.add_parser('simulate', help='시나리오 → WAV 쌍 + ground truth')
    sp.add_argument('-c', '--config', type=Path)
    sp.add_argument('-o', '--output', type=Path, help='출력 디렉토리 (기본: $WASN_SYNC_OUTPUT_DIR)')
    sp.add_argument('--seed', type=int)
    sp.add_argument('--subtype', choices=('float', 'pcm16'), default='float')
    sp.add_argument('--trajectory-only', action='store_true', help='OU 궤적 예시만 기록')
    sp.add_argument('--duration', type=float, default=300.0, help='--trajectory-only 길이 (s)')
    sp.add_argument('--plot', action='store_true')
    sp.set_defaults(func=cmd_simulate)

    # estimate-sro
    ep = sub.add_parser('estimate-sro', help='WAV 쌍 → SRO 트레이스 CSV')
    ep.add_argument('node1', type=Path)
    ep.add_argument('node2', type=Path)
    ep.add_argument('-o', '--output', type=Path, default=Path('trace.csv'))
    ep.add_argument('-c', '--config', type=Path, help='dwacd/sad 섹션을 가진 YAML')
    ep.add_argument('--estimator', default='dwacd')
    ep.add_argument('--resample', action='store_true', help='샘플레이트가 다르면 리샘플')
    ep.add_argument('--plot', action='store_true')
    ep.set_defaults(func=cmd_estimate_sro)

    # compensate
    cp = sub.add_parser('compensate', help='WAV + 트레이스 → 보상된 WAV')
    cp.add_argument('input', type=Path)
    cp.add_argument('trace', type=Path)
    cp.add_argument('-o', '--output', type=Path, required=True)
    cp.add_argument('-c', '--config', type=Path)
    cp.add_argument('--frame-size', type=int, default=4096)
    cp.add_argument('--frame-shift', type=int, default=1024)
    cp.add_argument('--subtype', choices=('float', 'pcm16'), default='float')
    cp.set_defaults(func=cmd_compensate)

    # estimate-sto
    tp = sub.add_parser('estimate-sto', help='보상된 WAV 쌍 + 거리 → STO')
    tp.add_argument('node1', type=Path)
    tp.add_argument('node2', type=Path, help='SRO 보상된 두 번째 노드')
    src = tp.add_mutually_exclusive_group(required=True)
    src.add_argument('--scene', type=Path, help='simulate 출력 디렉토리 (ground_truth.json + activity.csv)')
    src.add_argument('--distances', nargs=2, type=float, metavar=('D1', 'D2'), help='고정 음원 거리 (m)')
    tp.add_argument('--distance-noise', type=float, default=0.0, help='거리 잡음 표준편차 (m)')
    tp.add_argument('--seed', type=int)
    tp.add_argument('--trace', type=Path, help='coarse offset을 읽을 트레이스 CSV')
    tp.add_argument('--coarse-offset', type=int)
    tp.add_argument('-c', '--config', type=Path)
    tp.add_argument('-o', '--output', type=Path, help='STO 결과 JSON')
    tp.add_argument('--observations', type=Path, help='관측값 CSV')
    tp.set_defaults(func=cmd_estimate_sto)

    # evaluate
    vp = sub.add_parser('evaluate', help='실험 설정 → 리포트')
    vp.add_argument('-c', '--config', type=Path, default=Path('config.yaml'))
    vp.add_argument('-o', '--output', type=Path)
    vp.add_argument('--batch-size', type=int)
    vp.add_argument('--workers', type=int)
    vp.add_argument('--no-sto', action='store_true')
    vp.set_defaults(func=cmd_evaluate)

    return parser


# ─── 진입점 ──────────────────────────────────────────────────────────────────

def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.cmd is None:
        parser.print_help()
        return EXIT_CONFIG

    if args.verbose:
        setup_logger('synchronizer', level=verbosity_level(args.verbose))

    try:
        return args.func(args)
    except ConfigError as e:
        print(f'{RED}설정 오류:{RST} {e}', file=sys.stderr)
        for error in e.errors[:10]:
            print(f'  {DIM}- {error}{RST}', file=sys.stderr)
        return EXIT_CONFIG
    except SyncError as e:
        print(f'{RED}실패:{RST} {e}', file=sys.stderr)
        return EXIT_FAILURE


if __name__ == '__main__':
    sys.exit(main())

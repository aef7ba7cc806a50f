import argparse
from dataclasses import asdict, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from ..config import Config, resolve_config
from ..errors import ConfigError, ContractError, TrackerError, TrainingDivergedError
from ..features import build_dataset
from ..logger import logger, setup_logging
from ..nnet import FnnModel
from ..plant import LtiStateSpace
from ..plant.systems import benchmark_trajectory, two_tone_trajectory
from ..runner import ExperimentReport, baseline_steady_state_error, evaluate, run_baseline
from ..sysid import SysIdReport
from . import reporting
from .pipeline import (
    TrainedPipeline,
    build_system,
    evaluation_trajectory,
    feature_spec,
    identify,
    pendulum_recipe,
    prepare,
    run_evaluation,
    run_training,
    with_overrides,
)

STUDIES = ("sim", "diff_learning", "feature_dim")

# 与配置模板默认值一致的仿真配方，reproduce sim 时强制使用
SIM_RECIPE = {
    "trajectories": {
        "amplitudes": [1.0, 2.0, 3.0, 4.0, 5.0],
        "frequencies_hz": [0.024, 0.032, 0.048, 0.091, 1.0],
        "steps": 1000,
        "per_source": 200,
    },
    "evaluation": {"trajectory": "benchmark", "steps": 5000},
    "features": {"mode": "state_space", "difference": False},
}
DIFF_LEARNING_STEPS = 3000
FEATURE_DIM_STEPS = 200


def _spec_dict(spec) -> Dict[str, Any]:
    data = asdict(spec)
    data["input_width"] = spec.input_width
    data["feature_names"] = list(spec.feature_names)
    return data


def cmd_identify(config: Config) -> SysIdReport:
    sys, period = build_system(config.system)
    report = identify(sys, period)
    reporting.show(reporting.sysid_table(config.system.kind, report))
    if report.minimum_phase is False:
        reporting.console.print(
            "[bold red]non-minimum phase: the inverse dynamics are unstable, DNN enhancement is ineffective[/]"
        )
    reporting.save_json(
        reporting.artifact_path(config, "identify.json"),
        {"sysid": report.to_dict(), **reporting.provenance(config, {"experiment": config.experiment.seed})},
    )
    return report


def _save_training(config: Config, pipeline: TrainedPipeline) -> Dict[str, Any]:
    result = pipeline.result
    pipeline.model.save(reporting.artifact_path(config, "model.json"))
    reporting.save_loss_history(reporting.artifact_path(config, "loss.csv"), result.loss_history)
    summary = {
        "system": config.system.kind,
        "sysid": pipeline.sysid.to_dict(),
        "features": _spec_dict(pipeline.spec),
        "rows": len(pipeline.dataset),
        "iterations": len(result.loss_history) - 1,
        "final_loss": float(result.loss_history[-1]),
        "holdout_loss": result.holdout_loss,
        "stop_reason": result.stop_reason,
        "notes": pipeline.notes,
    }
    reporting.save_json(
        reporting.artifact_path(config, "train.json"),
        {"training": summary, **reporting.provenance(config, pipeline.seeds.to_dict())},
    )
    return summary


def cmd_train(config: Config) -> TrainedPipeline:
    """数据集在训练前落盘，训练发散时仍保留"""

    def keep_dataset(dataset) -> None:
        dataset.to_csv(reporting.artifact_path(config, "dataset.csv"))
        logger.info(f"已写出: {reporting.artifact_path(config, 'dataset.csv')}")

    pipeline = run_training(config, dataset_hook=keep_dataset)
    summary = _save_training(config, pipeline)
    reporting.show(
        reporting.key_value_table(
            f"train: {config.experiment.name}",
            ["quantity", "value"],
            [
                ["input width", pipeline.spec.input_width],
                ["rows", summary["rows"]],
                ["iterations", summary["iterations"]],
                ["final loss", f"{summary['final_loss']:.3e}"],
                ["stop reason", summary["stop_reason"]],
            ],
        )
    )
    return pipeline


def _save_evaluation(config: Config, evaluation, seeds: Dict[str, int], extra: Optional[Dict[str, Any]] = None) -> None:
    data = {"report": evaluation.report.to_dict(), **(extra or {}), **reporting.provenance(config, seeds)}
    reporting.save_json(reporting.artifact_path(config, "report.json"), data)
    reporting.save_plot_data(config, evaluation)


def cmd_evaluate(config: Config, model_path: Optional[str] = None) -> ExperimentReport:
    """发散是有效的实验结果，写进报告而不作为错误退出"""
    path = Path(model_path) if model_path else reporting.artifact_path(config, "model.json")
    if not path.exists():
        raise ConfigError(f"model file not found: {path}")
    net = FnnModel.load(path)
    sys, period, _, spec = prepare(config)
    evaluation = run_evaluation(config, sys, period, spec, net)
    _save_evaluation(config, evaluation, {"experiment": config.experiment.seed}, {"model": str(path)})
    reporting.show(reporting.experiment_table(f"evaluate: {config.experiment.name}", {"enhanced": evaluation.report}))
    return evaluation.report


def _train_and_evaluate(config: Config) -> tuple[TrainedPipeline, Any]:
    pipeline = run_training(config)
    _save_training(config, pipeline)
    evaluation = run_evaluation(config, pipeline.system, pipeline.period, pipeline.spec, pipeline.model)
    _save_evaluation(config, evaluation, pipeline.seeds.to_dict())
    return pipeline, evaluation


def study_sim(config: Config) -> Dict[str, Any]:
    """最小相位与非最小相位两个线性系统走同一条流程"""
    results: Dict[str, Any] = {}
    reports: Dict[str, ExperimentReport] = {}
    for kind in ("sim_stable", "sim_unstable"):
        cfg = with_overrides(
            config,
            system={"kind": kind},
            experiment={"name": f"{config.experiment.name}_{kind}"},
            **SIM_RECIPE,
        )
        pipeline, evaluation = _train_and_evaluate(cfg)
        reports[kind] = evaluation.report
        results[kind] = {
            "sysid": pipeline.sysid.to_dict(),
            "final_loss": float(pipeline.result.loss_history[-1]),
            "report": evaluation.report.to_dict(),
            "notes": pipeline.notes,
        }
    reporting.show(reporting.experiment_table("reproduce: sim", reports))
    return results


def study_diff_learning(config: Config) -> Dict[str, Any]:
    """差分学习只在单位直流增益下成立：对比 γ=1 与缩放参考增益的摆"""
    results: Dict[str, Any] = {}
    reports: Dict[str, ExperimentReport] = {}
    for kind in ("pendulum", "pendulum_scaled_gain"):
        cfg = pendulum_recipe(
            config,
            kind,
            "step",
            steps=DIFF_LEARNING_STEPS,
            mode="state_space",
            difference=True,
            difference_reference="desired_now",
        )
        cfg = with_overrides(
            cfg,
            experiment={"name": f"{config.experiment.name}_diff_{kind}"},
            evaluation={"step_amplitude": 1.0, "step_start": 100, "step_rise": 50, "tail_fraction": 0.2},
        )
        pipeline, evaluation = _train_and_evaluate(cfg)
        y_d = evaluation_trajectory(cfg.evaluation, pipeline.period)
        # 同一个网络，运行时改用实际输出作差分参考
        actual_spec = replace(pipeline.spec, difference_reference="actual_now", output_reference="actual_now")
        actual = evaluate(
            pipeline.system,
            pipeline.model,
            actual_spec,
            y_d,
            divergence_bound=cfg.evaluation.divergence_bound,
            steady_state_tail=cfg.evaluation.tail_fraction,
            tracking_loss_factor=cfg.evaluation.tracking_loss_factor,
        )
        reporting.save_plot_data(cfg, actual, tag="actual_now")
        reports[f"{kind} (desired_now)"] = evaluation.report
        reports[f"{kind} (actual_now)"] = actual.report
        results[kind] = {
            "dc_gain": pipeline.sysid.dc_gain,
            "difference_learning_eligible": pipeline.sysid.difference_learning_eligible,
            "baseline_offset": baseline_steady_state_error(pipeline.system, y_d, cfg.evaluation.tail_fraction),
            "offset_desired_now": evaluation.report.steady_state_error,
            "offset_actual_now": actual.report.steady_state_error,
            "report": evaluation.report.to_dict(),
        }
    reporting.show(reporting.experiment_table("reproduce: diff_learning", reports))
    return results


def study_feature_dim(config: Config) -> Dict[str, Any]:
    """两种特征选择在各内置系统上的输入维度：n+1 与 2n-r+1"""
    results: Dict[str, Any] = {}
    rows: List[List[Any]] = []
    for kind in ("sim_stable", "sim_unstable", "pendulum"):
        cfg = with_overrides(config, system={"kind": kind})
        sys, period = build_system(cfg.system)
        r = identify(sys, period).relative_degree
        if isinstance(sys, LtiStateSpace):
            y_d = benchmark_trajectory(FEATURE_DIM_STEPS, period)
        else:
            y_d = two_tone_trajectory(FEATURE_DIM_STEPS, period)
        log = run_baseline(sys, y_d)
        widths = {}
        for mode in ("state_space", "transfer_function"):
            features = with_overrides(cfg, features={"mode": mode, "difference": False, "preview_offsets": []})
            spec = feature_spec(features.features, r, sys.n)
            widths[mode] = build_dataset(log, spec).inputs.shape[1]
        results[kind] = {
            "n": sys.n,
            "r": r,
            "state_space": widths["state_space"],
            "transfer_function": widths["transfer_function"],
            "expected_state_space": sys.n + 1,
            "expected_transfer_function": 2 * sys.n - r + 1,
        }
        rows.append([kind, sys.n, r, widths["state_space"], widths["transfer_function"]])
    reporting.show(
        reporting.key_value_table("reproduce: feature_dim", ["system", "n", "r", "state space", "transfer fn"], rows)
    )
    return results


def cmd_reproduce(config: Config, study: str) -> Dict[str, Any]:
    if study not in STUDIES:
        raise ConfigError(f"unknown study {study!r}, choose from {STUDIES}")
    runner = {"sim": study_sim, "diff_learning": study_diff_learning, "feature_dim": study_feature_dim}[study]
    results = runner(config)
    reporting.save_json(
        reporting.artifact_path(config, f"reproduce_{study}.json"),
        {"study": study, "results": results, **reporting.provenance(config, {"experiment": config.experiment.seed})},
    )
    return results


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default="config.toml", metavar="FILE", help="experiment config (TOML)")
    common.add_argument("--seed", type=int, default=None, metavar="N", help="override [experiment].seed")
    common.add_argument("--out", default=None, metavar="DIR", help="override [experiment].output_dir")

    parser = argparse.ArgumentParser(prog="tracker", description="DNN-enhanced tracking experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("identify", parents=[common], help="relative degree, DC gain, zeros of the closed loop")
    sub.add_parser("train", parents=[common], help="generate training data and fit the inverse-dynamics network")
    evaluate_parser = sub.add_parser("evaluate", parents=[common], help="baseline vs enhanced on the test trajectory")
    evaluate_parser.add_argument("--model", default=None, metavar="FILE", help="model JSON (default: output dir)")
    reproduce_parser = sub.add_parser("reproduce", parents=[common], help="canned studies")
    reproduce_parser.add_argument("study", choices=STUDIES)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """退出码：0 完成（含预期内的发散），1 配置错误或其他可预期错误，2 训练失败"""
    args = build_parser().parse_args(argv)
    try:
        config = resolve_config(args.config, seed=args.seed, output_dir=args.out)
        setup_logging(config.debug)
        if args.command == "identify":
            cmd_identify(config)
        elif args.command == "train":
            cmd_train(config)
        elif args.command == "evaluate":
            cmd_evaluate(config, args.model)
        else:
            cmd_reproduce(config, args.study)
    except (ConfigError, ContractError) as e:
        logger.error(f"配置错误: {e}")
        return 1
    except TrainingDivergedError as e:
        logger.error(f"训练失败: {e}")
        return 2
    except TrackerError as e:
        logger.error(f"运行失败: {e}")
        return 1
    return 0

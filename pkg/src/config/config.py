import os
import shutil
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Optional

import tomlkit
from rich.traceback import install
from tomlkit import TOMLDocument
from tomlkit.exceptions import TOMLKitError
from tomlkit.items import Table

from ..errors import ConfigError
from ..logger import logger
from .config_base import ConfigBase
from .official_configs import (
    DebugConfig,
    EvaluationConfig,
    ExperimentConfig,
    FeaturesConfig,
    SystemConfig,
    TrainingConfig,
    TrajectoriesConfig,
)

install(extra_lines=3)

TEMPLATE_PATH = Path(__file__).resolve().parents[2] / "template" / "template_config.toml"
DEFAULT_CONFIG_PATH = "config.toml"
BACKUP_DIR = "config_backup"


def _merge(target: TOMLDocument | dict, source: TOMLDocument | dict) -> None:
    """把旧配置中仍存在于新模板的键值写回模板，版本号保留模板的"""
    for key, value in source.items():
        if key == "version":
            continue
        if key in target:
            if isinstance(value, dict) and isinstance(target[key], (dict, Table)):
                _merge(target[key], value)
            else:
                try:
                    target[key] = tomlkit.item(value)
                except (TypeError, ValueError):
                    target[key] = value


def _read_toml(path: Path) -> TOMLDocument:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return tomlkit.load(f)
    except TOMLKitError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e


def update_config(config_path: str | Path = DEFAULT_CONFIG_PATH, template_path: str | Path = TEMPLATE_PATH) -> bool:
    """首次运行从模板生成配置并抛出 ConfigError 让调用方退出；版本号不同则备份后合并

    返回是否发生了合并。
    """
    config_path = Path(config_path)
    template_path = Path(template_path)
    if not config_path.exists():
        config_path.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(template_path, config_path)
        logger.warning(f"配置文件不存在，已从模板创建: {config_path}")
        raise ConfigError(f"created {config_path} from the template; review it and run again")

    old_config = _read_toml(config_path)
    new_config = _read_toml(template_path)

    if "inner" in old_config and "inner" in new_config:
        old_version = old_config["inner"].get("version")
        new_version = new_config["inner"].get("version")
        if old_version and new_version and old_version == new_version:
            logger.debug(f"配置文件版本号相同 (v{old_version})，跳过更新")
            return False
        logger.info(f"检测到版本号不同: 旧版本 v{old_version} -> 新版本 v{new_version}")
    else:
        logger.info("已有配置文件未检测到版本号，可能是旧版本，将进行更新")

    backup_dir = config_path.parent / BACKUP_DIR
    os.makedirs(backup_dir, exist_ok=True)
    timestamp = datetime.now().strftime("%Y%m%d_%H%M%S")
    backup_path = backup_dir / f"{config_path.name}.bak.{timestamp}"
    shutil.copy2(config_path, backup_path)
    logger.info(f"已备份旧配置文件到: {backup_path}")

    _merge(new_config, old_config)
    config_path.write_text(tomlkit.dumps(new_config), encoding="utf-8")
    logger.info(f"配置文件已合并到新模板，建议检查: {config_path}")
    return True


@dataclass
class Config(ConfigBase):
    experiment: ExperimentConfig = field(default_factory=ExperimentConfig)
    system: SystemConfig = field(default_factory=SystemConfig)
    features: FeaturesConfig = field(default_factory=FeaturesConfig)
    training: TrainingConfig = field(default_factory=TrainingConfig)
    trajectories: TrajectoriesConfig = field(default_factory=TrajectoriesConfig)
    evaluation: EvaluationConfig = field(default_factory=EvaluationConfig)
    debug: DebugConfig = field(default_factory=DebugConfig)


def load_config(config_path: str | Path) -> Config:
    config_data = _read_toml(Path(config_path))
    return Config.from_dict(config_data)


def resolve_config(
    config_path: str | Path = DEFAULT_CONFIG_PATH,
    seed: Optional[int] = None,
    output_dir: Optional[str] = None,
) -> Config:
    """更新（必要时生成）配置、加载并应用命令行覆盖"""
    update_config(config_path)
    config = load_config(config_path)
    if seed is not None:
        config.experiment.seed = seed
    if output_dir is not None:
        config.experiment.output_dir = output_dir
    logger.debug(f"配置加载完成: {config_path}")
    return config

from dataclasses import MISSING, dataclass, fields
from typing import Any, Dict, Literal, Type, TypeVar, Union, get_args, get_origin

from ..errors import ConfigError

T = TypeVar("T", bound="ConfigBase")


@dataclass
class ConfigBase:
    """TOML 表到 dataclass 的转换；错误信息带上出错键的完整路径"""

    @classmethod
    def from_dict(cls: Type[T], data: Dict[str, Any], path: str = "") -> T:
        if not isinstance(data, dict):
            raise ConfigError(f"[{path or cls.__name__}] expected a table, got {type(data).__name__}")

        init_args: Dict[str, Any] = {}
        for f in fields(cls):
            name = f.name
            if name.startswith("_") or not f.init:
                continue
            key = f"{path}.{name}" if path else name
            if name not in data:
                if f.default is not MISSING or f.default_factory is not MISSING:
                    continue
                raise ConfigError(f"missing required key: {key}")
            init_args[name] = cls._convert_field(data[name], f.type, key)
        try:
            return cls(**init_args)  # type: ignore[arg-type]
        except (TypeError, ValueError) as e:
            raise ConfigError(f"[{path or cls.__name__}] {e}") from e

    @classmethod
    def _convert_field(cls, value: Any, field_type: Any, key: str) -> Any:
        # 嵌套的配置表
        if isinstance(field_type, type) and issubclass(field_type, ConfigBase):
            return field_type.from_dict(value, key)

        origin = get_origin(field_type)
        args = get_args(field_type)

        if origin in {list, tuple}:
            if not isinstance(value, list):
                raise ConfigError(f"{key}: expected an array, got {type(value).__name__}")
            if origin is list:
                return [cls._convert_field(v, args[0], f"{key}[{i}]") for i, v in enumerate(value)]
            if len(args) == 2 and args[1] is Ellipsis:
                return tuple(cls._convert_field(v, args[0], f"{key}[{i}]") for i, v in enumerate(value))
            if len(value) != len(args):
                raise ConfigError(f"{key}: expected {len(args)} entries, got {len(value)}")
            return tuple(cls._convert_field(v, t, f"{key}[{i}]") for i, (v, t) in enumerate(zip(value, args)))

        if origin is dict:
            if not isinstance(value, dict):
                raise ConfigError(f"{key}: expected a table, got {type(value).__name__}")
            kt, vt = args
            return {cls._convert_field(k, kt, key): cls._convert_field(v, vt, f"{key}.{k}") for k, v in value.items()}

        if origin is Union:
            if value is None:
                return None
            return cls._convert_field(value, args[0], key)

        if origin is Literal:
            allowed = get_args(field_type)
            if value in allowed:
                return allowed[allowed.index(value)]
            raise ConfigError(f"{key}: {value!r} not in {allowed}")

        # 实数一律按 64 位浮点解析，TOML 整数也接受
        if field_type is float and isinstance(value, int) and not isinstance(value, bool):
            return float(value)

        if isinstance(value, bool) and field_type is not bool:
            raise ConfigError(f"{key}: expected {field_type.__name__}, got bool")
        if field_type is Any:
            return value
        if isinstance(value, field_type):
            return field_type(value)
        raise ConfigError(f"{key}: expected {field_type.__name__}, got {type(value).__name__}")

    def to_dict(self) -> Dict[str, Any]:
        """转回纯 Python 值，用于嵌入报告"""
        out: Dict[str, Any] = {}
        for f in fields(self):
            if f.name.startswith("_"):
                continue
            out[f.name] = _plain(getattr(self, f.name))
        return out


def _plain(value: Any) -> Any:
    if isinstance(value, ConfigBase):
        return value.to_dict()
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, bool):
        return bool(value)
    if isinstance(value, int):
        return int(value)
    if isinstance(value, float):
        return float(value)
    if isinstance(value, str):
        return str(value)
    return value

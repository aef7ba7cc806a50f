from .commands import build_parser, cmd_evaluate, cmd_identify, cmd_reproduce, cmd_train, main

__all__ = ["build_parser", "cmd_evaluate", "cmd_identify", "cmd_reproduce", "cmd_train", "main"]

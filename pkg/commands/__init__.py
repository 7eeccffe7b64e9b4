# Commands module for bratteli-spectra
from commands.base import Command, CommandOutput, CommandRegistry, CommandResult
from commands.graph_commands import graph_commands
from commands.metric_commands import metric_commands
from commands.tiling_commands import tiling_commands

command_registry = CommandRegistry()
for _command in (*graph_commands(), *metric_commands(), *tiling_commands()):
    command_registry.register(_command)

__all__ = ["Command", "CommandOutput", "CommandRegistry", "CommandResult", "command_registry"]

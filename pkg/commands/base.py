"""
Base command classes and registry
"""

import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

from core.errors import BratteliSpectraError, ValidationError
from core.utils import digest_files, jsonable, rows_to_csv
from commands.report import Report

logger = logging.getLogger(__name__)


@dataclass
class CommandOutput:
    """What a command computed, before it is wrapped into a report"""

    results: Dict[str, Any]
    inputs: Sequence[str] = ()
    warnings: List[str] = field(default_factory=list)
    header: Optional[Sequence[str]] = None
    rows: Optional[List[Sequence[Any]]] = None
    failure: Optional[BratteliSpectraError] = None  # a check that ran but did not pass


@dataclass
class CommandResult:
    success: bool
    report: Optional[Report] = None
    csv: Optional[str] = None
    error: Optional[Dict[str, Any]] = None
    warnings: List[str] = field(default_factory=list)
    exit_code: int = 0


class Command(ABC):
    """Base class for all commands"""

    def __init__(self, name: str, description: str, required_params: List[str] = None,
                 optional_params: Dict[str, Any] = None):
        self.name = name
        self.description = description
        self.required_params = required_params or []
        self.optional_params = optional_params or {}
        self.params: Dict[str, Any] = {}

    def initialize(self, params: Dict[str, Any]) -> None:
        """Bind parameters, filling in defaults"""
        missing_params = [p for p in self.required_params if params.get(p) is None]
        if missing_params:
            raise ValidationError(f"Missing required parameters: {missing_params}")
        self.params = dict(self.optional_params)
        self.params.update({k: v for k, v in params.items() if v is not None})

    def param(self, name: str) -> Any:
        return self.params.get(name)

    @abstractmethod
    def run(self) -> CommandOutput:
        """Compute the command's results"""
        pass

    def execute(self) -> CommandResult:
        """Run the command; library errors come back as a failed result with their exit code"""
        try:
            output = self.run()
        except BratteliSpectraError as exc:
            logger.error("%s failed: %s", self.name, exc.message)
            return CommandResult(success=False, error=exc.to_dict(), exit_code=exc.exit_code)
        except ValueError as exc:
            logger.error("%s failed: %s", self.name, exc)
            error = ValidationError(str(exc))
            return CommandResult(success=False, error=error.to_dict(), exit_code=error.exit_code)

        report = Report(
            command=self.name,
            arguments=jsonable(self._echo()),
            input_digest=digest_files(output.inputs),
            results=jsonable(output.results),
            warnings=list(output.warnings),
        )
        csv_text = rows_to_csv(output.header, output.rows) if output.header is not None else None
        if output.failure is not None:
            logger.warning("%s: %s", self.name, output.failure.message)
            return CommandResult(False, report, csv_text, output.failure.to_dict(),
                                 list(output.warnings), output.failure.exit_code)
        return CommandResult(True, report, csv_text, None, list(output.warnings), 0)

    def _echo(self) -> Dict[str, Any]:
        # output options do not change the results
        return {k: v for k, v in sorted(self.params.items()) if k not in ("out", "format", "log_level")}

    def get_metadata(self) -> Dict[str, Any]:
        """Get command metadata"""
        return {
            "name": self.name,
            "description": self.description,
            "required_params": self.required_params,
            "optional_params": sorted(self.optional_params),
        }


class CommandRegistry:
    """Registry for managing available commands"""

    def __init__(self):
        self.commands: Dict[str, Command] = {}

    def register(self, command: Command) -> None:
        """Register a command"""
        self.commands[command.name] = command
        logger.info(f"✅ Command registered: {command.name}")

    def get_command(self, name: str) -> Optional[Command]:
        """Get command by name"""
        return self.commands.get(name)

    def list_commands(self) -> List[str]:
        """List all available commands"""
        return list(self.commands.keys())

    def get_command_info(self, name: str) -> Optional[Dict[str, Any]]:
        """Get command information"""
        command = self.commands.get(name)
        return command.get_metadata() if command else None

    def get_all_command_info(self) -> List[Dict[str, Any]]:
        """Get information for all commands"""
        return [command.get_metadata() for command in self.commands.values()]

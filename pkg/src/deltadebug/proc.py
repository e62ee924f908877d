"""Test oracles realized as external commands over materialized scenarios.

Each evaluation gets a fresh workspace under the workspace root; a
front-end supplied materializer writes the scenario into it (and may
return extra argv entries such as the candidate file path).  The command
runs with the workspace as its working directory and signals the outcome
through its exit status:

    0            FAIL (the failure of interest reproduced)
    125          UNRESOLVED
    1-124, 126-127   PASS
    >= 128, killed by signal, timeout   UNRESOLVED

The 0/125 convention matches common bisection tooling so existing test
scripts can be reused unchanged.
"""

from __future__ import annotations

import os
import shutil
import signal
import subprocess
import tempfile
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

from .core import Configuration, DeltaDebugError, Outcome

DEFAULT_TIMEOUT_MS = 60_000

STDOUT_NAME = ".ddmin-stdout.log"
STDERR_NAME = ".ddmin-stderr.log"

# Process group of the currently running test command, for signal handlers.
_active_pgid: Optional[int] = None


class MaterializeConflict(Exception):
    """The scenario cannot be constructed (e.g. a change does not apply)."""


class OracleExecutionError(DeltaDebugError):
    """The test command could not be run at all; aborts the run."""


Materializer = Callable[[Configuration, Path], Optional[Sequence[str]]]


@dataclass(frozen=True)
class ExitStatus:
    """Exactly one of: exit code, fatal signal, or wall-clock timeout."""

    kind: str  # "code" | "signal" | "timeout"
    value: Optional[int] = None


def exit_code(code: int) -> ExitStatus:
    return ExitStatus("code", code)


def exit_signal(signum: int) -> ExitStatus:
    return ExitStatus("signal", signum)


EXIT_TIMEOUT = ExitStatus("timeout", None)


def map_exit_status(status: ExitStatus) -> Outcome:
    """Total mapping from exit status to outcome (see module docstring)."""
    if status.kind in ("signal", "timeout"):
        return Outcome.UNRESOLVED
    if status.kind != "code":
        raise ValueError(f"unknown exit status kind {status.kind!r}")
    code = status.value
    if code == 0:
        return Outcome.FAIL
    if code == 125 or code >= 128:
        return Outcome.UNRESOLVED
    return Outcome.PASS


@dataclass
class CommandOracleSpec:
    """How to run the external test command.

    The materializer is provided by a front-end module; ``argv`` may be
    extended per test with whatever it returns (e.g. the candidate path).
    """

    argv: list[str]
    materializer: Optional[Materializer] = None
    timeout_ms: int = DEFAULT_TIMEOUT_MS
    workspace_root: Optional[Union[str, Path]] = None
    keep_failing: bool = False
    env_passthrough: bool = True

    def __post_init__(self):
        if not self.argv:
            raise ValueError("argv must not be empty")
        if self.timeout_ms <= 0:
            raise ValueError("timeout must be positive")

    def with_materializer(self, materializer: Materializer) -> "CommandOracleSpec":
        return replace(self, materializer=materializer)


@dataclass
class ExecutionEvidence:
    exit_status: Optional[ExitStatus]
    stdout_path: Optional[str]
    stderr_path: Optional[str]
    workspace: str
    duration_ms: float
    conflict: Optional[str] = None


def _kill_tree(proc: subprocess.Popen) -> None:
    # The child runs in its own session, so its pid names the whole group.
    try:
        os.killpg(proc.pid, signal.SIGKILL)
    except ProcessLookupError:
        pass
    try:
        proc.wait(timeout=5)
    except subprocess.TimeoutExpired:  # pragma: no cover - kernel refused SIGKILL
        pass


def kill_active_process_tree() -> None:
    """Kill the process group of the currently running test, if any."""
    if _active_pgid is not None:
        try:
            os.killpg(_active_pgid, signal.SIGKILL)
        except ProcessLookupError:
            pass


def evaluate_command(
    spec: CommandOracleSpec,
    config: Configuration,
    test_seq: int = 1,
) -> tuple[Outcome, ExecutionEvidence]:
    """Materialize ``config`` into a fresh workspace and run the command.

    The workspace is deleted afterwards unless ``keep_failing`` is set and
    the outcome is FAIL.  A materializer conflict yields UNRESOLVED without
    spawning a process; a command that cannot be executed at all raises.
    """
    global _active_pgid
    if spec.materializer is None:
        raise ValueError("spec has no materializer")
    # Resolve the root: the command's cwd is the workspace itself, so the
    # workspace path (and anything derived from it, like the candidate
    # file argument) must be absolute.
    root = Path(spec.workspace_root).resolve() if spec.workspace_root else Path(tempfile.gettempdir())
    root.mkdir(parents=True, exist_ok=True)
    workspace = Path(tempfile.mkdtemp(prefix=f"ddmin-{test_seq:06d}-", dir=root))
    started = time.perf_counter()

    def elapsed_ms() -> float:
        return (time.perf_counter() - started) * 1000.0

    try:
        extra = spec.materializer(config, workspace)
    except MaterializeConflict as exc:
        evidence = ExecutionEvidence(
            exit_status=None,
            stdout_path=None,
            stderr_path=None,
            workspace=str(workspace),
            duration_ms=elapsed_ms(),
            conflict=str(exc),
        )
        shutil.rmtree(workspace, ignore_errors=True)
        return Outcome.UNRESOLVED, evidence

    argv = list(spec.argv) + [str(a) for a in (extra or [])]
    env = dict(os.environ) if spec.env_passthrough else {
        "PATH": os.environ.get("PATH", "/usr/bin:/bin"),
        "HOME": os.environ.get("HOME", str(workspace)),
    }
    env["DDMIN_TEST_SEQ"] = str(test_seq)
    env["DDMIN_CONFIG_SIZE"] = str(len(config))
    env["DDMIN_UNIVERSE_SIZE"] = str(config.universe_size)

    stdout_path = workspace / STDOUT_NAME
    stderr_path = workspace / STDERR_NAME
    with open(stdout_path, "wb") as out, open(stderr_path, "wb") as err:
        try:
            proc = subprocess.Popen(
                argv,
                cwd=workspace,
                env=env,
                stdin=subprocess.DEVNULL,
                stdout=out,
                stderr=err,
                start_new_session=True,
            )
        except OSError as exc:
            shutil.rmtree(workspace, ignore_errors=True)
            raise OracleExecutionError(f"cannot execute {argv[0]!r}: {exc}") from exc
        _active_pgid = proc.pid
        try:
            returncode = proc.wait(timeout=spec.timeout_ms / 1000.0)
            status = exit_signal(-returncode) if returncode < 0 else exit_code(returncode)
        except subprocess.TimeoutExpired:
            _kill_tree(proc)
            status = EXIT_TIMEOUT
        finally:
            _active_pgid = None

    outcome = map_exit_status(status)
    evidence = ExecutionEvidence(
        exit_status=status,
        stdout_path=str(stdout_path),
        stderr_path=str(stderr_path),
        workspace=str(workspace),
        duration_ms=elapsed_ms(),
    )
    if not (spec.keep_failing and outcome == Outcome.FAIL):
        shutil.rmtree(workspace, ignore_errors=True)
    return outcome, evidence


class CommandOracle:
    """TestOracle over ``evaluate_command`` with per-run bookkeeping.

    Keeps at most one failing workspace around: each new FAIL replaces the
    previously kept one, so after a run the surviving workspace belongs to
    the last failing test, i.e. the final configuration.
    """

    def __init__(self, spec: CommandOracleSpec):
        self.spec = spec
        self.tests_run = 0
        self.last_evidence: Optional[ExecutionEvidence] = None
        self.kept_workspace: Optional[str] = None

    def evaluate(self, config: Configuration) -> Outcome:
        self.tests_run += 1
        outcome, evidence = evaluate_command(self.spec, config, test_seq=self.tests_run)
        self.last_evidence = evidence
        if self.spec.keep_failing and outcome == Outcome.FAIL:
            if self.kept_workspace and self.kept_workspace != evidence.workspace:
                shutil.rmtree(self.kept_workspace, ignore_errors=True)
            self.kept_workspace = evidence.workspace
        return outcome

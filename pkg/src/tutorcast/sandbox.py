"""Sandboxed compile-and-run of author and student code.

Each run gets an isolated OS process in its own temp working directory
and process group, with a wall-clock watchdog, an address-space cap,
capped captured output and network dropped (namespace or seccomp,
whichever the host allows). Container-grade isolation remains a
deployment option layered on top; nothing here needs privileges beyond
what a desk machine has.

Languages are plugins: a source filename rule, an optional compile
command and a run command, with ``{source}`` / ``{workdir}``
placeholders. Interpreted languages register a run step only.
"""

from __future__ import annotations

import json
import os
import shutil
import signal
import subprocess
import sys
import tempfile
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

from .errors import ConflictError, InfrastructureError, InputError

_CHILD_LAUNCHER = Path(__file__).with_name("_sandbox_child.py")

MAX_SOURCE_BYTES = 1_000_000

DEFAULT_TIME_MS = 10_000  # hard cap per run; stops infinite loops hogging workers
DEFAULT_MEMORY_BYTES = 256 * 1024 * 1024
DEFAULT_OUTPUT_BYTES = 64 * 1024
KILL_GRACE_MS = 1_000
FSIZE_BYTES = 32 * 1024 * 1024


@dataclass(frozen=True)
class ExecutionLimits:
    time_ms: int = DEFAULT_TIME_MS
    memory_bytes: int = DEFAULT_MEMORY_BYTES
    output_bytes: int = DEFAULT_OUTPUT_BYTES


@dataclass(frozen=True)
class LanguagePlugin:
    language_id: str
    source_filename: str
    run_step: tuple[str, ...]
    compile_step: Optional[tuple[str, ...]] = None

    def render(self, step: Sequence[str], source: Path, workdir: Path) -> list[str]:
        return [arg.format(source=str(source), workdir=str(workdir)) for arg in step]

    @classmethod
    def from_config(cls, doc: dict) -> "LanguagePlugin":
        """Build from the plugin config format: language_id, source_filename,
        run_step list, optional compile_step list."""
        try:
            compile_step = tuple(doc["compile_step"]) if doc.get("compile_step") else None
            return cls(
                language_id=doc["language_id"],
                source_filename=doc["source_filename"],
                run_step=tuple(doc["run_step"]),
                compile_step=compile_step,
            )
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed language plugin config: {exc}") from exc


def python_plugin(language_id: str = "python") -> LanguagePlugin:
    return LanguagePlugin(
        language_id=language_id,
        source_filename="main.py",
        run_step=(sys.executable, "-I", "{source}"),
    )


@dataclass(frozen=True)
class ExecutionResult:
    stdout: str
    stderr: str
    exit_status: int  # negative means killed by that signal
    wall_time_ms: int
    timed_out: bool
    compile_errors: Optional[str] = None
    stdout_truncated: bool = False
    stderr_truncated: bool = False
    isolation: str = "none"  # network isolation mechanism in effect


class _StreamReader(threading.Thread):
    """Drains a pipe, keeping at most ``cap`` bytes."""

    def __init__(self, fh, cap: int):
        super().__init__(daemon=True)
        self.fh = fh
        self.cap = cap
        self.data = bytearray()
        self.truncated = False
        self.start()

    def run(self):
        fd = self.fh.fileno()
        try:
            while True:
                chunk = os.read(fd, 65536)  # raw read: take what's available
                if not chunk:
                    return
                room = self.cap - len(self.data)
                if room > 0:
                    self.data += chunk[:room]
                if len(chunk) > room:
                    self.truncated = True
        except (OSError, ValueError):
            return

    def text(self) -> str:
        return bytes(self.data).decode("utf-8", errors="replace")


@dataclass
class _RawRun:
    stdout: str
    stderr: str
    exit_status: int
    wall_time_ms: int
    timed_out: bool
    stdout_truncated: bool
    stderr_truncated: bool
    isolation: str


def _run_child(
    cmd: list[str],
    workdir: Path,
    stdin_bytes: bytes,
    limits: ExecutionLimits,
    net: str,
) -> _RawRun:
    report_path = workdir / ".isolation"
    spec = json.dumps(
        {
            "cmd": cmd,
            "mem_bytes": limits.memory_bytes,
            "fsize_bytes": FSIZE_BYTES,
            "net": net,
            "report_path": str(report_path),
        }
    )
    start = time.monotonic()
    try:
        proc = subprocess.Popen(
            [sys.executable, str(_CHILD_LAUNCHER), spec],
            cwd=str(workdir),
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=subprocess.PIPE,
            start_new_session=True,
        )
    except OSError as exc:
        raise InfrastructureError(f"failed to spawn sandbox process: {exc}") from exc

    out_reader = _StreamReader(proc.stdout, limits.output_bytes)
    err_reader = _StreamReader(proc.stderr, limits.output_bytes)

    def feed_stdin():
        try:
            proc.stdin.write(stdin_bytes)
            proc.stdin.close()
        except (BrokenPipeError, OSError):
            pass

    threading.Thread(target=feed_stdin, daemon=True).start()

    timed_out = False
    try:
        proc.wait(timeout=limits.time_ms / 1000)
    except subprocess.TimeoutExpired:
        timed_out = True
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except ProcessLookupError:
            pass
        try:
            proc.wait(timeout=KILL_GRACE_MS / 1000)
        except subprocess.TimeoutExpired:
            proc.kill()
            proc.wait()
    wall_ms = int((time.monotonic() - start) * 1000)
    # the group is dead; make sure no straggler survives in it
    if not timed_out:
        try:
            os.killpg(proc.pid, signal.SIGKILL)
        except (ProcessLookupError, PermissionError):
            pass
    out_reader.join(timeout=2)
    err_reader.join(timeout=2)
    isolation = "none"
    try:
        isolation = report_path.read_text().strip() or "none"
    except OSError:
        pass
    if proc.returncode == 97 and net == "require":
        raise InfrastructureError("network isolation required but unavailable on this host")
    return _RawRun(
        stdout=out_reader.text(),
        stderr=err_reader.text(),
        exit_status=proc.returncode,
        wall_time_ms=wall_ms,
        timed_out=timed_out,
        stdout_truncated=out_reader.truncated,
        stderr_truncated=err_reader.truncated,
        isolation=isolation,
    )


class LanguageRegistry:
    """Thread-safe mapping of language_id to plugin."""

    def __init__(self, plugins: Sequence[LanguagePlugin] = ()):
        self._lock = threading.Lock()
        self._plugins: dict[str, LanguagePlugin] = {}
        for p in plugins:
            self.register(p)

    def register(self, plugin: LanguagePlugin) -> None:
        with self._lock:
            if plugin.language_id in self._plugins:
                raise ConflictError(f"language {plugin.language_id!r} already registered")
            self._plugins[plugin.language_id] = plugin

    def get(self, language_id: str) -> LanguagePlugin:
        with self._lock:
            plugin = self._plugins.get(language_id)
        if plugin is None:
            raise InputError(f"language {language_id!r} is not registered")
        return plugin

    def list_languages(self) -> list[str]:
        with self._lock:
            return sorted(self._plugins)


class Sandbox:
    """Executes one program per call; safe for concurrent use."""

    def __init__(
        self,
        registry: Optional[LanguageRegistry] = None,
        runs_root: Optional[Path | str] = None,
        net: str = "try",
    ):
        self.registry = registry or LanguageRegistry([python_plugin()])
        self.runs_root = Path(runs_root) if runs_root else None
        if self.runs_root:
            self.runs_root.mkdir(parents=True, exist_ok=True)
        self.net = net

    def execute(
        self,
        language_id: str,
        source: str,
        stdin_text: str = "",
        limits: ExecutionLimits = ExecutionLimits(),
    ) -> ExecutionResult:
        plugin = self.registry.get(language_id)
        if len(source.encode("utf-8")) > MAX_SOURCE_BYTES:
            raise InputError(f"source exceeds {MAX_SOURCE_BYTES} bytes")
        if limits.time_ms <= 0 or limits.output_bytes <= 0:
            raise InputError("limits must be positive")
        workdir = Path(tempfile.mkdtemp(prefix="tcrun-", dir=self.runs_root))
        try:
            source_path = workdir / plugin.source_filename
            source_path.write_text(source, encoding="utf-8")

            if plugin.compile_step is not None:
                cmd = plugin.render(plugin.compile_step, source_path, workdir)
                compiled = _run_child(cmd, workdir, b"", limits, net="off")
                if compiled.exit_status != 0 or compiled.timed_out:
                    message = compiled.stderr or compiled.stdout or "compilation failed"
                    if compiled.timed_out:
                        message = "compilation timed out\n" + message
                    return ExecutionResult(
                        stdout="",
                        stderr="",
                        exit_status=compiled.exit_status,
                        wall_time_ms=compiled.wall_time_ms,
                        timed_out=compiled.timed_out,
                        compile_errors=message,
                        isolation=compiled.isolation,
                    )

            cmd = plugin.render(plugin.run_step, source_path, workdir)
            raw = _run_child(cmd, workdir, stdin_text.encode("utf-8"), limits, net=self.net)
            return ExecutionResult(
                stdout=raw.stdout,
                stderr=raw.stderr,
                exit_status=raw.exit_status,
                wall_time_ms=raw.wall_time_ms,
                timed_out=raw.timed_out,
                compile_errors=None,
                stdout_truncated=raw.stdout_truncated,
                stderr_truncated=raw.stderr_truncated,
                isolation=raw.isolation,
            )
        finally:
            shutil.rmtree(workdir, ignore_errors=True)


class ExecutionService:
    """Bounded worker pool in front of the sandbox; excess requests queue
    FIFO and give up after the queue-time limit."""

    def __init__(self, sandbox: Optional[Sandbox] = None, workers: int = 4, queue_timeout_ms: int = 30_000):
        self.sandbox = sandbox or Sandbox()
        self.queue_timeout_ms = queue_timeout_ms
        self._pool = ThreadPoolExecutor(max_workers=workers, thread_name_prefix="sandbox")

    def run(
        self,
        language_id: str,
        source: str,
        stdin_text: str = "",
        limits: ExecutionLimits = ExecutionLimits(),
    ) -> ExecutionResult:
        enqueued = time.monotonic()

        def task() -> ExecutionResult:
            waited_ms = (time.monotonic() - enqueued) * 1000
            if waited_ms > self.queue_timeout_ms:
                raise InfrastructureError(f"request queued for {int(waited_ms)} ms, over the {self.queue_timeout_ms} ms limit")
            return self.sandbox.execute(language_id, source, stdin_text, limits)

        return self._pool.submit(task).result()

    def shutdown(self) -> None:
        self._pool.shutdown(wait=False, cancel_futures=True)

import subprocess
import sys
import threading
import time

import pytest

from tutorcast.errors import ConflictError, InputError
from tutorcast.sandbox import (
    ExecutionLimits,
    ExecutionService,
    LanguagePlugin,
    LanguageRegistry,
    Sandbox,
    python_plugin,
)


@pytest.fixture(scope="module")
def sandbox(tmp_path_factory):
    return Sandbox(runs_root=tmp_path_factory.mktemp("runs"))


FAST = ExecutionLimits(time_ms=8000)


def test_hello_world(sandbox):
    result = sandbox.execute("python", "print('hi')", limits=FAST)
    assert result.stdout == "hi\n"
    assert result.exit_status == 0
    assert not result.timed_out
    assert result.compile_errors is None


def test_stdin_echo_matches_unsandboxed_run(sandbox):
    program = "a = int(input())\nb = int(input())\nprint(a + b)\n"
    stdin_text = "3\n4\n"
    expected = subprocess.run(
        [sys.executable, "-c", program], input=stdin_text, capture_output=True, text=True
    ).stdout
    result = sandbox.execute("python", program, stdin_text=stdin_text, limits=FAST)
    assert result.stdout == expected
    assert result.stdout.strip() == "7"


def test_nonzero_exit_and_stderr(sandbox):
    result = sandbox.execute("python", "import sys\nsys.stderr.write('boom\\n')\nsys.exit(3)", limits=FAST)
    assert result.exit_status == 3
    assert "boom" in result.stderr


def test_timeout_kills_and_keeps_partial_output(sandbox):
    program = "print('started', flush=True)\nwhile True:\n    pass\n"
    limits = ExecutionLimits(time_ms=1500)
    result = sandbox.execute("python", program, limits=limits)
    assert result.timed_out
    assert result.wall_time_ms >= 1500
    assert result.wall_time_ms <= 1500 + 1000
    assert "started" in result.stdout


def test_sleeping_program_is_killed(sandbox):
    result = sandbox.execute("python", "import time\ntime.sleep(60)", limits=ExecutionLimits(time_ms=1200))
    assert result.timed_out
    assert result.exit_status < 0  # killed by signal


def test_busy_nested_loops_terminate_within_grace(sandbox):
    program = "x = 0\nwhile True:\n    for i in range(10**6):\n        x += i\n"
    started = time.monotonic()
    result = sandbox.execute("python", program, limits=ExecutionLimits(time_ms=1000))
    elapsed_ms = (time.monotonic() - started) * 1000
    assert result.timed_out
    assert elapsed_ms < 1000 + 2500  # watchdog plus reaping slack


def test_memory_cap_enforced(sandbox):
    program = "x = bytearray(512 * 1024 * 1024)\nprint('allocated')"
    result = sandbox.execute("python", program, limits=ExecutionLimits(time_ms=8000, memory_bytes=128 * 1024 * 1024))
    assert result.exit_status != 0
    assert "allocated" not in result.stdout
    assert "MemoryError" in result.stderr


def test_output_truncated_at_exact_cap(sandbox):
    cap = 4096
    program = "print('x' * 100000)"
    result = sandbox.execute("python", program, limits=ExecutionLimits(time_ms=8000, output_bytes=cap))
    assert result.stdout_truncated
    assert len(result.stdout.encode()) == cap
    assert not result.timed_out


def test_workdir_isolation_under_concurrency(sandbox):
    program_template = (
        "open('data.txt', 'w').write('{tag}')\n"
        "import time\ntime.sleep(0.3)\n"
        "print(open('data.txt').read())"
    )
    results = {}

    def run(tag):
        results[tag] = sandbox.execute("python", program_template.format(tag=tag), limits=FAST)

    threads = [threading.Thread(target=run, args=(t,)) for t in ("alpha", "beta")]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert results["alpha"].stdout.strip() == "alpha"
    assert results["beta"].stdout.strip() == "beta"
    assert results["alpha"].exit_status == 0 and results["beta"].exit_status == 0


@pytest.mark.skipif(not sys.platform.startswith("linux"), reason="network sandbox is Linux-only")
def test_outbound_network_blocked(sandbox):
    program = (
        "import socket\n"
        "try:\n"
        "    socket.create_connection(('93.184.216.34', 80), timeout=3)\n"
        "    print('CONNECTED')\n"
        "except OSError as e:\n"
        "    print('BLOCKED')\n"
    )
    result = sandbox.execute("python", program, limits=FAST)
    assert result.isolation in ("netns", "userns", "seccomp")
    assert result.stdout.strip() == "BLOCKED"


def test_interpreted_language_without_compile_step(sandbox):
    result = sandbox.execute("python", "print(1 + 1)", limits=FAST)
    assert result.stdout.strip() == "2"


def test_compiled_language_flow(tmp_path):
    # byte-compilation makes Python behave like a compiled language here
    checked = LanguagePlugin(
        language_id="python-checked",
        source_filename="main.py",
        compile_step=(sys.executable, "-m", "py_compile", "{source}"),
        run_step=(sys.executable, "-I", "{source}"),
    )
    sandbox = Sandbox(LanguageRegistry([checked]), runs_root=tmp_path)
    ok = sandbox.execute("python-checked", "print('built')", limits=FAST)
    assert ok.compile_errors is None
    assert ok.stdout.strip() == "built"

    broken = sandbox.execute("python-checked", "def broken(:\n", limits=FAST)
    assert broken.compile_errors is not None
    assert "SyntaxError" in broken.compile_errors
    assert broken.stdout == ""  # run phase never happened


def test_registry_rejects_duplicates():
    registry = LanguageRegistry([python_plugin()])
    with pytest.raises(ConflictError):
        registry.register(python_plugin())
    assert registry.list_languages() == ["python"]


def test_unregistered_language_rejected(sandbox):
    with pytest.raises(InputError):
        sandbox.execute("cobol", "DISPLAY 'HI'.")


def test_oversized_source_rejected(sandbox):
    with pytest.raises(InputError):
        sandbox.execute("python", "x = 1\n" * 200_000)


def test_plugin_from_config_round_trip():
    doc = {
        "language_id": "demo",
        "source_filename": "prog.demo",
        "compile_step": ["cc", "{source}"],
        "run_step": ["{workdir}/a.out"],
    }
    plugin = LanguagePlugin.from_config(doc)
    assert plugin.compile_step == ("cc", "{source}")
    with pytest.raises(InputError):
        LanguagePlugin.from_config({"language_id": "x"})


def test_execution_service_pools_and_queues(tmp_path):
    service = ExecutionService(Sandbox(runs_root=tmp_path), workers=2)
    try:
        results = [service.run("python", f"print({i})", limits=FAST) for i in range(3)]
        assert [r.stdout.strip() for r in results] == ["0", "1", "2"]
    finally:
        service.shutdown()


def test_queue_time_limit_enforced(tmp_path):
    from concurrent.futures import ThreadPoolExecutor

    from tutorcast.errors import InfrastructureError

    service = ExecutionService(Sandbox(runs_root=tmp_path), workers=1, queue_timeout_ms=100)
    try:
        with ThreadPoolExecutor(max_workers=2) as pool:
            slow = pool.submit(service.run, "python", "import time\ntime.sleep(1.2)", "", FAST)
            time.sleep(0.2)  # make sure the slow run owns the only worker
            queued = pool.submit(service.run, "python", "print('late')", "", FAST)
            with pytest.raises(InfrastructureError, match="queued"):
                queued.result()
            assert slow.result().exit_status == 0
    finally:
        service.shutdown()

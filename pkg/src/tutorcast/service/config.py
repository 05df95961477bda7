"""Service configuration, externalized through environment variables."""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional


@dataclass
class ServiceConfig:
    storage_root: Path
    secret: str = "dev-secret-change-me"
    token_ttl_s: int = 86_400
    exec_workers: int = 4
    exec_time_ms: int = 10_000
    exec_memory_bytes: int = 256 * 1024 * 1024
    exec_output_bytes: int = 64 * 1024
    qa_fixture_path: Optional[Path] = None
    qa_http_url: Optional[str] = None
    test_delay_ms: int = 0  # test hook: artificial per-request latency

    @classmethod
    def from_env(cls, env: Optional[dict] = None) -> "ServiceConfig":
        env = dict(os.environ if env is None else env)

        def get_int(name: str, default: int) -> int:
            return int(env.get(name, default))

        fixture = env.get("TUTORCAST_QA_FIXTURE")
        return cls(
            storage_root=Path(env.get("TUTORCAST_STORAGE_ROOT", "./tutorcast-data")),
            secret=env.get("TUTORCAST_SECRET", cls.secret),
            token_ttl_s=get_int("TUTORCAST_TOKEN_TTL_S", cls.token_ttl_s),
            exec_workers=get_int("TUTORCAST_EXEC_WORKERS", cls.exec_workers),
            exec_time_ms=get_int("TUTORCAST_EXEC_TIME_MS", cls.exec_time_ms),
            exec_memory_bytes=get_int("TUTORCAST_EXEC_MEMORY_BYTES", cls.exec_memory_bytes),
            exec_output_bytes=get_int("TUTORCAST_EXEC_OUTPUT_BYTES", cls.exec_output_bytes),
            qa_fixture_path=Path(fixture) if fixture else None,
            qa_http_url=env.get("TUTORCAST_QA_URL"),
            test_delay_ms=get_int("TUTORCAST_TEST_DELAY_MS", 0),
        )

"""``tutorcast-serve``: run the HTTP service with uvicorn."""

from __future__ import annotations

import argparse
import logging
from pathlib import Path

import uvicorn

from .app import create_app
from .config import ServiceConfig


def main(argv: list[str] | None = None) -> None:
    parser = argparse.ArgumentParser(prog="tutorcast-serve", description="Serve the tutorial authoring/playback API")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8600)
    parser.add_argument("--storage-root", type=Path, default=None, help="overrides TUTORCAST_STORAGE_ROOT")
    parser.add_argument("--log-level", default="info")
    args = parser.parse_args(argv)

    logging.basicConfig(level=args.log_level.upper())
    config = ServiceConfig.from_env()
    if args.storage_root is not None:
        config.storage_root = args.storage_root
    uvicorn.run(create_app(config), host=args.host, port=args.port, log_level=args.log_level)


if __name__ == "__main__":
    main()

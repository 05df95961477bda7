"""Closed-loop load harness for the login -> list -> fetch-bundle journey.

Simulates concurrent students starting playback: each virtual user runs
on its own connection, issues the next request only after the previous
response lands, and repeats the journey for a fixed number of
iterations. The report carries per-route and end-to-end latency
percentiles, error counts and throughput, plus a pass verdict against a
total-response-time budget (end-to-end p95 within budget and zero
errors).

The harness self-provisions its fixtures through the public API: an
author account, one released tutorial with a small recorded section,
and one student account per virtual user.

Usage::

    tutorcast-load --target http://127.0.0.1:8600 --users 50 \
        --budget-ms 5000 --iterations 3 --report-path load-report.jsonl
    tutorcast-load --target ... --sweep "10,50,100"

Exit code is 0 iff the run (or every profile of a sweep) passes.
"""

from __future__ import annotations

import argparse
import asyncio
import json
import math
import sys
import time
from dataclasses import dataclass, field
from typing import Optional

import httpx

SCENARIO = ("login", "list_tutorials", "fetch_bundle")


@dataclass(frozen=True)
class LoadProfile:
    users: int
    iterations: int = 3
    ramp_ms: int = 500

    def __post_init__(self):
        if self.users < 1:
            raise ValueError("users must be >= 1")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")


@dataclass
class Sample:
    user: int
    iteration: int
    route: str
    status: int
    ok: bool
    client_ms: float
    server_ms: float


@dataclass
class Stats:
    p50: float
    p95: float
    p99: float
    max: float
    count: int

    @classmethod
    def of(cls, values: list[float]) -> "Stats":
        if not values:
            return cls(0.0, 0.0, 0.0, 0.0, 0)
        ordered = sorted(values)

        def pct(p: float) -> float:
            rank = max(1, math.ceil(p * len(ordered)))
            return ordered[rank - 1]

        return cls(p50=pct(0.50), p95=pct(0.95), p99=pct(0.99), max=ordered[-1], count=len(ordered))

    def as_dict(self) -> dict:
        return {"p50_ms": round(self.p50, 1), "p95_ms": round(self.p95, 1), "p99_ms": round(self.p99, 1), "max_ms": round(self.max, 1), "count": self.count}


@dataclass
class LoadReport:
    users: int
    iterations: int
    budget_ms: int
    per_route: dict[str, Stats]
    end_to_end: Stats
    error_count: int
    total_requests: int
    wall_time_s: float
    throughput_rps: float
    passed: bool
    samples: list[Sample] = field(default_factory=list)

    def summary_dict(self) -> dict:
        return {
            "record": "summary",
            "users": self.users,
            "iterations": self.iterations,
            "budget_ms": self.budget_ms,
            "scenario": list(SCENARIO),
            "per_route": {route: s.as_dict() for route, s in self.per_route.items()},
            "end_to_end": self.end_to_end.as_dict(),
            "error_count": self.error_count,
            "total_requests": self.total_requests,
            "wall_time_s": round(self.wall_time_s, 2),
            "throughput_rps": round(self.throughput_rps, 1),
            "pass": self.passed,
        }

    def human_table(self) -> str:
        lines = [
            f"virtual users      {self.users}",
            f"iterations/user    {self.iterations}",
            f"total requests     {self.total_requests}",
            f"errors             {self.error_count}",
            f"throughput         {self.throughput_rps:.1f} req/s",
            "",
            f"{'step':<16}{'p50 ms':>10}{'p95 ms':>10}{'p99 ms':>10}{'max ms':>10}",
        ]
        for route in SCENARIO:
            s = self.per_route[route]
            lines.append(f"{route:<16}{s.p50:>10.1f}{s.p95:>10.1f}{s.p99:>10.1f}{s.max:>10.1f}")
        e = self.end_to_end
        lines.append(f"{'end-to-end':<16}{e.p50:>10.1f}{e.p95:>10.1f}{e.p99:>10.1f}{e.max:>10.1f}")
        lines.append("")
        verdict = "PASS" if self.passed else "FAIL"
        lines.append(f"budget: end-to-end p95 <= {self.budget_ms} ms and zero errors -> {verdict}")
        return "\n".join(lines)


class SetupError(RuntimeError):
    """Provisioning failed before any measurement began."""


async def _request(client: httpx.AsyncClient, method: str, url: str, **kw) -> tuple[httpx.Response, float, float]:
    started = time.monotonic()
    response = await client.request(method, url, **kw)
    client_ms = (time.monotonic() - started) * 1000
    server_ms = float(response.headers.get("X-Server-Duration-Ms", 0.0))
    return response, client_ms, server_ms


async def provision(target: str, users: int) -> list[dict]:
    """Create the author, a released one-section tutorial, and one student
    account per virtual user. Returns the student credentials."""
    run_tag = f"{int(time.time() * 1000):x}"
    async with httpx.AsyncClient(base_url=target, timeout=30.0) as client:
        try:
            health = await client.get("/health")
            health.raise_for_status()
        except (httpx.HTTPError, OSError) as exc:
            raise SetupError(f"target {target} unreachable: {exc}") from exc

        r = await client.post(
            "/auth/register",
            json={"email": f"load-author-{run_tag}@load.test", "password": "load-pass", "role": "author"},
        )
        if r.status_code != 201:
            raise SetupError(f"author registration failed: {r.status_code} {r.text}")
        headers = {"Authorization": f"Bearer {r.json()['token']}"}

        r = await client.post("/tutorials", json={"title": f"load {run_tag}", "language": "python"}, headers=headers)
        if r.status_code != 201:
            raise SetupError(f"tutorial creation failed: {r.text}")
        tutorial_id = r.json()["tutorial_id"]

        r = await client.post(
            "/sessions",
            json={"tutorial_id": tutorial_id, "section_slot": 0, "language": "python", "notes_source": "load fixture"},
            headers=headers,
        )
        session_id = r.json()["session_id"]
        text = "print('measured')\n"
        events = []
        for i, ch in enumerate(text):
            events.append({"seq": i, "event": ["edit", i * 50, "code", "ins", 0, i, ch]})
        r = await client.post(f"/sessions/{session_id}/events", json={"events": events}, headers=headers)
        if r.status_code != 200:
            raise SetupError(f"event staging failed: {r.text}")
        r = await client.post(
            f"/sessions/{session_id}/finalize",
            data={"duration_ms": str(len(text) * 50 + 1000)},
            files={"audio": ("audio.mp3", b"\x00" * 256, "audio/mpeg")},
            headers=headers,
        )
        if r.status_code != 201:
            raise SetupError(f"finalize failed: {r.text}")
        section_id = r.json()["section_id"]
        r = await client.post(f"/tutorials/{tutorial_id}/release", headers=headers)
        if r.status_code != 200:
            raise SetupError(f"release failed: {r.text}")

        students = []
        for i in range(users):
            email = f"load-user-{run_tag}-{i}@load.test"
            r = await client.post("/auth/register", json={"email": email, "password": "load-pass", "role": "student"})
            if r.status_code != 201:
                raise SetupError(f"student registration failed: {r.text}")
            students.append({"email": email, "password": "load-pass", "tutorial_id": tutorial_id, "section_id": section_id})
        return students


async def _virtual_user(
    target: str, user_index: int, creds: dict, profile: LoadProfile, samples: list[Sample]
) -> None:
    delay_s = (profile.ramp_ms / 1000) * (user_index / max(1, profile.users))
    await asyncio.sleep(delay_s)
    async with httpx.AsyncClient(base_url=target, timeout=30.0) as client:
        for iteration in range(profile.iterations):
            token = None
            # step 1: login
            response, client_ms, server_ms = await _request(
                client, "POST", "/auth/login", json={"email": creds["email"], "password": creds["password"]}
            )
            ok = response.status_code == 200
            samples.append(Sample(user_index, iteration, "login", response.status_code, ok, client_ms, server_ms))
            if ok:
                token = response.json()["token"]
            headers = {"Authorization": f"Bearer {token}"} if token else {}

            # step 2: list released tutorials
            response, client_ms, server_ms = await _request(client, "GET", "/tutorials", headers=headers)
            ok = response.status_code == 200
            samples.append(Sample(user_index, iteration, "list_tutorials", response.status_code, ok, client_ms, server_ms))

            # step 3: fetch the playback bundle
            bundle_url = f"/tutorials/{creds['tutorial_id']}/sections/{creds['section_id']}/bundle"
            response, client_ms, server_ms = await _request(client, "GET", bundle_url, headers=headers)
            ok = response.status_code == 200
            samples.append(Sample(user_index, iteration, "fetch_bundle", response.status_code, ok, client_ms, server_ms))


def _aggregate(profile: LoadProfile, budget_ms: int, samples: list[Sample], wall_s: float) -> LoadReport:
    per_route = {route: Stats.of([s.client_ms for s in samples if s.route == route]) for route in SCENARIO}
    journey_totals = []
    by_user_iter: dict[tuple[int, int], float] = {}
    for s in samples:
        by_user_iter[(s.user, s.iteration)] = by_user_iter.get((s.user, s.iteration), 0.0) + s.client_ms
    journey_totals = list(by_user_iter.values())
    errors = sum(1 for s in samples if not s.ok)
    end_to_end = Stats.of(journey_totals)
    passed = end_to_end.p95 <= budget_ms and errors == 0
    return LoadReport(
        users=profile.users,
        iterations=profile.iterations,
        budget_ms=budget_ms,
        per_route=per_route,
        end_to_end=end_to_end,
        error_count=errors,
        total_requests=len(samples),
        wall_time_s=wall_s,
        throughput_rps=len(samples) / wall_s if wall_s > 0 else 0.0,
        passed=passed,
        samples=samples,
    )


async def run_load_async(profile: LoadProfile, target: str, budget_ms: int, report_path: Optional[str] = None) -> LoadReport:
    students = await provision(target, profile.users)
    samples: list[Sample] = []
    started = time.monotonic()
    await asyncio.gather(*(_virtual_user(target, i, students[i], profile, samples) for i in range(profile.users)))
    wall_s = time.monotonic() - started
    report = _aggregate(profile, budget_ms, samples, wall_s)
    if report_path:
        write_report(report, report_path)
    return report


def run_load(profile: LoadProfile, target: str, budget_ms: int, report_path: Optional[str] = None) -> LoadReport:
    return asyncio.run(run_load_async(profile, target, budget_ms, report_path))


def write_report(report: LoadReport, path: str) -> None:
    """Line-delimited records: one per sample, then one summary line."""
    with open(path, "w", encoding="utf-8") as fh:
        for s in report.samples:
            fh.write(
                json.dumps(
                    {
                        "record": "sample",
                        "user": s.user,
                        "iteration": s.iteration,
                        "route": s.route,
                        "status": s.status,
                        "ok": s.ok,
                        "client_ms": round(s.client_ms, 2),
                        "server_ms": round(s.server_ms, 2),
                    }
                )
                + "\n"
            )
        fh.write(json.dumps(report.summary_dict()) + "\n")


def sweep(user_counts: list[int], target: str, budget_ms: int, iterations: int, ramp_ms: int, report_path: Optional[str]) -> list[LoadReport]:
    if not user_counts:
        raise ValueError("sweep needs at least one user count")
    reports = []
    for users in user_counts:
        profile = LoadProfile(users=users, iterations=iterations, ramp_ms=ramp_ms)
        suffix = f".u{users}" if report_path else None
        path = f"{report_path}{suffix}" if report_path else None
        reports.append(run_load(profile, target, budget_ms, path))
    return reports


def sweep_table(reports: list[LoadReport]) -> str:
    lines = [f"{'users':>8}{'e2e p50':>12}{'e2e p95':>12}{'errors':>10}{'pass':>8}"]
    for r in reports:
        lines.append(f"{r.users:>8}{r.end_to_end.p50:>12.1f}{r.end_to_end.p95:>12.1f}{r.error_count:>10}{str(r.passed):>8}")
    return "\n".join(lines)


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="tutorcast-load", description="Concurrent-user load test: login, list, fetch bundle")
    parser.add_argument("--target", required=True, help="base URL of a running service instance")
    parser.add_argument("--users", type=int, default=50)
    parser.add_argument("--iterations", type=int, default=3)
    parser.add_argument("--ramp-ms", type=int, default=500)
    parser.add_argument("--budget-ms", type=int, default=5000)
    parser.add_argument("--report-path", default="load-report.jsonl")
    parser.add_argument("--sweep", default=None, help='comma-separated user counts, e.g. "10,50,100"')
    args = parser.parse_args(argv)

    try:
        if args.sweep:
            counts = [int(x) for x in args.sweep.split(",") if x.strip()]
            reports = sweep(counts, args.target, args.budget_ms, args.iterations, args.ramp_ms, args.report_path)
            print(sweep_table(reports))
            return 0 if all(r.passed for r in reports) else 1
        profile = LoadProfile(users=args.users, iterations=args.iterations, ramp_ms=args.ramp_ms)
        report = run_load(profile, args.target, args.budget_ms, args.report_path)
        print(report.human_table())
        print(f"report written to {args.report_path}")
        return 0 if report.passed else 1
    except SetupError as exc:
        print(f"setup error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line client for the experiment service.

By default the client mounts the service in-process (no sockets); pass
--server to talk to a remote instance instead.  SCNS_OUTPUT_DIR overrides
the configured output directory.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import httpx


def _client(server: str | None) -> httpx.Client:
    if server:
        return httpx.Client(base_url=server, timeout=None)
    # in-process: mount the ASGI app behind a synchronous httpx client
    from starlette.testclient import TestClient

    from .service import create_app

    return TestClient(create_app(), base_url="http://scns.local")


def _run_like(args, endpoint: str) -> int:
    text = Path(args.config).read_text()
    payload = {"config_text": text, "workers": args.workers}
    override = os.environ.get("SCNS_OUTPUT_DIR")
    if override:
        payload["output_dir"] = override
    with _client(args.server) as client:
        resp = client.post(endpoint, json=payload)
    if resp.status_code != 200:
        print(f"error: {resp.status_code} {resp.text}", file=sys.stderr)
        return 2
    body = resp.json()
    print(json.dumps(body["manifest"], indent=2, sort_keys=True))
    if args.plot_csv:
        Path(args.plot_csv).write_text(body["plot_csv"])
    return body["exit_code"]


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="scns",
        description="Monte Carlo experiments for stochastic compressible flow",
    )
    parser.add_argument("--server", default=None,
                        help="base URL of a running service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_ in (("run", "execute one experiment"),
                        ("sweep", "execute a parameter sweep")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="path to a key = value config file")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--plot-csv", default=None,
                       help="also write the tidy plotting CSV here")

    sub.add_parser("selftest", help="run the invariant suites")

    p = sub.add_parser("oracle", help="print brute-force oracle reference values")
    p.add_argument("case", help="registered oracle case name")

    args = parser.parse_args(argv)

    if args.command in ("run", "sweep"):
        return _run_like(args, f"/{args.command}")

    with _client(args.server) as client:
        if args.command == "selftest":
            resp = client.post("/selftest", json={})
            body = resp.json()
            print(json.dumps(body, indent=2, sort_keys=True))
            return 0 if body.get("ok") else 1
        resp = client.get(f"/oracle/{args.case}")
        if resp.status_code != 200:
            print(f"error: {resp.status_code} {resp.text}", file=sys.stderr)
            return 2
        print(json.dumps(resp.json(), indent=2, sort_keys=True))
        return 0


if __name__ == "__main__":
    sys.exit(main())

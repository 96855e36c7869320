"""Command-line entry point: run, serve, decode and verify."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from typing import Any, Sequence

from coopcar.cam import CAM_LEN, cam_decode
from coopcar.errors import CoopCarError, DecodeError, ScenarioError, TraceError
from coopcar.geonet import gn_decode

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2


def _cam_dict(data: bytes) -> dict[str, Any]:
    msg = cam_decode(data)
    out = dict(msg.__dict__)
    out["latitude_deg"] = msg.latitude * 1e-7 if msg.latitude is not None else None
    out["longitude_deg"] = msg.longitude * 1e-7 if msg.longitude is not None else None
    out["speed_mps"] = msg.speed_mps
    out["heading_deg"] = msg.heading_deg
    return out


def decode_hex(text: str) -> dict[str, Any]:
    data = bytes.fromhex("".join(text.split()))
    if len(data) == CAM_LEN:
        return {"cam": _cam_dict(data)}
    frame = gn_decode(data)
    out: dict[str, Any] = {"geonet": {k: v for k, v in frame.__dict__.items() if k != "payload"}}
    out["geonet"]["payload_len"] = len(frame.payload)
    if len(frame.payload) == CAM_LEN:
        out["cam"] = _cam_dict(frame.payload)
    return out


def _cmd_run(args: argparse.Namespace) -> int:
    from coopcar.runner import file_sha256, run_scenario
    from coopcar.scenario import load_scenario

    config = load_scenario(args.scenario)
    result = run_scenario(config, seed=args.seed, out=args.out, duration_s=args.duration, trace_dir=args.record_traces)
    summary = dict(result.summary)
    if not args.lead_times:
        summary.pop("lead_times_s", None)
    if args.out:
        summary["log"] = {"path": str(args.out), "records": len(result.records), "sha256": file_sha256(args.out)}
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _cmd_verify(args: argparse.Namespace) -> int:
    from coopcar.runner import read_log, summarize

    summary = summarize(read_log(args.log))
    if args.summary:
        with open(args.summary, encoding="utf-8") as fh:
            expected = json.load(fh)
        expected.pop("log", None)
        mismatched = sorted(k for k in expected if expected[k] != summary.get(k))
        if mismatched:
            print(f"summary mismatch in: {', '.join(mismatched)}", file=sys.stderr)
            return EXIT_VALIDATION
    print(json.dumps(summary, indent=2))
    return EXIT_OK


def _cmd_decode(args: argparse.Namespace) -> int:
    print(json.dumps(decode_hex(args.hex), indent=2))
    return EXIT_OK


def _cmd_serve(args: argparse.Namespace) -> int:
    from coopcar.api import ApiServer, LiveSession
    from coopcar.scenario import load_scenario

    config = load_scenario(args.scenario)
    station_id = args.station
    if station_id is None:
        icw = [s.id for s in config.stations if s.icw_enabled]
        station_id = icw[0] if icw else config.stations[0].id
    session = LiveSession(config, station_id, speed=args.speed, log_path=args.out)
    server = ApiServer(session, args.host, args.port)
    session.start()
    logging.info("API for station %s listening on %s:%s", station_id, args.host, server.server_address[1])
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        server.server_close()
        session.stop()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="coopcar", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario and write the JSONL event log")
    run.add_argument("--scenario", required=True)
    run.add_argument("--seed", type=int, default=None, help="override the scenario seed (u64)")
    run.add_argument("--duration", type=float, default=None, help="override duration in seconds")
    run.add_argument("--out", default=None, help="event log path (JSONL)")
    run.add_argument("--record-traces", default=None, metavar="DIR", help="write per-station fix traces")
    run.add_argument("--lead-times", action="store_true", help="include every warning lead time")
    run.set_defaults(func=_cmd_run)

    serve = sub.add_parser("serve", help="run live with the JSON/TCP API")
    serve.add_argument("--scenario", required=True)
    serve.add_argument("--port", type=int, default=48110)
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--station", type=int, default=None, help="station the API controls")
    serve.add_argument("--speed", type=float, default=1.0, help="sim/wall time ratio, 0 = unpaced")
    serve.add_argument("--out", default=None, help="event log path (JSONL)")
    serve.set_defaults(func=_cmd_serve)

    decode = sub.add_parser("decode", help="decode a hex GeoNetworking frame or bare CAM")
    decode.add_argument("--hex", required=True)
    decode.set_defaults(func=_cmd_decode)

    verify = sub.add_parser("verify", help="recompute a run summary from its event log")
    verify.add_argument("--log", required=True)
    verify.add_argument("--summary", default=None, help="summary JSON to compare against")
    verify.set_defaults(func=_cmd_verify)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, TraceError, DecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (CoopCarError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: sim, capture, analyze, report and serve.

Every subcommand maps onto one operator task:

  pq sim      run the waveform simulator on a TCP endpoint
  pq capture  ingest an endpoint's stream into the data directory
  pq analyze  print VRMS / Vpeak / THD of stored cycles
  pq report   classify disturbances and write Report.txt + dataRMS.bin
  pq serve    run the HTTP/WS daemon (and the web UI, when built)
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from pathlib import Path

from .conversion import ConversionConfig, load_config_file
from .events import INTERRUPTION, SAG, SURGE, Thresholds
from .protocol import (
    DEFAULT_BAUD,
    PortConfig,
    Reading,
    default_endpoint,
    open_session,
)
from .simulator import DisturbanceSpec, Harmonic, SimulatorServer, WaveformSpec
from .storage import RAW_FILENAME, RawStore, resolve_data_dir
from .service import Daemon, create_app
from .analysis import InsufficientDataError


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="key = value config file")
    parser.add_argument("--vref", type=float, help="ADC analog reference, volts")
    parser.add_argument("--offset", type=float, help="DC offset source, volts")
    parser.add_argument("--ratio", type=float, help="divider output fraction")
    parser.add_argument("--nominal", type=float, help="nominal mains RMS voltage")


def _config_values(args: argparse.Namespace) -> dict[str, float]:
    return load_config_file(args.config) if args.config else {}


def _conversion_config(args: argparse.Namespace) -> ConversionConfig:
    return ConversionConfig.from_mapping(
        _config_values(args),
        vref=args.vref,
        offset=args.offset,
        ratio=args.ratio,
        nominal_voltage=args.nominal,
    )


def _parse_harmonic(text: str) -> Harmonic:
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise argparse.ArgumentTypeError(
            f"expected ORDER:AMPLITUDE[:PHASE], got {text!r}"
        )
    try:
        order = int(parts[0])
        amplitude = float(parts[1])
        phase = float(parts[2]) if len(parts) == 3 else 0.0
        return Harmonic(order, amplitude, phase)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _parse_disturbance(kind: str, text: str) -> DisturbanceSpec:
    fields = {}
    for item in text.split(","):
        key, _, value = item.partition("=")
        if not value:
            raise argparse.ArgumentTypeError(
                f"expected at=N,half_cycles=N,pu=X, got {text!r}"
            )
        fields[key.strip()] = value.strip()
    try:
        return DisturbanceSpec(
            kind=kind,
            start_half_cycle=int(fields["at"]),
            duration_half_cycles=int(fields.get("half_cycles", "1")),
            magnitude_pu=float(fields["pu"]),
        )
    except KeyError as exc:
        raise argparse.ArgumentTypeError(f"missing disturbance field {exc}") from exc
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def cmd_sim(args: argparse.Namespace) -> int:
    disturbances = []
    for kind, flag in ((SAG, args.sag), (SURGE, args.surge),
                       (INTERRUPTION, args.interruption)):
        for text in flag or []:
            disturbances.append(_parse_disturbance(kind, text))
    spec = WaveformSpec(
        fundamental_rms=args.rms,
        harmonics=tuple(args.harmonic or []),
        noise_sigma=args.noise,
    )
    server = SimulatorServer(
        spec=spec,
        disturbances=disturbances,
        cfg=_conversion_config(args),
        listen=args.listen,
        replay_path=args.replay,
        max_readings=args.readings,
        pace=not args.no_pace,
        seed=args.seed,
    )
    with server:
        print(f"simulator listening on {server.endpoint}", flush=True)
        try:
            while True:
                time.sleep(0.5)
        except KeyboardInterrupt:
            return 0


def cmd_capture(args: argparse.Namespace) -> int:
    endpoint = args.endpoint or default_endpoint()
    if not endpoint:
        print("capture: no endpoint given and PQ_ENDPOINT is not set", file=sys.stderr)
        return 1
    data_dir = resolve_data_dir(args.data_dir)
    store = RawStore(data_dir / RAW_FILENAME)
    deadline = time.monotonic() + args.seconds if args.seconds else None
    stored = 0
    try:
        with open_session(PortConfig(endpoint, args.baud)) as session:
            batch = []
            for event in session.events():
                batch.append(event)
                if isinstance(event, Reading):
                    stored += 1
                if len(batch) >= 90:
                    store.append(batch)
                    batch = []
                if args.readings and stored >= args.readings:
                    break
                if deadline and time.monotonic() >= deadline:
                    break
            store.append(batch)
    except ConnectionError as exc:
        print(f"capture: {exc}", file=sys.stderr)
        return 1
    finally:
        store.close()
    print(f"stored {stored} readings ({store.malformed_skipped} malformed skipped) "
          f"in {data_dir / RAW_FILENAME}")
    return 0


def cmd_analyze(args: argparse.Namespace) -> int:
    daemon = Daemon(
        resolve_data_dir(args.data_dir),
        cfg=_conversion_config(args),
    )
    cycles = None if args.cycles == "all" else int(args.cycles)
    try:
        payload = daemon.window(cycles, args.view)
    except (InsufficientDataError, ValueError) as exc:
        print(f"analyze: {exc}", file=sys.stderr)
        return 1
    stats, display = payload["stats"], payload["display"]
    print(f"Cycles:    {payload['cycles']}")
    print(f"VRMS:      {display['vrms']}")
    print(f"Vpeak:     {display['vpeak']}")
    print(f"THD:       {display['thd']}")
    print(f"Frequency: {display['frequency']}")
    if args.fft_out:
        fft = daemon.fft(cycles)
        with open(args.fft_out, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["hz", "magnitude"])
            writer.writerows(zip(fft["hz"], fft["magnitude"]))
        print(f"FFT written to {args.fft_out}")
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    thresholds = Thresholds.from_mapping(
        _config_values(args),
        sag_pu=args.sag_pu,
        surge_pu=args.surge_pu,
        interruption_pu=args.interruption_pu,
    )
    daemon = Daemon(
        resolve_data_dir(args.data_dir),
        cfg=_conversion_config(args),
        thresholds=thresholds,
    )
    session = -1 if args.session == "latest" else int(args.session)
    try:
        payload = daemon.report(session)
    except (InsufficientDataError, ValueError) as exc:
        print(f"report: {exc}", file=sys.stderr)
        return 1
    counts = payload["counts"]
    print(f"Session:         {payload['session_timestamp'] or '(unknown)'}")
    print(f"Half-cycles:     {payload['half_cycles']}")
    print(f"Voltage sags:    {counts['sag']}")
    print(f"Voltage surges:  {counts['surge']}")
    print(f"Interruptions:   {counts['interruption']}")
    print(f"Lowest RMS 1/2:  {payload['min_rms']:.3f} V ({payload['min_pu']:.3f} pu)")
    print(f"Highest RMS 1/2: {payload['max_rms']:.3f} V ({payload['max_pu']:.3f} pu)")
    for event in payload["events"]:
        print(f"  {event['kind']}  start half-cycle {event['start_half_cycle']}  "
              f"duration {event['duration_half_cycles']}  "
              f"extreme {event['extreme_pu']:.3f} pu")
    print(f"Report written to {payload['report_path']}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    thresholds = Thresholds.from_mapping(
        _config_values(args),
        sag_pu=args.sag_pu,
        surge_pu=args.surge_pu,
        interruption_pu=args.interruption_pu,
    )
    daemon = Daemon(
        resolve_data_dir(args.data_dir),
        cfg=_conversion_config(args),
        thresholds=thresholds,
    )
    ui_dir = args.ui_dir
    if ui_dir is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        ui_dir = bundled if bundled.is_dir() else None
    app = create_app(daemon, ui_dir=ui_dir)
    host, _, port = args.listen.rpartition(":")
    uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
    return 0


def _add_threshold_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--sag-pu", type=float, help="sag threshold, per unit")
    parser.add_argument("--surge-pu", type=float, help="surge threshold, per unit")
    parser.add_argument("--interruption-pu", type=float,
                        help="interruption threshold, per unit")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pq", description="Residential power-quality monitor toolkit"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("sim", help="run the waveform simulator")
    p_sim.add_argument("--listen", default="tcp:127.0.0.1:9600",
                       help="tcp:<host>:<port> to serve on (default %(default)s)")
    p_sim.add_argument("--rms", type=float, default=120.0,
                       help="fundamental RMS voltage (default %(default)s)")
    p_sim.add_argument("--harmonic", action="append", type=_parse_harmonic,
                       metavar="ORDER:AMP[:PHASE]",
                       help="add a harmonic, amplitude relative to the fundamental")
    p_sim.add_argument("--noise", type=float, default=0.0,
                       help="additive Gaussian noise sigma, volts")
    p_sim.add_argument("--sag", action="append", metavar="at=N,half_cycles=N,pu=X")
    p_sim.add_argument("--surge", action="append", metavar="at=N,half_cycles=N,pu=X")
    p_sim.add_argument("--interruption", action="append",
                       metavar="at=N,half_cycles=N,pu=X")
    p_sim.add_argument("--replay", help="stream a stored dataRaw.bin session instead")
    p_sim.add_argument("--readings", type=int,
                       help="stop each connection after this many readings")
    p_sim.add_argument("--no-pace", action="store_true",
                       help="emit as fast as possible (testing)")
    p_sim.add_argument("--seed", type=int, help="noise RNG seed")
    _add_config_flags(p_sim)
    p_sim.set_defaults(func=cmd_sim)

    p_cap = sub.add_parser("capture", help="ingest a stream into the data directory")
    p_cap.add_argument("--endpoint", help="tcp:<host>:<port> or serial:<device> "
                       "(default: PQ_ENDPOINT)")
    p_cap.add_argument("--baud", type=int, default=DEFAULT_BAUD)
    p_cap.add_argument("--data-dir", help="data directory (default: PQ_DATA_DIR)")
    p_cap.add_argument("--seconds", type=float, help="stop after this many seconds")
    p_cap.add_argument("--readings", type=int, help="stop after this many readings")
    p_cap.set_defaults(func=cmd_capture)

    p_an = sub.add_parser("analyze", help="VRMS / Vpeak / THD of stored cycles")
    p_an.add_argument("--cycles", default="6",
                      help="number of most recent cycles, or 'all' (default 6)")
    p_an.add_argument("--view", default="inst", choices=["inst", "rms"],
                      help="series kind used by --fft-out consumers")
    p_an.add_argument("--fft-out", help="write hz,magnitude CSV of the window")
    p_an.add_argument("--data-dir", help="data directory (default: PQ_DATA_DIR)")
    _add_config_flags(p_an)
    p_an.set_defaults(func=cmd_analyze)

    p_rep = sub.add_parser("report", help="disturbance report of a stored session")
    p_rep.add_argument("--session", default="latest",
                       help="session index or 'latest' (default)")
    p_rep.add_argument("--data-dir", help="data directory (default: PQ_DATA_DIR)")
    _add_config_flags(p_rep)
    _add_threshold_flags(p_rep)
    p_rep.set_defaults(func=cmd_report)

    p_srv = sub.add_parser("serve", help="run the HTTP/WS daemon")
    p_srv.add_argument("--listen", default="127.0.0.1:8600",
                       help="<host>:<port> for the API (default %(default)s)")
    p_srv.add_argument("--data-dir", help="data directory (default: PQ_DATA_DIR)")
    p_srv.add_argument("--ui-dir", help="directory with the built web UI")
    _add_config_flags(p_srv)
    _add_threshold_flags(p_srv)
    p_srv.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"pq {args.command}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line front end.

Exit codes: 0 success, 2 usage or configuration problem, 3 data problem,
4 transport problem. Every command is deterministic given its seed and
configuration in simulated modes.
"""

from __future__ import annotations

import argparse
import os
import sys

from . import codec, distill, latency, netspec
from .config import Config, load_config, reference_config_path
from .errors import (
    ArgumentError,
    CodecError,
    NoCrossoverError,
    ProtocolError,
    RangeError,
    ShapeError,
    TransportError,
)
from .pipeline import (
    gate_metrics,
    make_stream,
    run_session,
    serve,
)
from .pipeline import wire
from .tensor import Shape

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_TRANSPORT = 4


def _resolve_config(args) -> Config:
    path = getattr(args, "config", None) or os.environ.get("SPLITWIRE_CONFIG")
    if not path:
        path = reference_config_path()
    return load_config(path)


def _parse_rates_mbps(text: str) -> list[float]:
    """Accepts '0.5..10:0.5' (inclusive range) or a comma list like '1,2,5'."""
    if ".." in text:
        span, _, step_s = text.partition(":")
        if not step_s:
            raise ArgumentError(f"range rates need a step, e.g. 0.5..10:0.5 (got {text!r})")
        lo_s, _, hi_s = span.partition("..")
        lo, hi, step = float(lo_s), float(hi_s), float(step_s)
        if step <= 0 or hi < lo:
            raise ArgumentError(f"bad rate range {text!r}")
        rates = []
        k = 0
        while True:
            r = lo + k * step
            if r > hi + 1e-9:
                break
            rates.append(r)
            k += 1
        return rates
    rates = [float(tok) for tok in text.split(",") if tok.strip()]
    if not rates:
        raise ArgumentError("no rates given")
    if any(r <= 0 for r in rates):
        raise ArgumentError(f"rates must be positive Mbps values, got {text!r}")
    return rates


def _parse_chw(text: str) -> Shape:
    try:
        return Shape(int(tok) for tok in text.lower().split("x"))
    except (ValueError, ShapeError) as exc:
        raise ArgumentError(f"bad shape {text!r}, expected CxHxW: {exc}") from exc


def _parse_addr(text: str) -> tuple[str, int]:
    host, _, port_s = text.rpartition(":")
    if not host or not port_s.isdigit():
        raise ArgumentError(f"bad address {text!r}, expected HOST:PORT")
    return host, int(port_s)


# --- commands -----------------------------------------------------------------

def cmd_sweep(args) -> int:
    cfg = _resolve_config(args)
    rates = [r * 1e6 for r in _parse_rates_mbps(args.rates)]
    p_drop = args.p_drop if args.p_drop is not None else cfg.filter.analytic_drop_rate()
    rows = latency.sweep(cfg.profile, cfg.sizes, args.width, rates, p_drop,
                         cfg.channel.fixed_latency_s)
    latency.write_sweep_csv(rows, args.out)
    print(f"wrote {len(rows)} rows ({len(rates)} rates x "
          f"{len(latency.STRATEGIES)} strategies) to {args.out}")
    return EXIT_OK


def cmd_codec(args) -> int:
    msg = wire.load_message(args.infile)
    if args.action == "quantize":
        tensor = wire.message_to_tensor(msg)
        q = codec.quantize8(tensor) if args.width == 8 else codec.quantize16(tensor)
        wire.save_message(args.out, wire.quantized_to_message(q))
        report = codec.data_size(q, os.path.getsize(args.infile))
        err = max(abs(a - b) for a, b in
                  zip(codec.dequantize(q).tolist(), tensor.tolist()))
        print(f"payload_bytes: {report.payload_bytes}")
        print(f"header_bytes: {report.header_bytes}")
        print(f"total_bytes: {report.total_bytes}")
        print(f"ratio_vs_input_file: {report.ratio_vs_reference:.6f}")
        print(f"max_roundtrip_error: {err:.8g}")
        if q.width == 8:
            print(f"scale: {q.scale:.8g} zero_point: {q.zero_point}")
    else:
        q = wire.message_to_quantized(msg)
        tensor = codec.dequantize(q)
        wire.save_message(args.out, wire.tensor_to_message(tensor))
        print(f"dequantized {q.width}-bit tensor {tensor.shape} to {args.out}")
    return EXIT_OK


def cmd_netspec(args) -> int:
    if os.path.sep in args.spec or args.spec.endswith(".json"):
        net = netspec.load_spec_file(args.spec)
    else:
        cfg = _resolve_config(args)
        net = cfg.get_netspec(args.spec)
    in_shape = _parse_chw(args.input)
    tr = netspec.trace(net, in_shape)
    for i, (layer, shape) in enumerate(zip(net.layers, tr.layer_shapes)):
        mark = "  <- bottleneck" if layer.bottleneck else ""
        print(f"layer {i:2d} {layer.kind:<16} -> {shape}{mark}")
    print(f"params: {tr.param_count}")
    print(f"output: {tr.output_shape}")
    if tr.bottleneck_shape is not None:
        ratio = netspec.tensor_ratio(tr.bottleneck_shape, in_shape)
        print(f"bottleneck: {tr.bottleneck_shape}")
        print(f"bottleneck_ratio: {ratio:.4f}")
    return EXIT_OK


def cmd_distill(args) -> int:
    fx = distill.get_fixture(args.fixture, epochs=args.epochs, seed=args.seed)
    trained, history = distill.train_toy(fx.teacher, fx.student, fx.data, fx.cfg)
    distill.write_history_csv(history, args.out)
    width = fx.student.bottleneck_width
    bound = distill.eckart_young_bound(fx.teacher_matrix, fx.data, width)
    final = distill.evaluate_loss(fx.teacher, trained, fx.data)
    print(f"fixture: {fx.name} (bottleneck width {width})")
    print(f"epochs: {fx.cfg.epochs}")
    print(f"final_loss: {final:.8g}")
    print(f"oracle_bound: {bound:.8g}")
    print(f"history: {args.out}")
    return EXIT_OK


def cmd_filter_metrics(args) -> int:
    cfg = _resolve_config(args)
    seed = args.seed if args.seed is not None else cfg.seed
    gm = gate_metrics(cfg.filter, args.n, seed)
    print(f"n: {gm.n}")
    print(f"drop_rate: {gm.drop_rate:.6f}")
    print(f"recall_nonempty: {gm.recall_nonempty:.6f}")
    print(f"false_negative_rate: {gm.false_negative_rate:.6f}")
    print(f"empirical_auc: {gm.empirical_auc:.6f}")
    return EXIT_OK


def cmd_serve(args) -> int:
    cfg = _resolve_config(args)
    host, port = _parse_addr(args.addr)
    serve(host, port, cfg.profile, tail_mode=args.tail_mode,
          idle_timeout_s=args.idle_timeout)
    return EXIT_OK


def cmd_client(args) -> int:
    cfg = _resolve_config(args)
    if args.n < 1:
        raise ArgumentError(f"--n must be >= 1, got {args.n}")
    shape = _parse_chw(args.shape)
    seed = args.seed if args.seed is not None else cfg.seed
    images = make_stream(args.n, shape, cfg.filter.p_empty, seed)
    addr = _parse_addr(args.addr) if args.mode == "socket" else None
    log = run_session(images, cfg.profile, cfg.channel, cfg.filter,
                      mode=args.mode, seed=seed, width=args.width,
                      server_addr=addr)
    log.to_csv(args.out)
    print(f"{len(log.records)} images, {log.total_bytes} bytes sent, "
          f"drop rate {log.drop_rate:.3f}, mean total {log.mean_total:.6f} s")
    print(f"log: {args.out}")
    return EXIT_OK


# --- parser -------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="splitwire",
        description="Split-computing toolkit: delay sweeps, bottleneck codec, "
                    "layer-spec traces, toy distillation, loopback pipeline.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_config(p):
        p.add_argument("--config", help="config JSON (default: $SPLITWIRE_CONFIG, "
                                        "then the shipped reference profile)")

    p = sub.add_parser("sweep", help="delay and gain table over data rates")
    add_config(p)
    p.add_argument("--rates", required=True,
                   help="Mbps list '1,2,5' or range '0.5..10:0.5'")
    p.add_argument("--width", type=int, choices=(8, 16, 32), default=8)
    p.add_argument("--p-drop", type=float, default=None,
                   help="prefilter drop probability for SCNF "
                        "(default: analytic rate from the config filter model)")
    p.add_argument("--out", required=True, help="output CSV path")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("codec", help="quantize or dequantize a tensor file")
    p.add_argument("action", choices=("quantize", "dequantize"))
    p.add_argument("--in", dest="infile", required=True,
                   help="input wire-message file")
    p.add_argument("--out", required=True, help="output wire-message file")
    p.add_argument("--width", type=int, choices=(8, 16), default=8)
    p.set_defaults(func=cmd_codec)

    p = sub.add_parser("netspec", help="trace shapes and parameters of a layer spec")
    add_config(p)
    p.add_argument("--spec", required=True, help="built-in name or JSON path")
    p.add_argument("--input", required=True, help="input shape CxHxW")
    p.set_defaults(func=cmd_netspec)

    p = sub.add_parser("distill", help="train a toy bottleneck student")
    p.add_argument("--fixture", required=True,
                   help=f"one of {', '.join(distill.fixture_names())}")
    p.add_argument("--epochs", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="loss-history CSV path")
    p.set_defaults(func=cmd_distill)

    p = sub.add_parser("filter-metrics", help="Monte Carlo prefilter statistics")
    add_config(p)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_filter_metrics)

    p = sub.add_parser("serve", help="run the tail-side server (blocking)")
    add_config(p)
    p.add_argument("--addr", required=True, help="bind address HOST:PORT")
    p.add_argument("--tail-mode", choices=("virtual", "sleep"), default="virtual")
    p.add_argument("--idle-timeout", type=float, default=None)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("client", help="run a head-side session and write its log")
    add_config(p)
    p.add_argument("--addr", default="127.0.0.1:7925", help="server HOST:PORT")
    p.add_argument("--mode", choices=("simulated", "socket"), default="socket")
    p.add_argument("--n", type=int, required=True, help="number of images")
    p.add_argument("--shape", default="3x64x64", help="bottleneck tensor shape CxHxW")
    p.add_argument("--width", type=int, choices=(8, 16, 32), default=8)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", required=True, help="session-log CSV path")
    p.set_defaults(func=cmd_client)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ArgumentError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ShapeError, RangeError, CodecError, ProtocolError,
            NoCrossoverError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except TransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_TRANSPORT


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

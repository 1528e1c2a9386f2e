"""``uasw`` command line: simulate, detect, train, classify, replay, bench.

Structured outputs are one JSON object per line. Exit status is 0 on
success, 1 on usage errors and 2 when a stage fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import datastore
from .bench import format_table, run_bench
from .classifier import (
    DEFAULT_HIDDEN,
    TrainConfig,
    head_accuracy,
    macro_f1,
    label_targets,
    load_model,
    save_model,
    train,
)
from .detector import DetectorParams
from .pipeline import calibrate
from .radar_sim import simulate_session
from .scenario import load_scenario
from .session import Detection, SessionState, Tick, parse_events, power_estimate, step
from .stream import StreamProcessor

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _emit(record: dict, out):
    out.write(json.dumps(record, sort_keys=True) + "\n")


def _verdict_record(res) -> dict:
    v = res.verdict
    return {
        "seq": res.last_seq,
        "timestamp_ms": res.timestamp_ms,
        "detected": v.detected,
        "trigger_bin": v.trigger_bin,
        "sigma": v.sigma,
        "range_cm": v.range_estimate_cm,
    }


def _processor(log, model=None, gamma=None, ensemble=False):
    calib = calibrate(log.frames[: log.config.n_cirs_in_cpi], log.config)
    params = None if gamma is None else DetectorParams(gamma=gamma)
    return calib, StreamProcessor(calib, model, params, log.config, ensemble)


def cmd_sim(args, out):
    scenario = load_scenario(args.scenario, seed=args.seed)
    duration = args.duration_ms if args.duration_ms is not None else scenario.duration_ms
    frames = list(simulate_session(scenario.timeline, duration_ms=duration, seed=args.seed))
    datastore.write_log(datastore.CirLog(frames=frames, scale=args.scale), args.out)
    _emit({"frames": len(frames), "out": str(args.out)}, out)


def cmd_calibrate(args, out):
    log = datastore.read_log(args.log)
    res = calibrate(log.frames[: args.cirs or len(log.frames)], log.config)
    _emit({"b0_index": res.b0_index, "confidence": res.confidence}, out)


def cmd_detect(args, out):
    log = datastore.read_log(args.log)
    _, proc = _processor(log, gamma=args.gamma)
    for res in proc.run(log.frames):
        if res.verdict.detected or not args.only_detections:
            _emit(_verdict_record(res), out)


def cmd_corpus(args, out):
    spec = datastore.CorpusSpec(per_combination=args.per_combination)
    outdir = Path(args.out)
    outdir.mkdir(parents=True, exist_ok=True)
    for i, (log, anns) in enumerate(datastore.generate_corpus(spec, seed=args.seed)):
        lab = anns[0].label
        stem = f"{i:02d}_{lab.material}_{lab.surface}_{lab.movement}"
        datastore.write_log(log, outdir / f"{stem}.uaswcir")
        datastore.write_annotations(anns, outdir / f"{stem}.ann")
    _emit({"logs": 16, "samples": 16 * args.per_combination, "out": str(outdir)}, out)


def load_corpus_dir(path):
    logs = []
    for log_path in sorted(Path(path).glob("*.uaswcir")):
        ann_path = log_path.with_suffix(".ann")
        if not ann_path.exists():
            raise FileNotFoundError(f"missing annotations {ann_path}")
        logs.append((datastore.read_log(log_path), datastore.read_annotations(ann_path)))
    if not logs:
        raise FileNotFoundError(f"no .uaswcir logs in {path}")
    return logs


def cmd_train(args, out):
    ds = datastore.build_dataset(load_corpus_dir(args.corpus), seed=args.seed)
    hidden = tuple(int(h) for h in args.hidden.split(",") if h) if args.hidden else ()
    cfg = TrainConfig(max_epochs=args.epochs, seed=args.seed)
    xt, yt = ds.split("train")
    xv, yv = ds.split("val")
    model, hist = train(xt, yt, xv, yv, hidden, cfg)
    save_model(model, args.out)
    xs, ys = ds.split("test")
    acc = head_accuracy(model, xs, label_targets(ys))
    history = {
        "hidden": list(hidden),
        "best_epoch": hist.best_epoch,
        "train_loss": hist.train_loss,
        "val_loss": hist.val_loss,
        "val_accuracy": [list(a) for a in hist.val_accuracy],
        "test_accuracy": dict(zip(("material", "surface", "movement"), acc)),
        "test_macro_f1": dict(zip(("material", "surface", "movement"), macro_f1(model, xs, label_targets(ys)))),
    }
    Path(str(args.out) + ".history.json").write_text(json.dumps(history, indent=1))
    _emit({"model": str(args.out), "best_epoch": hist.best_epoch, **history["test_accuracy"]}, out)


def cmd_classify(args, out):
    log = datastore.read_log(args.log)
    model = load_model(args.model)
    _, proc = _processor(log, model, ensemble=args.ensemble)
    for res in proc.run(log.frames):
        if res.label is None:
            continue
        rec = _verdict_record(res)
        rec.update(res.label._asdict())
        rec["confidence"] = list(res.classification.confidence)
        _emit(rec, out)


def cmd_replay(args, out):
    log = datastore.read_log(args.log)
    model = load_model(args.model) if args.model else None
    events = parse_events(Path(args.events).read_text())
    _, proc = _processor(log, model, ensemble=args.ensemble)
    state = SessionState()
    was_active = False
    ei = 0

    def feed(inp):
        nonlocal state
        state, actions = step(state, inp)
        for a in actions:
            if hasattr(a, "to_record"):
                _emit(a.to_record(), out)

    for frame in log.frames:
        while ei < len(events) and events[ei].timestamp_ms <= frame.timestamp_ms:
            feed(events[ei])
            ei += 1
        if not state.radar_active:
            was_active = False
            feed(Tick(frame.timestamp_ms))
            continue
        if not was_active:
            proc.reset()
            was_active = True
        res = proc.push(frame)
        feed(Tick(frame.timestamp_ms) if res is None else Detection(res.timestamp_ms, res.verdict, res.label))
    for ev in events[ei:]:
        feed(ev)
    if state.elapsed_ms > 0:
        print(
            f"session {state.elapsed_ms:g} ms, radar active {state.accumulated_active_ms:g} ms, "
            f"average current {power_estimate(state):.2f} mA",
            file=sys.stderr,
        )


def cmd_bench(args, out):
    log = datastore.read_log(args.log)
    model = load_model(args.model)
    calib = calibrate(log.frames[: log.config.n_cirs_in_cpi], log.config)
    stats, _ = run_bench(log.frames, calib, model, args.iters, log.config)
    out.write(format_table(stats) + "\n")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="uasw", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    s = sub.add_parser("sim", help="simulate a scenario into a CIR log")
    s.add_argument("--scenario", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--duration-ms", type=float)
    s.add_argument("--scale", type=float, default=1.0, help="fixed-point tap scale")
    s.set_defaults(func=cmd_sim)

    s = sub.add_parser("calibrate", help="locate the zero-range bin of a log")
    s.add_argument("--log", required=True)
    s.add_argument("--cirs", type=int, help="calibrate on the first CIRS records only")
    s.set_defaults(func=cmd_calibrate)

    s = sub.add_parser("detect", help="stream detector verdicts for a log")
    s.add_argument("--log", required=True)
    s.add_argument("--gamma", type=float)
    s.add_argument("--only-detections", action="store_true")
    s.set_defaults(func=cmd_detect)

    s = sub.add_parser("corpus", help="write a synthetic labelled corpus directory")
    s.add_argument("--out", required=True)
    s.add_argument("--per-combination", type=int, default=100)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_corpus)

    s = sub.add_parser("train", help="train the obstacle classifier on a corpus directory")
    s.add_argument("--corpus", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--hidden", default=",".join(map(str, DEFAULT_HIDDEN)),
                   help="comma-separated hidden widths; empty for no hidden layer")
    s.add_argument("--epochs", type=int, default=TrainConfig.max_epochs)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_train)

    s = sub.add_parser("classify", help="stream labels for detected buffers")
    s.add_argument("--log", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--ensemble", action="store_true")
    s.set_defaults(func=cmd_classify)

    s = sub.add_parser("replay", help="run the full session over a log and an event script")
    s.add_argument("--log", required=True)
    s.add_argument("--events", required=True)
    s.add_argument("--model")
    s.add_argument("--ensemble", action="store_true")
    s.set_defaults(func=cmd_replay)

    s = sub.add_parser("bench", help="per-stage compute latency")
    s.add_argument("--log", required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--iters", type=int, default=1000)
    s.set_defaults(func=cmd_bench)
    return p


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        args.func(args, out)
    except (ValueError, OSError, OverflowError) as exc:
        print(f"uasw {args.command}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def main_exit():
    sys.exit(main())


if __name__ == "__main__":
    main_exit()

"""Command-line entry points: train, rollout, bench, stability, gen-data,
serve.  Exit status 0 on success, 1 on domain errors, 2 on usage errors."""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from .errors import PnpfError

__all__ = ["main", "build_parser"]


def _parse_vector(text: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in text.split(",")], dtype=float)
    except ValueError as e:
        raise PnpfError(f"bad vector '{text}': comma-separated floats expected") from e


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pnpf", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train a model bundle from a task file")
    t.add_argument("--task", required=True, help="task JSON file")
    t.add_argument("--out", required=True, help="output bundle path")
    t.add_argument("--seed", type=int, default=None)
    t.add_argument("--config", help="RunConfig JSON with pipeline overrides")

    r = sub.add_parser("rollout", help="run the controller from a bundle")
    r.add_argument("--model", required=True, help="model bundle path")
    r.add_argument("--start", required=True, help="start state, e.g. '0.1,0.2'")
    r.add_argument("--phase", type=float, default=None,
                   help="initial phase (default: s0, periodic: s_period)")
    r.add_argument("--horizon", type=int, default=5000)
    r.add_argument("--goal", default=None, help="goal state 'x,y,...'")
    r.add_argument("--goal-strength", type=float, default=1.0)
    r.add_argument("--schedule", default=None,
                   help="perturbation schedule JSON: [[step, kind, payload], ...]")
    r.add_argument("--out-csv", default=None)
    r.add_argument("--out-jsonl", default=None)
    r.add_argument("--plot", default=None, help="SVG trace plot path")
    r.add_argument("--seed", type=int, default=0)

    b = sub.add_parser("bench", help="leave-one-out benchmark from a RunConfig")
    b.add_argument("--config", required=True, help="RunConfig JSON")
    b.add_argument("--out", required=True, help="report JSON path")
    b.add_argument("--out-csv", default=None, help="per-cell CSV path")

    s = sub.add_parser("stability", help="perturbed-start stability sweep")
    s.add_argument("--model", required=True)
    s.add_argument("--out", required=True, help="sweep record JSON path")
    s.add_argument("--phases", type=int, default=100)
    s.add_argument("--samples", type=int, default=200)
    s.add_argument("--horizon", type=int, default=100)
    s.add_argument("--safeguard", action="store_true")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--plot", default=None, help="per-phase success SVG path")

    g = sub.add_parser("gen-data", help="synthesize a dataset file")
    g.add_argument("--shape", required=True,
                   help="figure-eight | double-knot-like | pulley-like | "
                        "periodic-eight | lasa:<name>")
    g.add_argument("--out", required=True)
    g.add_argument("--demos", type=int, default=None)
    g.add_argument("--noise", type=float, default=None)
    g.add_argument("--seed", type=int, default=0)

    v = sub.add_parser("serve", help="run the streaming session service")
    v.add_argument("--model", required=True)
    v.add_argument("--port", type=int, default=None)
    v.add_argument("--tick-rate", type=float, default=50.0)
    return p


def _cmd_train(args) -> int:
    from .bundle import save_model
    from .config import load_run_config
    from .datasets import load_task
    from .pipeline import PipelineConfig, train_pipeline

    cfg = load_run_config(args.config).pipeline if args.config else PipelineConfig()
    if args.seed is not None:
        cfg = PipelineConfig(**{**cfg.__dict__, "seed": args.seed})
    task = load_task(args.task)
    model = train_pipeline(task, cfg)
    save_model(model, args.out)
    print(f"wrote {args.out} (mode={model.mode}, s0={model.s0:.4g})")
    return 0


def _cmd_rollout(args) -> int:
    from .bundle import load_model
    from .controller import ControllerConfig, PerturbationSchedule, rollout
    from .potential import PotentialParams

    model = load_model(args.model)
    start = _parse_vector(args.start)
    s_init = args.phase
    if s_init is None:
        s_init = model.s_period if model.mode == "periodic" else model.s0
    goal = None
    if args.goal is not None:
        goal = (tuple(_parse_vector(args.goal)), args.goal_strength)
    params = PotentialParams(alpha=model.alpha, goal=goal,
                             goal_threshold=0.02 * model.s0 if goal else 0.0)
    schedule = PerturbationSchedule()
    if args.schedule:
        with open(args.schedule) as f:
            items = json.load(f)
        schedule = PerturbationSchedule(tuple(
            (int(i), str(k), p) for i, k, p in items))
    tr = rollout(start, float(s_init), model, params, args.horizon,
                 schedule=schedule,
                 cfg=ControllerConfig(seed=args.seed))
    if args.out_csv:
        tr.to_csv(args.out_csv)
    if args.out_jsonl:
        tr.to_jsonl(args.out_jsonl)
    if args.plot:
        from .plots import trace_svg
        trace_svg(tr, model, args.plot)
    print(f"steps={len(tr.s) - 1} final_s={tr.s[-1]:.6g} "
          f"terminated={tr.terminated}")
    return 0


def _cmd_bench(args) -> int:
    from .config import load_run_config, make_task
    from .evalbench import run_benchmark

    cfg = load_run_config(args.config)
    task = make_task(cfg)
    rep = run_benchmark(task, n_seeds=len(cfg.seeds),
                        success_radius=cfg.success_radius,
                        pipeline_config=cfg.pipeline)
    rep.to_json(args.out)
    if args.out_csv:
        rep.to_csv(args.out_csv)
    agg = rep.aggregate
    print(f"cells={agg['n_cells']} failed={agg['n_failed']} "
          f"dtwd={agg['dtwd']} accuracy={agg['accuracy']}")
    return 0


def _cmd_stability(args) -> int:
    from .bundle import load_model
    from .evalbench import stability_sweep

    model = load_model(args.model)
    res = stability_sweep(model, n_phases=args.phases, n_samples=args.samples,
                          horizon=args.horizon, safeguard=args.safeguard,
                          seed=args.seed)
    with open(args.out, "w") as f:
        json.dump(res, f, indent=2, sort_keys=True)
    if args.plot:
        from .plots import sweep_svg
        sweep_svg(res, args.plot)
    print(f"success_fraction={res['success_fraction']:.4f} "
          f"failures={len(res['failures'])}")
    return 0


def _cmd_gen_data(args) -> int:
    from .datasets import (gen_intersecting_task, gen_periodic_eight,
                           lasa_shape_path, load_lasa, save_task)

    kw = {}
    if args.demos is not None:
        kw["n_demos"] = args.demos
    if args.noise is not None:
        kw["noise_scale"] = args.noise
    if args.shape == "periodic-eight":
        task = gen_periodic_eight(seed=args.seed, **kw)
    elif args.shape.startswith("lasa:"):
        task = load_lasa(lasa_shape_path(args.shape.split(":", 1)[1]))
    else:
        task = gen_intersecting_task(args.shape, seed=args.seed, **kw)
    save_task(task, args.out)
    print(f"wrote {args.out} ({task.name}, {len(task.demos)} demos)")
    return 0


def _cmd_serve(args) -> int:  # pragma: no cover - long-running entry point
    from .bundle import load_model
    from .config import DEFAULT_PORT
    from .service import serve

    model = load_model(args.model)
    port = args.port if args.port is not None else DEFAULT_PORT
    print(f"serving {args.model} on port {port} at {args.tick_rate} Hz")
    serve(model, port, tick_rate=args.tick_rate)
    return 0


_COMMANDS = {
    "train": _cmd_train,
    "rollout": _cmd_rollout,
    "bench": _cmd_bench,
    "stability": _cmd_stability,
    "gen-data": _cmd_gen_data,
    "serve": _cmd_serve,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (PnpfError, ValueError) as e:
        print(f"error {type(e).__name__}: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error {type(e).__name__}: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Command line entry points.

    robomap serve    --port 8000 --provider mock --scenario FILE [--map FILE] [--data DIR]
    robomap replay   --log FILE
    robomap render   --draw FILE --out FILE.svg [--map FILE]
    robomap compile  --steps FILE --wake WORD
    robomap simulate --program FILE --events FILE [--map FILE]

The live provider reads PROVIDER_URL, PROVIDER_KEY, PROVIDER_MODEL and
PROVIDER_TEMPERATURE (default 0) from the environment.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import draw as draw_engine
from .compiler import compile_step_texts, parse_ir, serialize_ir, validate_robot_program
from .dialogue import HttpProvider
from .domain import DrawConfig, DrawMode
from .gateway import Gateway, create_app, load_scenario, replay_session
from .sim import default_map, execute, load_events, load_map_file, trace_to_jsonl


def _load_map(path: str | None):
    return load_map_file(path) if path else default_map()


def _cmd_serve(args) -> int:
    import uvicorn

    geometry = _load_map(args.map)
    if args.provider == "mock":
        if not args.scenario:
            print("serve --provider mock needs --scenario FILE", file=sys.stderr)
            return 2
        scenario = load_scenario(args.scenario)
        factory = scenario.provider
    else:
        url = os.environ.get("PROVIDER_URL", "")
        if not url:
            print("serve --provider http needs PROVIDER_URL in the environment", file=sys.stderr)
            return 2
        temperature = float(os.environ.get("PROVIDER_TEMPERATURE", "0"))
        factory = lambda: HttpProvider(  # noqa: E731
            url,
            api_key=os.environ.get("PROVIDER_KEY", ""),
            model=os.environ.get("PROVIDER_MODEL", ""),
            temperature=temperature,
        )
    gateway = Gateway(factory, geometry=geometry, data_dir=args.data)
    app = create_app(gateway)
    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def _cmd_replay(args) -> int:
    state = replay_session(args.log)
    print(json.dumps(state.to_wire(), indent=2, sort_keys=True))
    return 0


def _cmd_render(args) -> int:
    with open(args.draw, encoding="utf-8") as fh:
        text = fh.read()
    errors = draw_engine.lint_script(text)
    if errors:
        for err in errors:
            print(str(err), file=sys.stderr)
        return 1
    program, _ = draw_engine.parse_draw_script(text)
    program, config = draw_engine.apply_draw_rules(
        DrawMode.NONE, None, (program, DrawConfig(DrawMode.NONE))
    )
    frame = draw_engine.compile_frames(program, config)[0]
    svg = draw_engine.render_svg(frame, _load_map(args.map))
    with open(args.out, "w", encoding="utf-8") as fh:
        fh.write(svg)
    print(f"wrote {args.out}")
    return 0


def _cmd_compile(args) -> int:
    with open(args.steps, encoding="utf-8") as fh:
        texts = [line.strip() for line in fh if line.strip()]
    program = compile_step_texts(texts, args.wake)
    problems = validate_robot_program(program)
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return 1
    sys.stdout.write(serialize_ir(program))
    return 0


def _cmd_simulate(args) -> int:
    with open(args.program, encoding="utf-8") as fh:
        program = parse_ir(fh.read())
    with open(args.events, encoding="utf-8") as fh:
        events = load_events(json.load(fh))
    trace = execute(program, _load_map(args.map), events)
    sys.stdout.write(trace_to_jsonl(trace))
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="robomap", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("serve", help="run the WebSocket session gateway")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--provider", choices=["mock", "http"], default="mock")
    p.add_argument("--scenario", help="scenario file for the mock provider")
    p.add_argument("--map", help="map file (defaults to the bundled office map)")
    p.add_argument("--data", help="directory for session JSONL logs")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("replay", help="rebuild a session from its JSONL log")
    p.add_argument("--log", required=True)
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("render", help="render a draw script to SVG")
    p.add_argument("--draw", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--map")
    p.set_defaults(func=_cmd_render)

    p = sub.add_parser("compile", help="compile task steps to program IR")
    p.add_argument("--steps", required=True)
    p.add_argument("--wake", help="wake word (optional if the steps start with one)")
    p.set_defaults(func=_cmd_compile)

    p = sub.add_parser("simulate", help="run a program IR against an event script")
    p.add_argument("--program", required=True)
    p.add_argument("--events", required=True)
    p.add_argument("--map")
    p.set_defaults(func=_cmd_simulate)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())

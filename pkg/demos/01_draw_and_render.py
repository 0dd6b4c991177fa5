"""Drawing pipeline walkthrough: parse two revisions of a task drawing, diff
them, compile the fade animation, and render frames to SVG files.

    python demos/01_draw_and_render.py [outdir]
"""

import sys
from pathlib import Path

from robomap.domain import DrawConfig, DrawMode, SequenceItem
from robomap.draw import (
    apply_draw_rules,
    compile_frames,
    parse_draw_script,
    render_svg,
)
from robomap.sim import default_map

BEFORE = """
mark("Starting point", "white", "wakeup", 1)
link("Starting point", "Reception area", "green", "solid", "lead visitor to reception", 2)
mark("Reception area", "green", "2", 2)
link("Reception area", "Creation studio", "pink", "solid", "tour creation studio", 3)
mark("Creation studio", "pink", "3", 3)
"""

AFTER = """
mark("Starting point", "white", "wakeup", 1)
link("Starting point", "Reception area", "green", "solid", "lead visitor to reception", 2)
mark("Reception area", "green", "2", 2)
link("Reception area", "Living room", "red", "solid", "rest in living room", 3)
mark("Living room", "red", "3", 3)
"""


def main():
    outdir = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
    outdir.mkdir(exist_ok=True)
    geometry = default_map()

    before, errors = parse_draw_script(BEFORE)
    assert not errors, errors
    after, errors = parse_draw_script(AFTER)
    assert not errors, errors

    config = DrawConfig(
        DrawMode.FEEDBACK,
        (
            SequenceItem("1", "start with keyword visitor reception"),
            SequenceItem("2", "go to Reception area"),
            SequenceItem("3", "go to Living room"),
        ),
    )
    program, config = apply_draw_rules(
        DrawMode.FEEDBACK, (before, DrawConfig(DrawMode.FEEDBACK)), (after, config)
    )
    print("diffed elements:")
    for cmd in program:
        print(f"  {cmd.feedback.value:4s}  {cmd}")
    print("flagged steps:", [item.seq for item in config.sequence if item.feedback])

    frames = compile_frames(program, config)
    print(f"{len(frames)} animation frames over {frames[-1].t} ms")
    for frame in frames:
        path = outdir / f"fade_{frame.t:04d}ms.svg"
        path.write_text(render_svg(frame, geometry), encoding="utf-8")
        print("wrote", path)


if __name__ == "__main__":
    main()

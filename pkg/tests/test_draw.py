import random
from dataclasses import replace

import pytest

from robomap.draw import (
    SeqMismatch,
    apply_draw_rules,
    compile_frames,
    diff_programs,
    element_key,
    frames_to_wire,
    key_str,
    lint_script,
    parse_draw_script,
    render_svg,
    serialize_draw_script,
    validate_program,
)
from robomap.domain import (
    Color,
    DrawConfig,
    DrawMode,
    FeedbackType,
    Icon,
    LineType,
    Link,
    Location,
    Mark,
    MarkContent,
    SequenceItem,
)
from robomap.sim import default_map

from corpus import MALFORMED_SCRIPTS
from generators import mutate_draw_program, random_draw_program


def mk(loc=Location.RECEPTION_AREA, color=Color.GREEN, content=1, seq=1, fb=FeedbackType.NONE):
    content = MarkContent.step(content) if isinstance(content, int) else MarkContent.of_icon(content)
    return Mark(loc, color, content, seq, fb)


def ln(
    src=Location.RECEPTION_AREA,
    dst=Location.MEETING_ROOM,
    color=Color.GREEN,
    lt=LineType.SOLID,
    label="go",
    seq=1,
    fb=FeedbackType.NONE,
):
    return Link(src, dst, color, lt, label, seq, fb)


class TestParser:
    def test_mark_call(self):
        program, errors = parse_draw_script('mark("Reception area","green","1",1,"add")')
        assert errors == []
        assert program == [
            Mark(Location.RECEPTION_AREA, Color.GREEN, MarkContent.step(1), 1, FeedbackType.ADD)
        ]

    def test_link_defaults_feedback_none(self):
        program, errors = parse_draw_script(
            'link("Reception area","Work exhibition area","green","solid","guide visitor",2)'
        )
        assert errors == []
        (cmd,) = program
        assert cmd.feedback is FeedbackType.NONE
        assert cmd.dst is Location.WORK_EXHIBITION_AREA

    def test_unknown_function(self):
        program, errors = parse_draw_script('circle("Pantry")')
        assert program == []
        assert [e.code for e in errors] == ["unknown-function"]

    def test_comments_and_semicolons_ignored(self):
        text = """
        // leading comment
        mark("Pantry", "red", "speak", 3); /* block
        comment */ mark("Gym", "blue", "2", 2)
        """
        program, errors = parse_draw_script(text)
        assert errors == []
        assert len(program) == 2

    def test_icon_contents(self):
        program, errors = parse_draw_script('mark("Starting point","white","wakeup",1)')
        assert errors == []
        assert program[0].content == MarkContent.of_icon(Icon.WAKEUP)

    def test_bare_number_anim_seq_and_quoted(self):
        p1, e1 = parse_draw_script('mark("Gym","blue","1",4)')
        p2, e2 = parse_draw_script('mark("Gym","blue","1","4")')
        assert e1 == e2 == []
        assert p1 == p2

    @pytest.mark.parametrize("text,line,code", MALFORMED_SCRIPTS)
    def test_malformed_corpus_line_accurate(self, text, line, code):
        _, errors = parse_draw_script(text)
        assert errors, f"expected errors for {text!r}"
        assert (errors[0].line, errors[0].code) == (line, code)

    def test_error_recovery_keeps_good_statements(self):
        text = 'mark("Pantry","green","1",1)\nbogus junk\nmark("Gym","blue","2",2)'
        program, errors = parse_draw_script(text)
        assert len(program) == 2
        assert any(e.line == 2 for e in errors)

    def test_round_trip_random_programs(self):
        rng = random.Random(20240117)
        for _ in range(300):
            program = random_draw_program(rng)
            text = serialize_draw_script(program)
            parsed, errors = parse_draw_script(text)
            assert errors == []
            assert parsed == program

    def test_parser_survives_garbage(self):
        rng = random.Random(606)
        alphabet = 'mark link ( ) , ; " \' 1 somewhere // /* */ \n \\ green x'
        pieces = alphabet.split(" ")
        for _ in range(300):
            text = "".join(rng.choice(pieces) for _ in range(rng.randint(0, 60)))
            program, errors = parse_draw_script(text)  # must terminate, never raise
            assert isinstance(program, list) and isinstance(errors, list)


class TestValidate:
    def test_duplicate_key(self):
        program = [mk(seq=1), mk(seq=2)]  # same location+content
        errors = validate_program(program)
        assert [e.code for e in errors] == ["duplicate-key"]

    def test_dashed_unconditional_rejected(self):
        program = [
            ln(Location.MEETING_ROOM, Location.PANTRY, lt=LineType.DASHED, label="then go to pantry")
        ]
        assert [e.code for e in validate_program(program)] == ["dashed-misuse"]

    def test_dashed_somewhere_ok(self):
        program = [ln(Location.SOMEWHERE, Location.LEADERS_OFFICE, lt=LineType.DASHED, label="go")]
        assert validate_program(program) == []

    def test_dashed_conditional_label_ok(self):
        program = [ln(lt=LineType.DASHED, label="if the employee is not ready")]
        assert validate_program(program) == []

    def test_lint_maps_validation_to_lines(self):
        text = 'mark("Pantry","green","1",1)\nmark("Pantry","blue","1",5)'
        errors = lint_script(text)
        assert [(e.code, e.line) for e in errors] == [("duplicate-key", 2)]

    def test_key_identity_ignores_styling(self):
        a = mk(color=Color.GREEN, seq=1)
        b = replace(a, color=Color.RED, anim_seq=7)
        assert element_key(a) == element_key(b)
        solid = ln(label="x")
        dashed = replace(solid, line_type=LineType.DASHED)
        assert element_key(solid) == element_key(dashed)

    def test_link_direction_matters(self):
        fwd = ln(Location.GYM, Location.PANTRY, label="x")
        rev = ln(Location.PANTRY, Location.GYM, label="x")
        assert element_key(fwd) != element_key(rev)


class TestDiff:
    def test_identity(self):
        program = [mk(), ln()]
        out = diff_programs(program, program)
        assert all(c.feedback is FeedbackType.NONE for c in out)
        assert len(out) == 2

    def test_add_and_del(self):
        a, b, c = mk(content=1), mk(Location.GYM, content=2), mk(Location.PANTRY, content=3)
        out = diff_programs([a, b], [a, c])
        by_key = {element_key(x): x.feedback for x in out}
        assert by_key[element_key(a)] is FeedbackType.NONE
        assert by_key[element_key(b)] is FeedbackType.DEL
        assert by_key[element_key(c)] is FeedbackType.ADD

    def test_first_draw_all_add(self):
        program = [mk(), ln()]
        out = diff_programs([], program)
        assert all(c.feedback is FeedbackType.ADD for c in out)

    def test_all_del(self):
        program = [mk(), ln()]
        out = diff_programs(program, [])
        assert all(c.feedback is FeedbackType.DEL for c in out)

    def test_matches_key_set_oracle(self):
        rng = random.Random(7321)
        for _ in range(300):
            old = random_draw_program(rng)
            new = mutate_draw_program(rng, old)
            out = diff_programs(old, new)
            old_keys = {element_key(c) for c in old}
            new_keys = {element_key(c) for c in new}
            got = {
                fb: {element_key(c) for c in out if c.feedback is fb}
                for fb in FeedbackType
            }
            assert got[FeedbackType.NONE] == old_keys & new_keys
            assert got[FeedbackType.DEL] == old_keys - new_keys
            assert got[FeedbackType.ADD] == new_keys - old_keys
            # symmetric law: adds of (p,q) are the dels of (q,p)
            back = diff_programs(new, old)
            assert got[FeedbackType.ADD] == {
                element_key(c) for c in back if c.feedback is FeedbackType.DEL
            }
            # order: unchanged block, then deletions, then additions
            kinds = [c.feedback for c in out]
            boundary = [k.value for k in kinds]
            assert boundary == sorted(
                boundary, key=lambda v: {"none": 0, "del": 1, "add": 2}[v]
            )

    def test_unchanged_elements_keep_new_styling(self):
        a = mk(color=Color.GREEN, seq=1)
        recolored = replace(a, color=Color.RED, anim_seq=4)
        out = diff_programs([a], [recolored])
        (got,) = out
        assert got.feedback is FeedbackType.NONE
        assert got.color is Color.RED and got.anim_seq == 4


def _cfg(mode, *items):
    return DrawConfig(mode, tuple(items))


class TestApplyDrawRules:
    def test_none_strips_everything(self):
        program = [mk(fb=FeedbackType.ADD), ln(fb=FeedbackType.DEL)]
        cfg = _cfg(DrawMode.NONE, SequenceItem("1", "step", True))
        out_prog, out_cfg = apply_draw_rules(DrawMode.NONE, None, (program, cfg))
        assert all(c.feedback is FeedbackType.NONE for c in out_prog)
        assert out_cfg.mode is DrawMode.NONE
        assert all(not item.feedback for item in out_cfg.sequence)

    def test_confirm_removes_del_elements(self):
        last_prog = [mk(fb=FeedbackType.NONE), ln(fb=FeedbackType.DEL), mk(Location.GYM, content=2, fb=FeedbackType.ADD)]
        last = (last_prog, _cfg(DrawMode.FEEDBACK))
        cand_cfg = _cfg(DrawMode.CONFIRM, SequenceItem("1", "Step one", False))
        out_prog, out_cfg = apply_draw_rules(DrawMode.CONFIRM, last, ([], cand_cfg))
        keys = {element_key(c) for c in out_prog}
        assert element_key(last_prog[1]) not in keys
        assert all(c.feedback is FeedbackType.NONE for c in out_prog)
        assert out_cfg.mode is DrawMode.CONFIRM
        assert [i.text for i in out_cfg.sequence] == ["Step one"]

    def test_confirm_without_last_is_empty(self):
        out_prog, out_cfg = apply_draw_rules(
            DrawMode.CONFIRM, None, ([mk()], _cfg(DrawMode.CONFIRM))
        )
        assert out_prog == []

    def test_feedback_first_draw_all_add(self):
        candidate = [mk(), ln()]
        cfg = _cfg(DrawMode.FEEDBACK, SequenceItem("1", "s1", False))
        out_prog, out_cfg = apply_draw_rules(DrawMode.FEEDBACK, None, (candidate, cfg))
        assert all(c.feedback is FeedbackType.ADD for c in out_prog)
        assert out_prog == diff_programs([], candidate)

    def test_feedback_diffs_against_visible_last(self):
        a = mk(content=1, seq=1)
        b = mk(Location.GYM, content=2, seq=2)
        c = mk(Location.PANTRY, content=3, seq=3)
        gone = replace(mk(Location.LIVING_ROOM, content=4, seq=4), feedback=FeedbackType.DEL)
        last = ([a, b, gone], _cfg(DrawMode.FEEDBACK))
        cfg = _cfg(
            DrawMode.FEEDBACK,
            SequenceItem("1", "keep", False),
            SequenceItem("2", "drop", False),
            SequenceItem("3", "new", False),
        )
        out_prog, out_cfg = apply_draw_rules(DrawMode.FEEDBACK, last, ([a, c], cfg))
        by_key = {element_key(x): x.feedback for x in out_prog}
        assert by_key[element_key(a)] is FeedbackType.NONE
        assert by_key[element_key(b)] is FeedbackType.DEL
        assert by_key[element_key(c)] is FeedbackType.ADD
        # an element deleted last round is not resurrected as a del again
        assert element_key(gone) not in by_key
        # items whose steps changed get flagged
        assert [(i.seq, i.feedback) for i in out_cfg.sequence] == [
            ("1", False),
            ("2", True),
            ("3", True),
        ]

    def test_feedback_minimal_change_preserves_unchanged_attributes(self):
        rng = random.Random(99)
        for _ in range(100):
            old = random_draw_program(rng)
            stripped = [replace(c, feedback=FeedbackType.NONE) for c in old]
            out_prog, _ = apply_draw_rules(
                DrawMode.FEEDBACK,
                (old, _cfg(DrawMode.FEEDBACK)),
                (list(old), _cfg(DrawMode.FEEDBACK)),
            )
            visible = [c for c in stripped if True]
            kept = [c for c in out_prog if c.feedback is FeedbackType.NONE]
            # every unchanged-key element keeps its original attributes
            originals = {element_key(c): c for c in stripped}
            for c in kept:
                assert c == originals[element_key(c)]


class TestCompileFrames:
    def test_none_single_frame(self):
        program = [mk(), ln(), mk(Location.GYM, content=2)]
        frames = compile_frames(program, _cfg(DrawMode.NONE))
        assert len(frames) == 1
        assert frames[0].t == 0
        assert [s.opacity for s in frames[0].elements] == [1.0, 1.0, 1.0]
        assert all(not s.highlight for s in frames[0].elements)

    def test_feedback_linear_ramp(self):
        program = [mk(fb=FeedbackType.ADD)]
        frames = compile_frames(program, _cfg(DrawMode.FEEDBACK))
        assert [f.t for f in frames] == [0, 100, 200, 300, 400, 500, 600]
        for k, frame in enumerate(frames):
            (state,) = frame.elements
            assert state.opacity == pytest.approx(k / 6, abs=1e-9)

    def test_feedback_del_fades_out_and_disappears(self):
        program = [mk(fb=FeedbackType.DEL), mk(Location.GYM, content=2)]
        frames = compile_frames(program, _cfg(DrawMode.FEEDBACK))
        first = frames[0]
        assert [s.opacity for s in first.elements] == [1.0, 1.0]
        mid = frames[3]
        assert mid.elements[0].opacity == pytest.approx(0.5, abs=1e-9)
        final = frames[-1]
        assert len(final.elements) == 1  # deleted element omitted
        assert final.elements[0].opacity == 1.0

    def test_feedback_monotone(self):
        rng = random.Random(4242)
        for _ in range(50):
            old = random_draw_program(rng)
            new = mutate_draw_program(rng, old)
            program = diff_programs(
                [replace(c, feedback=FeedbackType.NONE) for c in old],
                [replace(c, feedback=FeedbackType.NONE) for c in new],
            )
            frames = compile_frames(program, _cfg(DrawMode.FEEDBACK))
            assert [f.t for f in frames] == sorted({f.t for f in frames})
            series: dict[str, list[float]] = {}
            fb_by_key = {key_str(c): c.feedback for c in program}
            for frame in frames:
                for s in frame.elements:
                    series.setdefault(s.key, []).append(s.opacity)
            for key, opacities in series.items():
                if fb_by_key[key] is FeedbackType.ADD:
                    assert opacities == sorted(opacities)
                elif fb_by_key[key] is FeedbackType.DEL:
                    assert opacities == sorted(opacities, reverse=True)
                else:
                    assert set(opacities) == {1.0}

    def test_confirm_frames_and_coverage(self):
        program = [mk(seq=1), ln(seq=2), mk(Location.GYM, content=2, seq=2), mk(Location.PANTRY, content=3, seq=3)]
        cfg = _cfg(
            DrawMode.CONFIRM,
            SequenceItem("1", "Step one"),
            SequenceItem("2", "Step two"),
            SequenceItem("3", "Step three"),
            SequenceItem("2", "Step four revisits"),
        )
        frames = compile_frames(program, cfg)
        assert [f.t for f in frames] == [0, 1500, 3000, 4500]
        assert [f.caption for f in frames] == [
            "Step one",
            "Step two",
            "Step three",
            "Step four revisits",
        ]
        for frame in frames:
            assert all(s.opacity == 1.0 for s in frame.elements)
            assert any(s.highlight for s in frame.elements)
        highlighted = {
            s.key for frame in frames for s in frame.elements if s.highlight
        }
        in_sequence = {
            key_str(c) for c in program if str(c.anim_seq) in {i.seq for i in cfg.sequence}
        }
        assert highlighted == in_sequence

    def test_confirm_seq_mismatch(self):
        program = [mk(seq=1)]
        cfg = _cfg(DrawMode.CONFIRM, SequenceItem("9", "missing"))
        with pytest.raises(SeqMismatch) as err:
            compile_frames(program, cfg)
        assert err.value.seq == "9"

    def test_wire_schema(self):
        program = [mk()]
        frames = compile_frames(program, _cfg(DrawMode.NONE))
        doc = frames_to_wire(frames)
        assert list(doc) == ["frames"]
        frame_doc = doc["frames"][0]
        assert set(frame_doc) == {"t", "caption", "elements"}
        el = frame_doc["elements"][0]
        assert set(el) == {"key", "opacity", "highlight", "element"}
        assert el["key"].startswith("mark:")


class TestRenderSVG:
    def setup_method(self):
        self.geometry = default_map()

    def test_solid_link_has_arrow_no_dash(self):
        frames = compile_frames([ln()], _cfg(DrawMode.NONE))
        svg = render_svg(frames[0], self.geometry)
        assert svg.count('marker-end="url(#arrow)"') == 1
        assert "stroke-dasharray" not in svg

    def test_dashed_link_has_dash_pattern(self):
        frames = compile_frames(
            [ln(lt=LineType.DASHED, label="if ready")], _cfg(DrawMode.NONE)
        )
        svg = render_svg(frames[0], self.geometry)
        assert "stroke-dasharray" in svg

    def test_empty_program_map_only(self):
        frames = compile_frames([], _cfg(DrawMode.NONE))
        svg = render_svg(frames[0], self.geometry)
        assert '<g class="links"' in svg
        assert "Reception area" in svg
        assert svg.count("<path") == 1  # only the arrowhead marker definition

    def test_byte_identical_for_equal_inputs(self):
        frames = compile_frames([mk(), ln()], _cfg(DrawMode.NONE))
        assert render_svg(frames[0], self.geometry) == render_svg(frames[0], self.geometry)

    def test_label_and_glyph_text_present(self):
        frames = compile_frames(
            [mk(content=Icon.SPEAK), ln(label="guide visitor")], _cfg(DrawMode.NONE)
        )
        svg = render_svg(frames[0], self.geometry)
        assert ">speak</text>" in svg
        assert ">guide visitor</text>" in svg

    def test_caption_and_highlight(self):
        program = [mk(seq=1)]
        cfg = _cfg(DrawMode.CONFIRM, SequenceItem("1", "Step one"))
        frames = compile_frames(program, cfg)
        svg = render_svg(frames[0], self.geometry)
        assert 'class="mark highlight"' in svg
        assert ">Step one</text>" in svg

    def test_location_missing_from_map_rejected(self):
        from robomap.domain import UnknownLocation
        from robomap.sim import load_map

        from test_sim import grid_map_doc

        bare = load_map(grid_map_doc())  # no Somewhere spot
        frames = compile_frames(
            [ln(Location.SOMEWHERE, Location.PANTRY, lt=LineType.DASHED, label="maybe?")],
            _cfg(DrawMode.NONE),
        )
        with pytest.raises(UnknownLocation):
            render_svg(frames[0], bare)

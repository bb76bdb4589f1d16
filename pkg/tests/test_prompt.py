from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from castmask import (
    Direction,
    MockTokenizer,
    SegmentKind,
    derive_direction,
    map_spans_to_tokens,
    parse_scene_spec,
    positional_descriptor,
    serialize_prompt,
)
from castmask.prompt import PromptLayout, Segment
from castmask.scene import BoundingBox, left_to_right, PersonRef
from castmask.tokenizer import Token

from helpers import random_scene_spec
from oracles import rescan_token_families


def _box_centered(cx: float, w: float = 50, h: float = 50) -> BoundingBox:
    return BoundingBox(cx - w / 2, 10, cx + w / 2, 10 + h)


class TestDirection:
    def test_leftward(self):
        assert derive_direction(_box_centered(600), _box_centered(200), 832) is Direction.LEFTWARD

    def test_rightward(self):
        assert derive_direction(_box_centered(200), _box_centered(600), 832) is Direction.RIGHTWARD

    def test_tie_band(self):
        # |delta x| = 10 < eps = 0.05 * 832 = 41.6
        assert derive_direction(_box_centered(400), _box_centered(410), 832) is Direction.NONE

    @given(
        ax=st.floats(30, 800), tx=st.floats(30, 800), width=st.floats(100, 2000)
    )
    @settings(max_examples=200, deadline=None)
    def test_antisymmetric_outside_tie_band(self, ax, tx, width):
        d1 = derive_direction(_box_centered(ax), _box_centered(tx), width)
        d2 = derive_direction(_box_centered(tx), _box_centered(ax), width)
        if d1 is Direction.LEFTWARD:
            assert d2 is Direction.RIGHTWARD
        elif d1 is Direction.RIGHTWARD:
            assert d2 is Direction.LEFTWARD


class TestGoldenPrompts:
    @pytest.mark.parametrize("name", ["example_three_person", "example_two_person"])
    def test_byte_for_byte(self, fixtures_dir, name):
        spec = parse_scene_spec((fixtures_dir / "scenes" / f"{name}.json").read_text())
        golden = (fixtures_dir / "golden" / f"{name}.prompt.txt").read_bytes()
        assert serialize_prompt(spec).full_text.encode("utf-8") == golden

    def test_two_person_segments(self, fixtures_dir):
        spec = parse_scene_spec((fixtures_dir / "scenes" / "example_two_person.json").read_text())
        layout = serialize_prompt(spec)
        kinds = [(s.kind, s.actor, s.event_id) for s in layout.segments]
        assert kinds == [
            (SegmentKind.BACKGROUND, None, None),
            (SegmentKind.EVENT, 1, 1),
            (SegmentKind.EVENT, 2, 2),
        ]

    def test_directional_span_covers_verb_and_direction(self, fixtures_dir):
        spec = parse_scene_spec(
            (fixtures_dir / "scenes" / "example_three_person.json").read_text()
        )
        layout = serialize_prompt(spec)
        data = layout.full_text.encode("utf-8")
        directional = [s for s in layout.segments if s.kind is SegmentKind.DIRECTIONAL]
        assert len(directional) == 1
        seg = directional[0]
        assert data[seg.byte_start : seg.byte_end] == b"speaks leftward"
        assert (seg.actor, seg.event_id) == (2, 2)

    def test_stillness_sentence_is_person_event(self, fixtures_dir):
        spec = parse_scene_spec(
            (fixtures_dir / "scenes" / "example_three_person.json").read_text()
        )
        layout = serialize_prompt(spec)
        still = [s for s in layout.segments if s.event_id == 0]
        assert len(still) == 1 and still[0].actor == 3
        text = layout.full_text.encode()[still[0].byte_start : still[0].byte_end].decode()
        assert text == "The person on the right remains still with no notable action."


class TestGrammar:
    def test_one_person_header(self):
        spec = parse_scene_spec(
            '{"image_width": 100, "image_height": 100, "fps": 8, "num_frames": 8,'
            ' "persons": [{"index": 1, "box": [10, 10, 90, 90]}]}'
        )
        layout = serialize_prompt(spec)
        assert layout.full_text.startswith(
            "There is 1 person in the scene: the person in the middle (speaker 1)."
        )
        assert "remains still with no notable action." in layout.full_text

    def test_descriptors(self):
        assert [positional_descriptor(i, 3) for i in range(3)] == [
            "on the left", "in the middle", "on the right",
        ]
        assert [positional_descriptor(i, 4) for i in range(4)] == [
            "on the left", "second from the left", "third from the left", "on the right",
        ]
        assert positional_descriptor(2, 5) == "in the middle"

    def test_header_order_follows_center_x_with_index_ties(self):
        persons = (
            PersonRef(1, BoundingBox(50, 0, 70, 10)),
            PersonRef(2, BoundingBox(0, 0, 20, 10)),
            PersonRef(3, BoundingBox(0, 20, 20, 30)),  # same center-x as person 2
        )
        assert [p.index for p in left_to_right(persons)] == [2, 3, 1]

    def test_deterministic(self):
        rng = np.random.default_rng(3)
        spec = random_scene_spec(rng)
        assert serialize_prompt(spec).full_text == serialize_prompt(spec).full_text

    def test_segments_partition(self):
        rng = np.random.default_rng(4)
        for _ in range(25):
            layout = serialize_prompt(random_scene_spec(rng))
            layout.validate()  # sorted, non-overlapping, covering
            total = len(layout.full_text.encode())
            assert layout.segments[0].byte_start == 0
            assert layout.segments[-1].byte_end == total


class TestTokenMapping:
    def test_single_background_segment(self):
        layout = PromptLayout(
            full_text="just a scene description",
            segments=(Segment(SegmentKind.BACKGROUND, None, None, 0, 24),),
        )
        spans = map_spans_to_tokens(layout, MockTokenizer())
        assert spans.background == frozenset(range(spans.n_text_tokens))
        assert spans.per_event == {}

    def test_straddling_token_assigned_by_first_byte(self):
        # 10-byte text, boundary at byte 4; token [3, 6) starts in the first segment.
        layout = PromptLayout(
            full_text="aaaa bbbbb",
            segments=(
                Segment(SegmentKind.BACKGROUND, None, None, 0, 4),
                Segment(SegmentKind.EVENT, 1, 1, 4, 10),
            ),
        )

        class Straddler:
            def tokenize(self, text):
                return [Token(1, 0, 3), Token(2, 3, 6), Token(3, 6, 10)]

        spans = map_spans_to_tokens(layout, Straddler())
        assert spans.background == frozenset({0, 1})
        assert spans.per_event[(1, 1)] == frozenset({2})

    def test_offsets_outside_text_rejected(self):
        layout = PromptLayout(
            full_text="abc",
            segments=(Segment(SegmentKind.BACKGROUND, None, None, 0, 3),),
        )

        class Bad:
            def tokenize(self, text):
                return [Token(1, 0, 99)]

        with pytest.raises(Exception, match="outside"):
            map_spans_to_tokens(layout, Bad())

    def test_three_person_example_against_rescan_oracle(self, fixtures_dir):
        spec = parse_scene_spec(
            (fixtures_dir / "scenes" / "example_three_person.json").read_text()
        )
        layout = serialize_prompt(spec)
        tokenizer = MockTokenizer()
        spans = map_spans_to_tokens(layout, tokenizer)
        bg, per_event, directional = rescan_token_families(layout, tokenizer.tokenize(layout.full_text))
        assert spans.background == frozenset(bg)
        assert {k: set(v) for k, v in spans.per_event.items()} == per_event
        assert {k: set(v) for k, v in spans.directional.items()} == directional
        # the directional tokens are exactly "speaks" and "leftward"
        toks = tokenizer.tokenize(layout.full_text)
        data = layout.full_text.encode()
        words = {data[toks[i].byte_start : toks[i].byte_end].decode() for i in spans.directional[(2, 2)]}
        assert words == {"speaks", "leftward"}

    def test_partition_property_random(self):
        rng = np.random.default_rng(5)
        tokenizer = MockTokenizer()
        for _ in range(25):
            layout = serialize_prompt(random_scene_spec(rng))
            spans = map_spans_to_tokens(layout, tokenizer)
            spans.validate()
            families = [spans.background, *spans.per_event.values(), *spans.directional.values()]
            assert sum(len(f) for f in families) == spans.n_text_tokens
            union = set().union(*families)
            assert union == set(range(spans.n_text_tokens))


class TestMockTokenizer:
    def test_unicode_byte_offsets(self):
        text = "café \U0001f389 ok"
        toks = MockTokenizer().tokenize(text)
        data = text.encode("utf-8")
        pieces = [data[t.byte_start : t.byte_end].decode("utf-8") for t in toks]
        assert pieces == ["café", "\U0001f389", "ok"]

    def test_ids_stable(self):
        a = MockTokenizer().tokenize("hello world hello")
        assert a[0].token_id == a[2].token_id
        assert a[0].token_id != a[1].token_id
        assert a == MockTokenizer().tokenize("hello world hello")

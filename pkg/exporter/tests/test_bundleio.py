"""Writer-level tests: exact byte layout and the refuse-to-write contract.

The expected bytes in the layout test are assembled by hand with
``struct`` and literal JSON, independently of the writer under test, so
they pin the wire format rather than echo the implementation.
"""

from __future__ import annotations

import json
import struct

import numpy as np
import pytest

from reba_exporter import (
    HEADER_KEY_ORDER,
    BundleHeader,
    ExportError,
    bundle_bytes,
    header_json_bytes,
    write_bundle,
)


def smallest_header(**overrides) -> BundleHeader:
    fields = dict(
        layers=1,
        heads=1,
        seq_len=1,
        hidden=1,
        base_len=1,
        repetitions=1,
        token_ids=(0,),
    )
    fields.update(overrides)
    return BundleHeader(**fields)


ATT_1 = np.array([[[[1.0]]]], dtype=np.float32)
HID_HALF = np.array([[0.5]], dtype=np.float32)


class TestHeaderBytes:
    def test_keys_appear_in_documented_order(self):
        doc = json.loads(
            header_json_bytes(smallest_header()).decode("utf-8"),
            object_pairs_hook=lambda pairs: [k for k, _ in pairs],
        )
        assert tuple(doc) == HEADER_KEY_ORDER

    def test_compact_utf8_json(self):
        raw = header_json_bytes(smallest_header(model_tag="tiny", notes="ünïcode"))
        text = raw.decode("utf-8")
        assert ": " not in text and ", " not in text
        assert "ünïcode" in text


class TestExactLayout:
    def test_smallest_bundle_bytes(self):
        # Expected bytes assembled by hand from the format description:
        # magic, u32 LE header length, header JSON, one f32 attention
        # entry (1.0), one f32 hidden entry (0.5).
        head = (
            b'{"version":1,"layers":1,"heads":1,"seq_len":1,"hidden":1,'
            b'"base_len":1,"repetitions":1,"truncated":false,"token_ids":[0],'
            b'"dtype":"f32","model_tag":"","notes":""}'
        )
        expected = (
            b"REBABNDL"
            + struct.pack("<I", len(head))
            + head
            + b"\x00\x00\x80\x3f"
            + b"\x00\x00\x00\x3f"
        )
        assert bundle_bytes(smallest_header(), ATT_1, HID_HALF) == expected

    def test_payload_order_layer_head_row_major(self, tmp_path, read_raw):
        # Two layers, one head, m=2: causal row-stochastic matrices with
        # distinct entries per layer so payload order is observable.
        att = np.array(
            [
                [[[1.0, 0.0], [0.25, 0.75]]],
                [[[1.0, 0.0], [0.5, 0.5]]],
            ],
            dtype=np.float32,
        )
        hid = np.array([[1.0, 2.0], [3.0, 4.0]], dtype=np.float32)
        header = smallest_header(
            layers=2, seq_len=2, hidden=2, base_len=1, repetitions=2,
            token_ids=(7, 7),
        )
        destination = tmp_path / "two.reba"
        written = write_bundle(destination, header, att, hid)
        assert written == destination.stat().st_size

        parsed_header, parsed_att, parsed_hid = read_raw(destination)
        assert parsed_header["token_ids"] == [7, 7]
        assert (parsed_att == att).all()
        assert (parsed_hid == hid).all()
        # Flat payload order: layer 0 rows, then layer 1 rows.
        flat = np.frombuffer(
            destination.read_bytes()[-4 * (8 + 4) : -4 * 4], dtype="<f4"
        )
        assert flat.tolist() == [1.0, 0.0, 0.25, 0.75, 1.0, 0.0, 0.5, 0.5]


class TestRefusals:
    def refuse(self, tmp_path, header, att, hid, match):
        destination = tmp_path / "bad.reba"
        with pytest.raises(ExportError, match=match):
            write_bundle(destination, header, att, hid)
        assert not destination.exists(), "refused bundles must leave no file"

    def test_above_diagonal_mass(self, tmp_path):
        att = np.array([[[[0.5, 0.5], [0.5, 0.5]]]], dtype=np.float32)
        hid = np.zeros((2, 1), dtype=np.float32)
        header = smallest_header(seq_len=2, repetitions=2, token_ids=(0, 0))
        self.refuse(tmp_path, header, att, hid, "above the diagonal")

    def test_row_sum_off(self, tmp_path):
        self.refuse(
            tmp_path,
            smallest_header(),
            np.array([[[[0.9]]]], dtype=np.float32),
            HID_HALF,
            "sum 1",
        )

    def test_nan_attention(self, tmp_path):
        self.refuse(
            tmp_path,
            smallest_header(),
            np.array([[[[np.nan]]]], dtype=np.float32),
            HID_HALF,
            "NaN",
        )

    def test_negative_attention(self, tmp_path):
        att = np.array([[[[1.2, 0.0], [-0.1, 1.1]]]], dtype=np.float32)
        hid = np.zeros((2, 1), dtype=np.float32)
        header = smallest_header(seq_len=2, repetitions=2, token_ids=(0, 0))
        self.refuse(tmp_path, header, att, hid, r"outside \[0, 1\]")

    def test_untruncated_needs_exact_length(self, tmp_path):
        header = smallest_header(repetitions=2)  # m=1 but k*n=2
        self.refuse(tmp_path, header, ATT_1, HID_HALF, "m == k\\*n")

    def test_untruncated_needs_aligned_ids(self, tmp_path):
        att = np.array([[[[1.0, 0.0], [0.5, 0.5]]]], dtype=np.float32)
        hid = np.zeros((2, 1), dtype=np.float32)
        header = smallest_header(seq_len=2, repetitions=2, token_ids=(1, 2))
        self.refuse(tmp_path, header, att, hid, "token_ids")

    def test_truncated_skips_alignment_but_keeps_bounds(self, tmp_path):
        att = np.array([[[[1.0, 0.0], [0.5, 0.5]]]], dtype=np.float32)
        hid = np.zeros((2, 1), dtype=np.float32)
        ok = smallest_header(
            seq_len=2, repetitions=3, token_ids=(1, 2), truncated=True
        )
        write_bundle(tmp_path / "ok.reba", ok, att, hid)
        assert (tmp_path / "ok.reba").exists()

        too_long = smallest_header(
            seq_len=2, repetitions=1, token_ids=(1, 2), truncated=True
        )
        self.refuse(tmp_path, too_long, att, hid, "n <= m <= k\\*n")

    def test_token_count_must_match_seq_len(self, tmp_path):
        header = smallest_header(token_ids=(0, 0))
        self.refuse(tmp_path, header, ATT_1, HID_HALF, "token ids")

    def test_wrong_dtype_and_version(self, tmp_path):
        self.refuse(
            tmp_path, smallest_header(dtype="float32"), ATT_1, HID_HALF, "dtype"
        )
        self.refuse(
            tmp_path, smallest_header(version=2), ATT_1, HID_HALF, "version"
        )

    def test_hidden_shape_mismatch(self, tmp_path):
        hid = np.zeros((2, 1), dtype=np.float32)
        self.refuse(tmp_path, smallest_header(), ATT_1, hid, "hidden-state shape")

    def test_attention_shape_mismatch(self, tmp_path):
        att = np.ones((1, 2, 1, 1), dtype=np.float32)
        self.refuse(tmp_path, smallest_header(), att, HID_HALF, "attention shape")

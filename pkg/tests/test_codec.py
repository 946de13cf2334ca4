import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vizpipe import codec
from vizpipe.errors import BadMagic, TruncatedPayload, UnsupportedVersion
from vizpipe.frame import DataFrame, categorical_column, float_column, int_column


def test_empty_frame_is_nine_bytes():
    payload = codec.encode(DataFrame([]))
    assert len(payload) == 9
    assert payload[:4] == b"P6DF"
    assert codec.decode(payload).equals(DataFrame([]))


def test_mixed_frame_round_trips_bitwise():
    frame = DataFrame(
        [
            float_column("f", [1.5, 2.5, 3.5], valid=[True, False, True]),
            categorical_column("c", ["a", "b", "a"]),
            int_column("i", [-1, 0, 2**40]),
        ]
    )
    payload = codec.encode(frame)
    back = codec.decode(payload)
    assert back.equals(frame)
    assert codec.encode(back) == payload


def test_bad_magic():
    payload = bytearray(codec.encode(DataFrame([])))
    payload[0] ^= 0xFF
    with pytest.raises(BadMagic):
        codec.decode(bytes(payload))


def test_unsupported_version():
    payload = bytearray(codec.encode(DataFrame([])))
    payload[4] = 9
    with pytest.raises(UnsupportedVersion):
        codec.decode(bytes(payload))


def test_truncation_detected():
    frame = DataFrame([float_column("f", [1.0, 2.0])])
    payload = codec.encode(frame)
    for cut in (5, 9, len(payload) - 3):
        with pytest.raises(TruncatedPayload):
            codec.decode(payload[:cut])
    with pytest.raises(TruncatedPayload):
        codec.decode(payload + b"\x00")


def random_frame(rng: np.random.Generator, max_rows: int = 200) -> DataFrame:
    """Randomized mixed-dtype frame with optional nulls (shared with acceptance).

    Always has at least one column: the wire format stores row counts per
    column, so a column-less frame cannot carry a nonzero row count.
    """
    n = int(rng.integers(0, max_rows + 1))
    cols = []
    for i in range(int(rng.integers(1, 5))):
        name = f"col{i}"
        kind = rng.integers(0, 3)
        valid = None
        if rng.random() < 0.4 and n:
            valid = rng.random(n) > 0.2
        if kind == 0:
            cols.append(float_column(name, rng.normal(size=n), valid))
        elif kind == 1:
            cols.append(int_column(name, rng.integers(-1000, 1000, size=n), valid))
        else:
            alphabet = [f"v{j}" for j in range(int(rng.integers(1, 6)))]
            labels = [alphabet[int(k)] for k in rng.integers(0, len(alphabet), size=n)]
            if valid is not None:
                labels = [v if ok else None for v, ok in zip(labels, valid)]
            cols.append(categorical_column(name, labels))
    return DataFrame(cols, row_count=n if cols else 0)


def test_randomized_round_trip():
    rng = np.random.default_rng(42)
    for _ in range(50):
        frame = random_frame(rng)
        assert codec.decode(codec.encode(frame)).equals(frame)


@st.composite
def frames(draw):
    cols = []
    n_cols = draw(st.integers(min_value=0, max_value=3))
    n = draw(st.integers(min_value=0, max_value=30)) if n_cols else 0
    for i in range(n_cols):
        dtype = draw(st.sampled_from(["f", "i", "c"]))
        valid = draw(
            st.one_of(st.none(), st.lists(st.booleans(), min_size=n, max_size=n))
        )
        if dtype == "f":
            vals = draw(
                st.lists(
                    st.floats(allow_nan=False, allow_infinity=False, width=64),
                    min_size=n,
                    max_size=n,
                )
            )
            cols.append(float_column(f"c{i}", vals, valid))
        elif dtype == "i":
            vals = draw(st.lists(st.integers(-(2**62), 2**62), min_size=n, max_size=n))
            cols.append(int_column(f"c{i}", vals, valid))
        else:
            vals = draw(st.lists(st.sampled_from(["", "a", "bb", "ü"]), min_size=n, max_size=n))
            if valid is not None:
                vals = [v if ok else None for v, ok in zip(vals, valid)]
            cols.append(categorical_column(f"c{i}", vals))
    return DataFrame(cols, row_count=n)


@settings(max_examples=60, deadline=None)
@given(frames())
def test_property_round_trip(frame):
    assert codec.decode(codec.encode(frame)).equals(frame)

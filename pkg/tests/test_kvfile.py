"""Test the key=value file format."""

import pytest

from credit_stack.errors import ConfigError
from credit_stack.kvfile import format_key_values, nest_keys, parse_key_values


def test_parse_skips_comments_and_blanks() -> None:
    """Test comments, blank lines and surrounding whitespace."""
    text = (
        "# experiment\n\nseed = 7\n"
        "  base.0.kind=gbdt  \n"
        "label_column = Credit_Score\n"
    )
    assert parse_key_values(text) == {
        "seed": "7",
        "base.0.kind": "gbdt",
        "label_column": "Credit_Score",
    }


def test_parse_keeps_equals_in_values() -> None:
    """Test only the first '=' separates key and value."""
    assert parse_key_values("note = a=b") == {"note": "a=b"}


@pytest.mark.parametrize(
    ("text", "message"),
    [
        ("seed 7", "run.cfg:1: expected 'key = value'"),
        ("= 7", "run.cfg:1: expected 'key = value'"),
        ("seed = 1\nseed = 2", "run.cfg:2: duplicate key 'seed'"),
    ],
)
def test_parse_errors_name_the_line(text: str, message: str) -> None:
    """Test malformed lines are reported with their position."""
    with pytest.raises(ConfigError) as err:
        parse_key_values(text, "run.cfg")

    assert str(err.value) == message


def test_nest_keys() -> None:
    """Test dotted keys become nested sections."""
    nested = nest_keys({"seed": "1", "base.0.kind": "knn", "base.0.params.k": "3"})
    assert nested == {"seed": "1", "base": {"0": {"kind": "knn", "params": {"k": "3"}}}}


@pytest.mark.parametrize(
    "flat",
    [{"a": "1", "a.b": "2"}, {"a.b": "2", "a": "1"}],
)
def test_nest_keys_conflicts(flat: dict[str, str]) -> None:
    """Test a key cannot be both a value and a section."""
    with pytest.raises(ConfigError):
        nest_keys(flat)


def test_format_key_values() -> None:
    """Test value rendering."""
    text = format_key_values(
        {"flag": True, "off": False, "mean": 0.5, "cols": ["a", "b"], "none": None}
    )
    assert text == "flag=true\noff=false\nmean=0.5\ncols=a,b\nnone=\n"
    assert parse_key_values(text)["cols"] == "a,b"

import numpy as np
import pytest

from asyncqvi import MdpValidationError, random_mdp, validate_mdp
from asyncqvi.io import FormatError, load_mdp, load_policy, parse_mdp, save_mdp, save_policy


def test_roundtrip(tmp_path):
    mdp = random_mdp(6, 3, 0.85, density=0.5, random_state=2)
    save_mdp(mdp, tmp_path / "m.txt")
    back = load_mdp(tmp_path / "m.txt")
    assert back.shape == mdp.shape and back.gamma == mdp.gamma
    for name in ("indptr", "next_states", "probs", "rewards"):
        assert np.array_equal(getattr(back, name), getattr(mdp, name))


def test_comments_and_blank_lines():
    mdp = parse_mdp("# header next\n2 1 0.5\n\n0 0 1 1.0 0  # go\n1 0 1 1.0 1\n")
    validate_mdp(mdp)
    assert mdp.row(0, 0)[0].tolist() == [1]


@pytest.mark.parametrize("text, lineno", [
    ("", None),
    ("2 1\n", 1),
    ("2 1 x\n", 1),
    ("2 1 0.5\n0 0 1 1.0\n", 2),
    ("2 1 0.5\n0 0 2 1.0 0\n", 2),
    ("2 1 0.5\n0 0 1 0.5 0\n0 0 1 0.5 0\n", 3),
    ("2 1 0.5\n0 0 one 1.0 0\n", 2),
])
def test_format_errors(text, lineno):
    with pytest.raises(FormatError) as err:
        parse_mdp(text)
    assert err.value.lineno == lineno


def test_parsed_bad_row_fails_validation():
    mdp = parse_mdp("2 2 0.9\n0 0 1 1.0 0\n0 1 1 0.7 0\n1 0 1 1 0\n1 1 0 1 0\n")
    with pytest.raises(MdpValidationError) as err:
        validate_mdp(mdp)
    assert (err.value.state, err.value.action) == (0, 1)


def test_policy_roundtrip_and_checks(tmp_path):
    path = tmp_path / "pi.txt"
    save_policy([0, 2, 1], path)
    assert load_policy(path, 3, 3).tolist() == [0, 2, 1]
    with pytest.raises(FormatError, match="expected 4"):
        load_policy(path, 4, 3)
    with pytest.raises(FormatError, match="out of range"):
        load_policy(path, 3, 2)

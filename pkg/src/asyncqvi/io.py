"""Plain-text interchange formats.

MDP files start with a header ``num_states num_actions gamma`` followed by one
``i a j p r`` line per transition. Policy files hold one action index per line.
Blank lines and ``#`` comments are ignored in both.
"""

import numpy as np

from .mdp import TabularMdp


class FormatError(ValueError):
    def __init__(self, message, lineno=None):
        super().__init__(f"line {lineno}: {message}" if lineno else message)
        self.lineno = lineno


def _content_lines(text):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield lineno, line


def parse_mdp(text):
    lines = _content_lines(text)
    try:
        lineno, header = next(lines)
    except StopIteration:
        raise FormatError("empty MDP file") from None
    fields = header.split()
    if len(fields) != 3:
        raise FormatError("header must be 'num_states num_actions gamma'", lineno)
    try:
        S, A, gamma = int(fields[0]), int(fields[1]), float(fields[2])
    except ValueError:
        raise FormatError(f"malformed header {header!r}", lineno) from None
    if S < 1 or A < 1:
        raise FormatError("num_states and num_actions must be positive", lineno)

    seen = set()
    transitions = []
    for lineno, line in lines:
        fields = line.split()
        if len(fields) != 5:
            raise FormatError(f"expected 'i a j p r', got {line!r}", lineno)
        try:
            i, a, j = (int(f) for f in fields[:3])
            p, r = float(fields[3]), float(fields[4])
        except ValueError:
            raise FormatError(f"malformed transition {line!r}", lineno) from None
        if not (0 <= i < S and 0 <= j < S and 0 <= a < A):
            raise FormatError(f"index out of range in {line!r}", lineno)
        if (i, a, j) in seen:
            raise FormatError(f"duplicate transition ({i}, {a}, {j})", lineno)
        seen.add((i, a, j))
        transitions.append((i, a, j, p, r))
    return TabularMdp.from_transitions(S, A, gamma, transitions)


def load_mdp(path):
    with open(path, encoding="utf-8") as fh:
        return parse_mdp(fh.read())


def save_mdp(mdp, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{mdp.num_states} {mdp.num_actions} {mdp.gamma!r}\n")
        for k in range(mdp.num_states * mdp.num_actions):
            i, a = divmod(k, mdp.num_actions)
            for j, p, r in zip(*mdp.row(i, a)):
                fh.write(f"{i} {a} {int(j)} {float(p)!r} {float(r)!r}\n")


def load_policy(path, num_states=None, num_actions=None):
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    actions = []
    for lineno, line in _content_lines(text):
        try:
            actions.append(int(line))
        except ValueError:
            raise FormatError(f"not an action index: {line!r}", lineno) from None
        if actions[-1] < 0 or (num_actions is not None and actions[-1] >= num_actions):
            raise FormatError(f"action {actions[-1]} out of range", lineno)
    if num_states is not None and len(actions) != num_states:
        raise FormatError(f"policy has {len(actions)} entries, expected {num_states}")
    return np.array(actions, dtype=np.int64)


def save_policy(policy, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.writelines(f"{int(a)}\n" for a in policy)

from decimal import ROUND_CEILING, Decimal, localcontext

import numpy as np
import pytest

from asyncqvi import TabularMdp

_ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture
def report_criterion(request):
    """Record one PASS/FAIL line per acceptance criterion; returns ``passed``."""
    lines = request.config.stash.setdefault(_ACCEPTANCE, [])

    def report(number, title, passed, detail):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {title} -- {detail}"
        print(line)
        lines.append(line)
        return passed

    return report


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda x: int(x.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)


def decimal_L(eps, gamma, b1, b2):
    with localcontext() as ctx:
        ctx.prec = 60
        g, e = Decimal(gamma), Decimal(eps)
        value = 2 * b1 + (b1 + b2 - 1) / (1 - g) * (2 / ((1 - g) * e)).ln()
        return int(value.to_integral_value(rounding=ROUND_CEILING))


def decimal_K(eps, gamma, delta, L):
    with localcontext() as ctx:
        ctx.prec = 60
        g, e, d = Decimal(gamma), Decimal(eps), Decimal(delta)
        value = 8 / ((1 - g) ** 4 * e ** 2) * (4 * L / d).ln()
        return int(value.to_integral_value(rounding=ROUND_CEILING))


def decimal_rho(gamma, b1, b2):
    with localcontext() as ctx:
        ctx.prec = 60
        return float((Decimal(gamma).ln() / (b1 + b2 - 1)).exp())


def self_loop(gamma=0.9, reward=1.0):
    return TabularMdp.from_transitions(1, 1, gamma, [(0, 0, 0, 1.0, reward)])


def two_state_chain(gamma=0.5, with_stay=False):
    """0 -> 1 (reward 0), 1 absorbing with reward 1; optional action 1 at state 0 stays put."""
    A = 2 if with_stay else 1
    tr = [(0, 0, 1, 1.0, 0.0), (1, 0, 1, 1.0, 1.0)]
    if with_stay:
        tr += [(0, 1, 0, 1.0, 0.0), (1, 1, 1, 1.0, 1.0)]
    return TabularMdp.from_transitions(2, A, gamma, tr)


def dense_arrays(mdp):
    """(P, R) as dense (S, A, S) arrays, built by plain loops."""
    S, A = mdp.num_states, mdp.num_actions
    P = np.zeros((S, A, S))
    R = np.zeros((S, A, S))
    for i in range(S):
        for a in range(A):
            for j, p, r in zip(*mdp.row(i, a)):
                P[i, a, j] = p
                R[i, a, j] = r
    return P, R


@pytest.fixture
def chain():
    return two_state_chain()

import logging
import math

import pytest

from fractrans.core.errors import InvalidProblem
from fractrans.modules.efficiency import (
    ee_problem,
    golden_section_efficiency,
    lifted_efficiency,
    solve_energy_efficiency,
    solve_energy_efficiency_qt,
)

logger = logging.getLogger(__name__)

UNIT = (1.0, 1.0, 1.0, 10.0)


def test_dinkelbach_closed_form():
    p, value, trace = solve_energy_efficiency(*UNIT)
    assert p[0] == pytest.approx(math.e - 1.0, abs=1e-4)
    assert value == pytest.approx(1.0 / math.e, abs=1e-8)
    assert trace.is_monotone()


def test_agrees_with_golden_section():
    for gain, circuit in [(1.0, 1.0), (4.0, 0.5), (0.2, 2.0)]:
        _, direct = golden_section_efficiency(gain, 1.0, circuit, 10.0)
        assert solve_energy_efficiency(gain, 1.0, circuit, 10.0).value == pytest.approx(direct, abs=1e-6)


def test_three_methods_agree():
    dink = solve_energy_efficiency(*UNIT)
    qt = solve_energy_efficiency_qt(*UNIT)
    _, lifted = lifted_efficiency(*UNIT)
    assert qt.value == pytest.approx(dink.value, abs=1e-6)
    assert lifted == pytest.approx(dink.value, abs=1e-3)
    logger.info("Dinkelbach %d iterations, QT %d iterations", dink.trace.iterations, qt.trace.iterations)


def test_power_cap_binds():
    p, value, _ = solve_energy_efficiency(1.0, 1.0, 1.0, 0.5)
    assert p[0] == pytest.approx(0.5, abs=1e-6)
    assert value == pytest.approx(math.log1p(0.5) / 1.5, abs=1e-8)


def test_rejects_nonpositive_inputs():
    with pytest.raises(InvalidProblem):
        ee_problem(1.0, 1.0, 0.0, 10.0)

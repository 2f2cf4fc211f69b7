import numpy as np
import pytest

from cvxeuler.profile import EnergyProfile, ExpressionError


class TestProfile:
    def test_linear(self):
        e = EnergyProfile("1 - t/2")
        t = np.linspace(0, 1, 5)
        assert np.allclose(e(t), 1 - t / 2)
        assert np.allclose(e.derivative(t), -0.5)
        assert e.minimum() == pytest.approx(0.5)

    def test_chain_rule(self):
        e = EnergyProfile("2 + sin(pi*t) * exp(-t)")
        t = np.linspace(0, 1, 11)
        expected = np.pi * np.cos(np.pi * t) * np.exp(-t) - np.sin(np.pi * t) * np.exp(-t)
        assert np.allclose(e.derivative(t), expected, atol=1e-14)

    @pytest.mark.parametrize("text", ["t**2", "__import__('os')", "log(t)", "t if t else 1", "x + 1", "1 +"])
    def test_rejects_outside_grammar(self, text):
        with pytest.raises(ExpressionError):
            EnergyProfile(text)

    def test_validate_positivity(self):
        EnergyProfile("1").validate()
        with pytest.raises(ExpressionError):
            EnergyProfile("1 - 2*t").validate()

    def test_scaled(self):
        assert EnergyProfile("1 - t/2").scaled(4.0)(0.5)[0] == pytest.approx(3.0)

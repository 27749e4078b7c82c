"""Smoke test for the kickrotor_py extension.

Build and install first:  pip install maturin && maturin develop -m crates/python/Cargo.toml
"""

import math

import kickrotor_py as kr

G = (1 + math.sqrt(5)) / 2


def test_fibonacci_word():
    assert kr.kick_labels(5) == [1, 2, 1, 1, 2]
    assert [kr.fibonacci_instant(m) for m in range(1, 6)] == [1, 2, 3, 5, 8]


def test_coefficients():
    c = kr.coefficients(3)
    assert (c["alpha"], c["beta"], c["delta"], c["eta1"], c["eta2"]) == ("2", "1", "0", "-1/6", "1/6")
    c = kr.coefficients(kr.fibonacci_instant(20))
    assert abs(c["nec"]["alpha"] - 1 / G) < 1e-3


def test_delocalization():
    m, n = kr.delocalization_time(0.01)
    assert 1.0e6 <= n <= 1.6e6


def test_low_frequency_diffusion():
    ns, e = kr.evolve(1.0, 2000)
    assert ns[0] == 0 and len(ns) == len(e)
    slope, _ = kr.fit_growth(ns, e, 20, 2000)
    assert abs(slope - 1.0) < 0.2


def test_effective_spectrum():
    s = kr.effective_spectrum(0.01, basis=256)
    assert len(s["eigenphases"]) == 256
    assert all(-math.pi <= p <= math.pi for p in s["eigenphases"])
    assert s["plateau_estimate"] > 0


def test_errors():
    for call in (lambda: kr.evolve(-1.0, 10), lambda: kr.kick_labels(3, sequence="periodic")):
        try:
            call()
        except ValueError:
            pass
        else:
            raise AssertionError("expected ValueError")


if __name__ == "__main__":
    for name, fn in sorted(globals().items()):
        if name.startswith("test_"):
            fn()
            print(f"{name}: ok")

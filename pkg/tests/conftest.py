import numpy as np
import pytest


def central_diff_gradient(f, x, h=1e-6):
    """Independent gradient oracle: central differences, coordinate by coordinate."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        g[j] = (f(x + e) - f(x - e)) / (2.0 * h)
    return g


def replay_radii(config, history):
    """Independent re-implementation of the radii state machine.

    Walks the logged (rho, swap, full-length) stream through the four phase
    rules and returns the (delta, Delta) pair after every iteration.
    """
    delta, Delta = config.delta0, config.Delta0
    gamma = 0
    out = []
    for o in history:
        if o.kind == "criticality":
            delta *= config.tau1
            Delta *= 0.5 * (config.tau1 + config.tau2)
        elif o.kind == "altmov" and not o.rho_defined:
            if not o.radii_frozen:
                delta *= config.tau1
                Delta *= config.tau1
        else:
            if o.rho >= config.eta1:
                gamma = 0
            adjusted = (o.rho >= config.eta and o.index_swapped
                        and gamma <= config.Gamma_max)
            if adjusted:
                delta *= config.tau4
                Delta *= config.tau4
                gamma += 1
            elif o.rho < config.eta1:
                delta *= config.tau1
                Delta *= config.tau1
            elif o.rho > config.eta2 and o.full_length:
                delta *= config.tau3
                Delta *= config.tau3
        out.append((delta, Delta))
    return out


def assert_radii_replay(config, history):
    replayed = replay_radii(config, history)
    for o, (delta, Delta) in zip(history, replayed):
        assert o.delta == delta and o.Delta == Delta, (
            f"radii diverge at k={o.k} ({o.kind}): "
            f"logged ({o.delta}, {o.Delta}), replayed ({delta}, {Delta})"
        )


def adjustment_counts(history):
    """(|acceptable with adjustment|, |successful|) over a history."""
    adjusted_acceptable = sum(
        1 for o in history if o.kind == "acceptable_adjusted"
    )
    successful = sum(
        1 for o in history
        if o.kind in ("successful_plain", "successful_adjusted")
    )
    return adjusted_acceptable, successful


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)

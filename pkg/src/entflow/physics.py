"""Closed-form fidelity and noise models for swapping and purification.

All functions operate on Werner-state fidelities. The swap model follows
the standard depolarizing-gate / noisy-measurement composition; two
purification maps are provided:

* ``as-printed`` -- the gate-noise DEJMPS output formula taken verbatim
  from the hardware-noise literature. Its output is range-clamped because
  the printed formula fails its own perfect-input sanity check (it yields
  -1/12 for ideal inputs and ideal operations); a module-level counter
  records every clamping event.
* ``ideal-dejmps`` -- the perfect-operation DEJMPS/BBPSSW map for Werner
  inputs, used as the default purification model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

FIDELITY_FLOOR = 0.25  # fully depolarized Werner state

PURIFY_MODELS = ("ideal-dejmps", "as-printed")


@dataclass(frozen=True)
class NoiseParams:
    """Gate/measurement reliabilities and base generated-pair fidelity."""

    p1: float = 0.995
    p2: float = 0.995
    eta: float = 0.995
    f0: float = 0.98

    def __post_init__(self) -> None:
        for name in ("p1", "p2", "eta"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")
        if not 0.5 < self.f0 <= 1.0:
            raise ValueError(f"f0 must be in (0.5, 1], got {self.f0}")


PERFECT_OPS = NoiseParams(p1=1.0, p2=1.0, eta=1.0, f0=1.0)
DEFAULT_NOISE = NoiseParams()


class ClampCounter:
    """Counts fidelity outputs that had to be clamped into [0, 1]."""

    def __init__(self) -> None:
        self.count = 0

    def reset(self) -> None:
        self.count = 0


CLAMP_EVENTS = ClampCounter()


def _check_fidelity(name: str, f: float) -> None:
    if not FIDELITY_FLOOR <= f <= 1.0:
        raise ValueError(f"{name} must be in [0.25, 1], got {f}")


def swap_fidelity(f1: float, f2: float, noise: NoiseParams = DEFAULT_NOISE) -> float:
    """Output fidelity of a single entanglement swap of two Werner pairs."""
    return chain_swap_fidelity([f1, f2], noise)


def chain_swap_fidelity(fids, noise: NoiseParams = DEFAULT_NOISE) -> float:
    """Fidelity after connecting N pairs with N-1 consecutive swaps.

    With a single input pair the value passes through unchanged.
    """
    fids = list(fids)
    if not fids:
        raise ValueError("need at least one input fidelity")
    for f in fids:
        _check_fidelity("fidelity", f)
    n = len(fids)
    gate_factor = noise.p1 ** 2 * noise.p2 * (4.0 * noise.eta ** 2 - 1.0) / 3.0
    prod = 1.0
    for f in fids:
        prod *= (4.0 * f - 1.0) / 3.0
    return 0.25 * (1.0 + 3.0 * gate_factor ** (n - 1) * prod)


def purify_success_prob(f1: float, f2: float, noise: NoiseParams = DEFAULT_NOISE) -> float:
    """Success probability of one DEJMPS round under noisy gates/measurements."""
    _check_fidelity("f1", f1)
    _check_fidelity("f2", f2)
    return (1.0 / 18.0) * (
        9.0
        + (4.0 * f1 - 1.0) * (4.0 * f2 - 1.0) * (1.0 - 2.0 * noise.eta) ** 2 * noise.p2 ** 2
    )


def purify_output_fidelity_raw(
    f1: float, f2: float, noise: NoiseParams = DEFAULT_NOISE
) -> float:
    """Unclamped output fidelity of the as-printed noisy DEJMPS formula."""
    _check_fidelity("f1", f1)
    _check_fidelity("f2", f2)
    p_succ = purify_success_prob(f1, f2, noise)
    if p_succ == 0.0:
        raise ZeroDivisionError("purification success probability is zero")
    eta = noise.eta
    p2sq = noise.p2 ** 2
    numerator = (
        9.0
        + p2sq * ((1.0 - 8.0 * f2) - 8.0 * f1 * (6.0 * eta ** 2 + 6.0 * eta - 1.0))
        + 16.0 * p2sq * f1 * f2 * (12.0 * eta ** 2 - 12.0 * eta + 5.0)
    )
    return numerator / (72.0 * p_succ)


def purify_output_fidelity(
    f1: float, f2: float, noise: NoiseParams = DEFAULT_NOISE
) -> float:
    """As-printed purified fidelity, clamped into [0, 1].

    Clamping events are tallied in ``CLAMP_EVENTS`` instead of raising, so
    parameter sweeps keep running while model misuse stays visible.
    """
    raw = purify_output_fidelity_raw(f1, f2, noise)
    if raw < 0.0 or raw > 1.0:
        CLAMP_EVENTS.count += 1
        return min(1.0, max(0.0, raw))
    return raw


def ideal_dejmps(f1: float, f2: float) -> tuple[float, float]:
    """Perfect-operation DEJMPS map for two Werner inputs.

    Returns (output fidelity, success probability). For identical inputs
    above 0.5 the output fidelity strictly exceeds the input.
    """
    _check_fidelity("f1", f1)
    _check_fidelity("f2", f2)
    p = (
        f1 * f2
        + f1 * (1.0 - f2) / 3.0
        + f2 * (1.0 - f1) / 3.0
        + 5.0 * (1.0 - f1) * (1.0 - f2) / 9.0
    )
    f_out = (f1 * f2 + (1.0 - f1) * (1.0 - f2) / 9.0) / p
    return f_out, p


def purify(
    f1: float,
    f2: float,
    noise: NoiseParams = DEFAULT_NOISE,
    model: str = "ideal-dejmps",
) -> tuple[float, float]:
    """Apply the configured purification map.

    Returns (output fidelity, success probability). ``f1`` is the retained
    ("protected") pair in the asymmetric reading of the as-printed model.
    """
    if model == "ideal-dejmps":
        return ideal_dejmps(f1, f2)
    if model == "as-printed":
        return purify_output_fidelity(f1, f2, noise), purify_success_prob(f1, f2, noise)
    raise ValueError(f"unknown purification model {model!r}; expected one of {PURIFY_MODELS}")


def purify_model_is_symmetric(model: str) -> bool:
    """True when the purification map is invariant under input exchange."""
    if model not in PURIFY_MODELS:
        raise ValueError(f"unknown purification model {model!r}")
    return model == "ideal-dejmps"

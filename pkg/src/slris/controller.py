"""ON/OFF control of K reconfigurable surfaces from a classifier posterior.

The controller first decides who is transmitting (hard argmax of the
posterior), then:

* nobody to help (Idle, or only the interferer): every RIS OFF;
* desired user alone: every RIS ON, since with no interferer an extra
  coherent reflection can only raise the SINR;
* both users: a greedy sweep over the surfaces in index order. Starting from
  all OFF, RIS_k is switched ON only if that strictly raises the SINR, so
  equal SINR keeps it OFF.

The sweep costs K SINR evaluations, i.e. linear in K; together with one CNN
inference of O(M^2 C) per RIS controller the online cost is O(M^2 C K).
``oracle_states`` is the exhaustive 2^K search used to check the sweep.
"""

from __future__ import annotations

import enum
import itertools
from dataclasses import dataclass

import numpy as np

from .channel import Layout, LinkBudget, ScenarioParams, link_budget
from .signalgen import SignalClass

MAX_ORACLE_K = 16


class Rationale(enum.Enum):
    NO_DESIRED_SIGNAL = "NoDesiredSignal"
    NO_INTERFERENCE = "NoInterference"
    SINR_COMPARISON = "SinrComparison"


@dataclass(frozen=True)
class Decision:
    inferred_class: SignalClass
    states: np.ndarray  # (K,) bool, True = ON
    predicted_sinr_db: float
    rationale: Rationale


def infer_class(posterior) -> SignalClass:
    """Argmax of a 4-way posterior; ties go to the lowest class index."""
    p = np.asarray(posterior, dtype=float)
    if p.shape != (4,) or not np.all(np.isfinite(p)) or np.any(p < 0):
        raise ValueError(f"posterior must be 4 finite non-negative values, got {posterior!r}")
    if abs(p.sum() - 1.0) > 1e-6:
        raise ValueError(f"posterior must sum to 1, got {p.sum()}")
    return SignalClass(int(np.argmax(p)))


def greedy_from_budget(budget: LinkBudget) -> np.ndarray:
    K = len(budget.ris_amp)
    states = np.zeros(K, dtype=bool)
    current = budget.sinr_linear(states)
    for k in range(K):
        states[k] = True
        candidate = budget.sinr_linear(states)
        if candidate > current:
            current = candidate
        else:
            states[k] = False
    return states


def oracle_from_budget(budget: LinkBudget) -> np.ndarray:
    K = len(budget.ris_amp)
    if K > MAX_ORACLE_K:
        raise ValueError(f"exhaustive search limited to K <= {MAX_ORACLE_K}, got {K}")
    best, best_value, best_on = None, -np.inf, K + 1
    # product() walks patterns in ascending lexicographic order (OFF < ON), so on
    # equal SINR and equal ON count the first pattern seen is the smallest
    for pattern in itertools.product((False, True), repeat=K):
        s = np.array(pattern, dtype=bool)
        value = budget.sinr_linear(s)
        n_on = int(s.sum())
        if value > best_value or (value == best_value and n_on < best_on):
            best, best_value, best_on = s, value, n_on
    return best


def greedy_states(params: ScenarioParams, lay: Layout) -> np.ndarray:
    """Sequential per-RIS ON/OFF choice with both users active."""
    return greedy_from_budget(link_budget(params, lay))


def oracle_states(params: ScenarioParams, lay: Layout) -> np.ndarray:
    """Best of all 2^K patterns with both users active (K <= 16)."""
    return oracle_from_budget(link_budget(params, lay))


def decide(posterior, params: ScenarioParams, lay: Layout) -> Decision:
    cls = infer_class(posterior)
    K = lay.K
    if not cls.desired_active:
        states = np.zeros(K, dtype=bool)
        rationale = Rationale.NO_DESIRED_SIGNAL
    elif not cls.interferer_active:
        states = np.ones(K, dtype=bool)
        rationale = Rationale.NO_INTERFERENCE
    else:
        states = greedy_states(params, lay)
        rationale = Rationale.SINR_COMPARISON
    belief = link_budget(params, lay, cls.desired_active, cls.interferer_active)
    return Decision(cls, states, belief.sinr_db(states), rationale)

"""Exact absorbing-chain oracle for K-consecutive-negatives staircases.

Written directly from the procedure rule, independent of the package's
state machine: at a level, a positive response steps one level down
(terminating with the floor flag at the minimum), K consecutive
negatives terminate; during an optional initial stage each negative
escalates one level (sticking at the maximum) until the first positive.
Mass is propagated through the finite state space until the outstanding
(unabsorbed) probability is negligible, giving the limiting-stimulus
distribution and the expected trial count to near machine precision.
"""

from collections import defaultdict


def staircase_exact(probs, k_negatives, start_index, initial_stage=False,
                    tol=1e-13, max_sweeps=100_000):
    """Exact distribution of the type-I/II limiting value and E[trials].

    ``probs[i]`` is the response probability at level i (ascending).
    Returns (type1_dist, type2_dist, expected_trials) where the dists map
    a level index (or None for "no positive seen", type I only) to its
    probability.
    """
    probs = [float(p) for p in probs]
    top = len(probs) - 1
    # live state: (idx, consec, escalating, min_pos_index or None) -> mass
    live = {(start_index, 0, bool(initial_stage), None): 1.0}
    type1 = defaultdict(float)
    type2 = defaultdict(float)
    expected_trials = 0.0
    sweeps = 0
    while live and sum(live.values()) > tol:
        sweeps += 1
        if sweeps > max_sweeps:
            raise RuntimeError("staircase oracle failed to absorb the mass")
        nxt: dict = defaultdict(float)
        for (idx, consec, escalating, min_pos), mass in live.items():
            p = probs[idx]
            expected_trials += mass  # this trial happens for all of this mass
            # positive response
            pos_mass = mass * p
            new_min = idx if min_pos is None else min(idx, min_pos)
            if idx == 0:
                type1[new_min] += pos_mass
                type2[0] += pos_mass
            else:
                nxt[(idx - 1, 0, False, new_min)] += pos_mass
            # negative response
            neg_mass = mass * (1.0 - p)
            if escalating and idx < top:
                nxt[(idx + 1, 0, True, min_pos)] += neg_mass
            else:
                consec_next = consec + 1
                if consec_next >= k_negatives:
                    type1[min_pos] += neg_mass
                    type2[idx] += neg_mass
                else:
                    nxt[(idx, consec_next, escalating, min_pos)] += neg_mass
        live = nxt
    return dict(type1), dict(type2), expected_trials


def classification_rate(type1_dist, values, threshold):
    """P(limiting value strictly below the threshold), None = insensitive."""
    return sum(
        mass for idx, mass in type1_dist.items()
        if idx is not None and values[idx] < threshold
    )

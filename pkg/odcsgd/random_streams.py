"""Counter-based random streams. Every random draw in a run comes from a stream keyed
by (seed, purpose, agent, time step), so a trajectory doesn't depend on the order in
which agents or seeds are evaluated."""


from enum import Enum

import numpy as np


class Purpose( Enum ):
    GRADIENT_NOISE = 0
    TARGET_NOISE = 1
    INITIAL_STATES = 2
    MONTE_CARLO = 3


def stream( seed, purpose, agent = 0, t = 0 ):
    """Return a fresh generator for the given key.

    :param int seed: Run seed (non-negative).
    :param odcsgd.random_streams.Purpose purpose: What the draws are used for.
    :param int agent: Agent index (0-based).
    :param int t: Time step.
    :returns numpy.random.Generator
    """

    if seed < 0 or agent < 0 or t < 0:
        raise ValueError( 'Stream keys must be non-negative: {}'.format(
            ( seed, purpose, agent, t ) ) )

    key = np.random.SeedSequence( [ seed, purpose.value, agent, t ] )
    return np.random.Generator( np.random.Philox( key ) )

"""The clipped distributed gradient iteration: consensus, clipping, descent.

Each step, with W_t from the graph schedule,

    y_i = sum_j [W_t]_ij x_j
    g_i = clip( noisy gradient of f_{i,t} at x_i, lambda_t )
    x_i <- y_i - eta_t g_i

The gradient is taken at the pre-consensus state x_i. There is no projection step.
"""


import logging

import numpy as np

from odcsgd import graph_schedule, noise_models, problem_suite, random_streams
from odcsgd.errors import DimensionMismatch, NonFiniteState

_logger = logging.getLogger( __name__ )


class StepSchedule:
    """eta_t = (a t + b)^-kappa"""

    def __init__( self, a, b, kappa ):
        if a <= 0 or b <= 0:
            raise ValueError( 'Step schedule needs a > 0 and b > 0, got a={} b={}'.format( a, b ) )

        if kappa < 0:
            raise ValueError( 'Step schedule needs kappa >= 0, got {}'.format( kappa ) )

        self.a = float( a )
        self.b = float( b )
        self.kappa = float( kappa )


    def values( self, horizon ):
        """eta_1..eta_T as an array."""
        t = np.arange( 1, horizon + 1, dtype = float )
        return ( self.a * t + self.b ) ** -self.kappa


class ClipSchedule:
    """lambda_t = c0 t^alpha"""

    def __init__( self, c0, alpha ):
        if c0 <= 0:
            raise ValueError( 'Clip coefficient must be positive, got {}'.format( c0 ) )

        if alpha < 0:
            raise ValueError( 'Clip exponent must be nonnegative, got {}'.format( alpha ) )

        self.c0 = float( c0 )
        self.alpha = float( alpha )


    def values( self, horizon ):
        t = np.arange( 1, horizon + 1, dtype = float )
        return self.c0 * t ** self.alpha


class SwarmState:
    """States of all agents at time t, one row per agent."""

    def __init__( self, states, t = 1 ):
        states = np.array( states, dtype = float )
        if states.ndim != 2:
            raise DimensionMismatch( 'Swarm states must be an N x d array, got shape {}'.format(
                states.shape ) )

        self.states = states
        self.t = t
        self.n = states.shape[ 0 ]
        self.dim = states.shape[ 1 ]


    @property
    def mean( self ):
        return self.states.mean( axis = 0 )


    def disagreement( self ):
        """max_i ||x_i - mean||"""
        return float( np.max( np.linalg.norm( self.states - self.mean, axis = 1 ) ) )


    def replace( self, states, t = None ):
        return SwarmState( states, self.t if t is None else t )


class RunTrace:
    """Everything recorded during one run. Arrays are indexed from time 1, so
    states[ 0 ] holds x_{i,1} and eta[ 0 ] holds eta_1."""

    def __init__( self, seed, states, clipped_gradients, gradient_norms, eta, lam, problem = None ):
        """
        :param int seed
        :param numpy.ndarray states: Shape (T + 1, N, d).
        :param numpy.ndarray clipped_gradients: Clipped noisy gradients, shape (T, N, d).
        :param numpy.ndarray gradient_norms: ||true local gradient||, shape (T, N).
        :param numpy.ndarray eta: Step sizes, shape (T,).
        :param numpy.ndarray lam: Clip levels, shape (T,).
        :param problem: The problem the run was solving.
        """

        self.seed = seed
        self.states = states
        self.clipped_gradients = clipped_gradients
        self.gradient_norms = gradient_norms
        self.eta = eta
        self.lam = lam
        self.problem = problem
        self.horizon = eta.shape[ 0 ]
        self.disagreement = np.max(
            np.linalg.norm( states - states.mean( axis = 1, keepdims = True ), axis = 2 ), axis = 1 )


    @property
    def n_agents( self ):
        return self.states.shape[ 1 ]


    @property
    def clipped_norms( self ):
        return np.linalg.norm( self.clipped_gradients, axis = 2 )


    @property
    def means( self ):
        return self.states.mean( axis = 1 )


    @property
    def r1( self ):
        """max_i ||x_{i,1}||"""
        return float( np.max( np.linalg.norm( self.states[ 0 ], axis = 1 ) ) )


    @property
    def max_state_norm( self ):
        """Realized B_X, the largest ||x_{i,t}|| over the run."""
        return float( np.max( np.linalg.norm( self.states, axis = 2 ) ) )


def clip( y, lam ):
    """min{1, lam/||y||} y, with clip(0) = 0.

    :param numpy.ndarray y
    :param float lam: Clip level, positive.
    :returns numpy.ndarray
    """

    if lam <= 0:
        raise ValueError( 'Clip level must be positive, got {}'.format( lam ) )

    y = np.array( y, dtype = float )
    norm = np.linalg.norm( y )
    if norm <= lam:
        return y

    return y * ( lam / norm )


def step_size( schedule, t ):
    if t < 1:
        raise ValueError( 'Time steps start at 1, got {}'.format( t ) )

    return ( schedule.a * t + schedule.b ) ** -schedule.kappa


def clip_level( schedule, t ):
    if t < 1:
        raise ValueError( 'Time steps start at 1, got {}'.format( t ) )

    return schedule.c0 * t ** schedule.alpha


def odcsgd_step( swarm, matrix, oracle, eta, lam, streams ):
    """Advance the swarm one step.

    :param odcsgd.odcsgd_core.SwarmState swarm: States at time t.
    :param odcsgd.graph_schedule.WeightMatrix matrix: W_t.
    :param odcsgd.noise_models.GradientOracle oracle
    :param float eta: Step size.
    :param float lam: Clip level.
    :param streams: One random stream per agent for this step, or a callable taking
        an agent index and returning one.
    :returns tuple: The swarm at time t + 1, the clipped gradients (N, d) and the
        true gradient norms per agent.
    """

    if eta <= 0 or lam <= 0:
        raise ValueError( 'Need eta > 0 and lambda > 0, got {} and {}'.format( eta, lam ) )

    if swarm.dim != oracle.problem.dim:
        raise DimensionMismatch( 'State dimension {} does not match problem dimension {}'.format(
            swarm.dim, oracle.problem.dim ) )

    consensus = graph_schedule.apply_consensus( matrix, swarm )

    clipped = np.empty_like( swarm.states )
    gradient_norms = np.empty( swarm.n )
    for i in range( swarm.n ):
        x = swarm.states[ i ]
        stream = streams( i ) if callable( streams ) else streams[ i ]
        clipped[ i ] = clip( noise_models.noisy_gradient( oracle, i, swarm.t, x, stream ), lam )
        gradient_norms[ i ] = np.linalg.norm( oracle.problem.gradient( i, swarm.t, x ) )

    following = consensus.replace( consensus.states - eta * clipped, swarm.t + 1 )
    return following, clipped, gradient_norms


def initial_states( n_agents, dim, box, seed ):
    """Agent states drawn uniformly from [lo, hi]^d."""

    lo, hi = box
    stream = random_streams.stream( seed, random_streams.Purpose.INITIAL_STATES )
    return stream.uniform( lo, hi, ( n_agents, dim ) )


def run( config, seed = None ):
    """Simulate one run of the configured experiment.

    :param odcsgd.config.RunConfig config
    :param int seed: Defaults to the first configured seed.
    :returns odcsgd.odcsgd_core.RunTrace
    """

    if seed is None:
        seed = config.seeds[ 0 ]

    problem = problem_suite.new_problem(
        kind = config.problem,
        n_agents = config.n_agents,
        horizon = config.horizon,
        seed = seed,
        loss_scale = config.loss_scale,
        box_bound = config.box_bound,
        target_noise = config.target_noise,
        dim = config.dim
    )

    oracle = noise_models.GradientOracle( problem, config.noise )
    return simulate( problem, oracle, config.graph, config.step, config.clip,
        initial_states( config.n_agents, problem.dim, config.initial_box, seed ),
        config.horizon, seed )


def simulate( problem, oracle, schedule, step, clip_schedule, states, horizon, seed ):
    """Run the iteration for horizon steps from the given initial states.

    :returns odcsgd.odcsgd_core.RunTrace
    """

    if schedule.n != states.shape[ 0 ]:
        raise DimensionMismatch( 'Graph schedule for {} agents, {} initial states'.format(
            schedule.n, states.shape[ 0 ] ) )

    eta = step.values( horizon )
    lam = clip_schedule.values( horizon )

    n_agents, dim = states.shape
    history = np.empty( ( horizon + 1, n_agents, dim ) )
    clipped_gradients = np.empty( ( horizon, n_agents, dim ) )
    gradient_norms = np.empty( ( horizon, n_agents ) )

    swarm = SwarmState( states, t = 1 )
    history[ 0 ] = swarm.states

    _logger.debug( 'Seed {}: {} steps, {} agents'.format( seed, horizon, n_agents ) )

    for t in range( 1, horizon + 1 ):
        streams = lambda i, t = t: random_streams.stream(
            seed, random_streams.Purpose.GRADIENT_NOISE, i, t )

        swarm, clipped_gradients[ t - 1 ], gradient_norms[ t - 1 ] = odcsgd_step(
            swarm, schedule.matrix_at( t ), oracle, eta[ t - 1 ], lam[ t - 1 ], streams )

        if not np.all( np.isfinite( swarm.states ) ):
            raise NonFiniteState( t, seed )

        history[ t ] = swarm.states

    return RunTrace( seed, history, clipped_gradients, gradient_norms, eta, lam, problem )

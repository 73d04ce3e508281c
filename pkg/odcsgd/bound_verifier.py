"""Numeric right-hand sides of the network-error, clipping and regret bounds, and
checks of those bounds against simulated traces.

Evaluators are pure functions of a BoundContext (and, for checks, a trace), so
evaluating twice gives identical results.
"""


import logging
import math
from enum import Enum

import numpy as np

from odcsgd import graph_schedule, regret_metrics
from odcsgd.errors import HypothesisViolated

# A single agent has only its unit self-loop; its consensus error is zero for any
# floor, so any value in (0, 1) can stand in for w_min.
_SINGLE_AGENT_W_MIN = 0.5

# Relative slack for floating point comparisons in pathwise checks
_PATHWISE_RTOL = 1e-9

_MIN_RUNS_FOR_PROBABILITY = 20
_RATE_MARGIN = 0.15
_RATE_CEILING = 0.95

_THEOREM1_NOTE = ( 'log(2/delta) coefficient taken from the theorem statement, (16N/3) B_X B_g; '
    'the proof carries (32/3) B_X^2 L' )

_logger = logging.getLogger( __name__ )


class CheckStatus( Enum ):
    PASS = 'pass'
    FAIL = 'fail'
    INAPPLICABLE = 'inapplicable'


    def __str__( self ):
        return self.value


class CheckResult:
    """Outcome of one bound check."""

    def __init__( self, name, bound, realized, status, note = '', margin = None ):
        """
        :param str name: Check name, as reported.
        :param float bound: Bound (or threshold) value.
        :param float realized: Realized value compared against the bound.
        :param odcsgd.bound_verifier.CheckStatus status
        :param str note: Free text detail.
        :param float margin: Defaults to bound - realized.
        """

        self.name = name
        self.bound = bound
        self.realized = realized
        self.status = status
        self.note = note

        if margin is None and bound is not None and realized is not None:
            margin = bound - realized

        self.margin = margin


    @property
    def passed( self ):
        return self.status == CheckStatus.PASS


    def describe( self ):
        line = '{} bound={} realized={} margin={} {}'.format(
            self.name, _fmt( self.bound ), _fmt( self.realized ), _fmt( self.margin ),
            self.status )

        if self.note:
            line += ' ({})'.format( self.note )

        return line


def inapplicable( name, note ):
    return CheckResult( name, None, None, CheckStatus.INAPPLICABLE, note )


def _fmt( value ):
    return 'n/a' if value is None else '{:.6g}'.format( value )


def _status( ok ):
    return CheckStatus.PASS if ok else CheckStatus.FAIL


class BoundContext:
    """Constants the bounds are evaluated with. R1, B_X and the starting gaps come
    from a trace; B_g and L from the problem over the box of half-width B_X."""

    def __init__( self, gamma, beta, r1, b_g, b_x, lipschitz, sigma_p, p, eta, lam,
        n_agents, delta, initial_gap = 0.0, value_drop = 0.0 ):
        """
        :param float gamma: Mixing constant gamma.
        :param float beta: Mixing constant beta.
        :param float r1: max_i ||x_{i,1}||.
        :param float b_g: Bound on local gradient norms.
        :param float b_x: Bound on state norms.
        :param float lipschitz: Smoothness constant L.
        :param float sigma_p: sigma with E||xi||^p <= sigma^p.
        :param float p: Tail index.
        :param numpy.ndarray eta: eta_1..eta_T.
        :param numpy.ndarray lam: lambda_1..lambda_T.
        :param int n_agents: N.
        :param float delta: Failure probability, in (0, 1).
        :param float initial_gap: 1/2 sum_i ||x_{i,1} - x*_1||^2.
        :param float value_drop: f_1(mean_1) - f_{T+1}(mean_{T+1}).
        """

        if not 0 < delta < 1:
            raise ValueError( 'delta must be in (0, 1), got {}'.format( delta ) )

        if not 0 < beta < 1:
            raise ValueError( 'beta must be in (0, 1), got {}'.format( beta ) )

        self.gamma = gamma
        self.beta = beta
        self.r1 = r1
        self.b_g = b_g
        self.b_x = b_x
        self.lipschitz = lipschitz
        self.sigma_p = sigma_p
        self.p = p
        self.eta = np.asarray( eta, dtype = float )
        self.lam = np.asarray( lam, dtype = float )
        self.n_agents = n_agents
        self.delta = delta
        self.initial_gap = initial_gap
        self.value_drop = value_drop


    @property
    def horizon( self ):
        return self.eta.shape[ 0 ]


    @property
    def sigma_pow_p( self ):
        return self.sigma_p ** self.p


class ClipDecomposition:
    """Monte-Carlo estimates of the bias and fluctuation of a clipped noisy gradient."""

    def __init__( self, theta_b, theta_b_se, theta_u_sq_mean, theta_u_sq_se, theta_u_max_norm,
        lam, bias_bound, fluctuation_bound ):

        self.theta_b = theta_b
        self.theta_b_se = theta_b_se
        self.theta_u_sq_mean = theta_u_sq_mean
        self.theta_u_sq_se = theta_u_sq_se
        self.theta_u_max_norm = theta_u_max_norm
        self.lam = lam
        self.bias_bound = bias_bound
        self.fluctuation_bound = fluctuation_bound


    @property
    def theta_b_norm( self ):
        return float( np.linalg.norm( self.theta_b ) )


    def bias_within( self ):
        """||theta_b|| <= 4 sigma^p lambda^(1-p), up to three standard errors."""
        return self.theta_b_norm <= self.bias_bound + 3 * self.theta_b_se


    def fluctuation_within( self ):
        """E||theta_u||^2 <= 16 sigma^p lambda^(2-p), up to three standard errors."""
        return self.theta_u_sq_mean <= self.fluctuation_bound + 3 * self.theta_u_sq_se


    def cap_within( self ):
        return self.theta_u_max_norm <= 2 * self.lam * ( 1 + _PATHWISE_RTOL )


def bound_context( trace, problem, oracle, schedule, delta, b_x_override = None ):
    """Assemble the constants for a run.

    :param odcsgd.odcsgd_core.RunTrace trace
    :param odcsgd.problem_suite.ProblemSequence problem
    :param odcsgd.noise_models.GradientOracle oracle
    :param odcsgd.graph_schedule.GraphSchedule schedule
    :param float delta: Failure probability.
    :param float b_x_override: Declared B_X; the realized max state norm otherwise.
    :returns odcsgd.bound_verifier.BoundContext
    """

    w_min = schedule.w_min
    if w_min >= 1:
        w_min = _SINGLE_AGENT_W_MIN

    mixing = graph_schedule.mixing_constants( w_min, schedule.n, schedule.window_b )

    b_x = trace.max_state_norm if b_x_override is None else float( b_x_override )
    constants = problem.constants( box_bound = b_x )

    initial_gap = 0.0
    if problem.convex:
        gaps = trace.states[ 0 ] - problem.minimizer( 1 )
        initial_gap = 0.5 * float( np.sum( np.square( gaps ) ) )

    horizon = trace.horizon
    value_drop = ( problem.global_value( 1, trace.means[ 0 ] ) -
        problem.global_value( horizon + 1, trace.means[ horizon ] ) )

    return BoundContext(
        gamma = mixing.gamma,
        beta = mixing.beta,
        r1 = trace.r1,
        b_g = constants[ 'b_g' ],
        b_x = b_x,
        lipschitz = constants[ 'lipschitz' ],
        sigma_p = oracle.effective_sigma_p(),
        p = oracle.noise.tail_p,
        eta = trace.eta,
        lam = trace.lam,
        n_agents = trace.n_agents,
        delta = delta,
        initial_gap = initial_gap,
        value_drop = value_drop
    )


def lemma2_rhs( t, ctx ):
    """Bound on ||x_{i,t+1} - mean_{t+1}||:
    N gamma beta^t R1 + 2 lambda_t eta_t + N gamma sum_{l<t} beta^(t-l) lambda_l eta_l.

    :param int t: Time step, 1 <= t <= T.
    :param odcsgd.bound_verifier.BoundContext ctx
    :returns float
    """

    if not 1 <= t <= ctx.horizon:
        raise ValueError( 'Time step {} outside [1, {}]'.format( t, ctx.horizon ) )

    n, gamma, beta = ctx.n_agents, ctx.gamma, ctx.beta
    products = ctx.lam[ :t - 1 ] * ctx.eta[ :t - 1 ]
    powers = beta ** ( t - np.arange( 1, t ) )

    return float( n * gamma * beta ** t * ctx.r1 + 2 * ctx.lam[ t - 1 ] * ctx.eta[ t - 1 ] +
        n * gamma * np.sum( powers * products ) )


def lemma2_rhs_series( ctx ):
    """lemma2_rhs for t = 1..T, with the inner sum carried recursively."""

    n, gamma, beta = ctx.n_agents, ctx.gamma, ctx.beta
    products = ctx.lam * ctx.eta

    rhs = np.empty( ctx.horizon )
    carried = 0.0
    for t in range( 1, ctx.horizon + 1 ):
        rhs[ t - 1 ] = n * gamma * beta ** t * ctx.r1 + 2 * products[ t - 1 ] + n * gamma * carried
        carried = beta * ( carried + products[ t - 1 ] )

    return rhs


def lemma2_check( trace, ctx ):
    """Every agent's distance from the mean at t + 1 is within lemma2_rhs(t), for all t.

    :returns odcsgd.bound_verifier.CheckResult
    """

    if not trace.horizon:
        return inapplicable( 'lemma2_network_error', 'empty run' )

    rhs = lemma2_rhs_series( ctx )
    realized = trace.disagreement[ 1: ]
    margins = rhs - realized
    violations = int( np.count_nonzero( realized > rhs * ( 1 + _PATHWISE_RTOL ) ) )
    worst = int( np.argmin( margins ) )

    return CheckResult( 'lemma2_network_error', float( rhs[ worst ] ), float( realized[ worst ] ),
        _status( violations == 0 ), 'worst at t={}, {} violations'.format( worst + 1, violations ) )


def lemma3_rhs( horizon, ctx ):
    """Bound on sum_{t<=T} ||x_{i,t} - mean_t||^2.

    :returns float
    """

    if not 1 <= horizon <= ctx.horizon:
        raise ValueError( 'Horizon {} outside [1, {}]'.format( horizon, ctx.horizon ) )

    n, gamma, beta = ctx.n_agents, ctx.gamma, ctx.beta
    eta, lam = ctx.eta[ :horizon ], ctx.lam[ :horizon ]

    return float(
        3 * n * n * gamma * gamma * ctx.r1 ** 2 / ( 1 - beta * beta ) +
        12 * np.sum( eta ** 2 * lam ** 2 ) +
        3 * n * n * gamma * gamma / ( 1 - beta ) ** 2 * np.sum( eta ** 3 * lam ** 2 )
    )


def lemma3_check( trace, ctx ):

    if not trace.horizon:
        return inapplicable( 'lemma3_cumulative_error', 'empty run' )

    deviations = trace.states[ :trace.horizon ] - trace.means[ :trace.horizon, np.newaxis, : ]
    per_agent = np.sum( np.sum( np.square( deviations ), axis = 2 ), axis = 0 )
    bound = lemma3_rhs( trace.horizon, ctx )
    realized = float( per_agent.max() )

    return CheckResult( 'lemma3_cumulative_error', bound, realized,
        _status( realized <= bound * ( 1 + _PATHWISE_RTOL ) ),
        'worst agent {}'.format( int( per_agent.argmax() ) ) )


def displacement_check( trace, schedule ):
    """Each update moves an agent at most eta_t lambda_t away from its consensus
    point: ||x_{i,t+1} - sum_j [W_t]_ij x_{j,t}|| <= eta_t lambda_t.

    :param odcsgd.odcsgd_core.RunTrace trace
    :param odcsgd.graph_schedule.GraphSchedule schedule
    :returns odcsgd.bound_verifier.CheckResult
    """

    if not trace.horizon:
        return inapplicable( 'clipped_displacement', 'empty run' )

    ratios = np.empty( trace.horizon )
    for t in range( 1, trace.horizon + 1 ):
        consensus = schedule.matrix_at( t ).entries @ trace.states[ t - 1 ]
        moves = np.linalg.norm( trace.states[ t ] - consensus, axis = 1 )
        ratios[ t - 1 ] = moves.max() / ( trace.eta[ t - 1 ] * trace.lam[ t - 1 ] )

    worst = float( ratios.max() )
    return CheckResult( 'clipped_displacement', 1.0, worst,
        _status( worst <= 1 + _PATHWISE_RTOL ),
        'largest move over eta_t lambda_t, at t={}'.format( int( ratios.argmax() ) + 1 ) )


def clip_decomposition_estimate( oracle, x, i, t, lam, samples, stream ):
    """Estimate the bias theta_b = E[clip(g)] - grad and the fluctuation
    theta_u = clip(g) - E[clip(g)] of the clipped noisy gradient g at x.

    :param odcsgd.noise_models.GradientOracle oracle
    :param numpy.ndarray x: Point to evaluate at.
    :param int i: Agent index.
    :param int t: Time step.
    :param float lam: Clip level.
    :param int samples: Number of oracle draws, at least 10^4.
    :param numpy.random.Generator stream
    :returns odcsgd.bound_verifier.ClipDecomposition
    """

    if samples < 10 ** 4:
        raise ValueError( 'Need at least 10^4 samples, got {}'.format( samples ) )

    gradient = oracle.problem.gradient( i, t, x )
    if np.linalg.norm( gradient ) > lam / 2:
        raise HypothesisViolated( 'Gradient norm {} exceeds lambda/2 = {}'.format(
            np.linalg.norm( gradient ), lam / 2 ) )

    draws = oracle.sample_gradients( i, t, x, samples, stream )
    norms = np.linalg.norm( draws, axis = 1 )
    scales = np.minimum( 1.0, np.divide( lam, norms, out = np.ones_like( norms ),
        where = norms > 0 ) )
    clipped = draws * scales[ :, np.newaxis ]

    mean = clipped.mean( axis = 0 )
    theta_b = mean - gradient
    theta_b_se = float( np.sqrt( np.sum( clipped.var( axis = 0, ddof = 1 ) ) / samples ) )

    theta_u_sq = np.sum( np.square( clipped - mean ), axis = 1 )

    sigma_pow_p = oracle.effective_sigma_p() ** oracle.noise.tail_p
    p = oracle.noise.tail_p

    return ClipDecomposition(
        theta_b = theta_b,
        theta_b_se = theta_b_se,
        theta_u_sq_mean = float( theta_u_sq.mean() ),
        theta_u_sq_se = float( theta_u_sq.std( ddof = 1 ) / math.sqrt( samples ) ),
        theta_u_max_norm = float( np.sqrt( theta_u_sq.max() ) ),
        lam = lam,
        bias_bound = 4 * sigma_pow_p * lam ** ( 1 - p ),
        fluctuation_bound = 16 * sigma_pow_p * lam ** ( 2 - p )
    )


def clip_decomposition_checks( oracle, x, i, t, lam, samples, stream ):
    """The three clipping checks at one point, or inapplicable results when the
    gradient there is too large for the bounds to apply.

    :returns list: CheckResult objects.
    """

    names = [ 'clip_bias', 'clip_fluctuation', 'clip_fluctuation_cap' ]
    where = 'agent {} t={}'.format( i, t )

    try:
        estimate = clip_decomposition_estimate( oracle, x, i, t, lam, samples, stream )

    except HypothesisViolated as e:
        _logger.debug( 'Skipping clip checks at {}: {}'.format( where, e ) )
        return [ inapplicable( name, str( e ) ) for name in names ]

    return [
        CheckResult( names[ 0 ], estimate.bias_bound + 3 * estimate.theta_b_se,
            estimate.theta_b_norm, _status( estimate.bias_within() ), where ),
        CheckResult( names[ 1 ], estimate.fluctuation_bound + 3 * estimate.theta_u_sq_se,
            estimate.theta_u_sq_mean, _status( estimate.fluctuation_within() ), where ),
        CheckResult( names[ 2 ], 2 * lam, estimate.theta_u_max_norm,
            _status( estimate.cap_within() ), where )
    ]


def lemma6_rhs( ctx ):
    """High-probability bound on |sum_t eta_t <theta_{i,t}, x_{i,t} - x*_t>| for one
    agent, where theta_{i,t} is the clipped noisy gradient less the true one:
    8 B_X sigma^p sum eta_t lambda_t^(1-p) + (16/3) B_X B_g log(2/delta) + sqrt(2F),
    with F = 32 sigma^p B_X sum lambda_t^(2-p) eta_t^2.

    :param odcsgd.bound_verifier.BoundContext ctx
    :returns float
    """

    p = ctx.p
    eta, lam = ctx.eta, ctx.lam
    variance = 32 * ctx.sigma_pow_p * ctx.b_x * np.sum( lam ** ( 2 - p ) * eta ** 2 )

    return float(
        8 * ctx.b_x * ctx.sigma_pow_p * np.sum( eta * lam ** ( 1 - p ) ) +
        16 / 3 * ctx.b_x * ctx.b_g * math.log( 2 / ctx.delta ) +
        math.sqrt( 2 * variance )
    )


def clipped_noise_sums( trace, problem ):
    """Per agent sum_t eta_t <theta_{i,t}, x_{i,t} - x*_t>, with theta_{i,t} the
    recorded clipped gradient less the true local gradient at x_{i,t}.

    :param odcsgd.odcsgd_core.RunTrace trace
    :param odcsgd.problem_suite.ProblemSequence problem: Must be convex.
    :returns numpy.ndarray: Shape (N,).
    :raises odcsgd.errors.MinimizerUnavailable: For non-convex problems.
    """

    sums = np.zeros( trace.n_agents )
    for t in range( 1, trace.horizon + 1 ):
        minimizer = problem.minimizer( t )
        states = trace.states[ t - 1 ]
        for i in range( trace.n_agents ):
            theta = trace.clipped_gradients[ t - 1, i ] - problem.gradient( i, t, states[ i ] )
            sums[ i ] += trace.eta[ t - 1 ] * float( np.dot( theta, states[ i ] - minimizer ) )

    return sums


def lemma6_check( trace, problem, ctx ):
    """The largest per-agent |clipped_noise_sums| against lemma6_rhs.

    :returns odcsgd.bound_verifier.CheckResult
    """

    name = 'lemma6_clipped_noise'
    if not problem.convex:
        return inapplicable( name, 'no tracked minimizer for a non-convex problem' )

    if not trace.horizon:
        return inapplicable( name, 'empty run' )

    sums = np.abs( clipped_noise_sums( trace, problem ) )
    bound = lemma6_rhs( ctx )
    realized = float( sums.max() )

    return CheckResult( name, bound, realized, _status( realized <= bound ),
        'worst agent {}'.format( int( sums.argmax() ) ) )


def _mixing_ratio( ctx ):
    return ctx.n_agents * ctx.gamma / ( 1 - ctx.beta )


def theorem1_rhs( ctx, c_path ):
    """High-probability bound on the dynamic regret of a convex run.

    :param odcsgd.bound_verifier.BoundContext ctx
    :param float c_path: Path length C_T.
    :returns float
    """

    n, p = ctx.n_agents, ctx.p
    eta, lam = ctx.eta, ctx.lam
    eta_last = eta[ -1 ]
    ratio = _mixing_ratio( ctx )

    p_const = ( 2 * ctx.b_x * lam[ 0 ] + 2 * ctx.b_g * n * n ) * ratio * eta[ 0 ] + ctx.initial_gap
    q_const = ( 5 + 2 * ratio ) * n
    r_const = 2 * ctx.b_g * n * n * ( 2 + ratio )

    total = (
        p_const +
        q_const * np.sum( eta ** 2 * lam ** 2 ) +
        r_const * np.sum( eta ** 2 * lam ) +
        2 * ctx.b_x * c_path +
        16 * n / 3 * ctx.b_x * ctx.b_g * math.log( 2 / ctx.delta ) +
        8 * n * ctx.b_x * ctx.sigma_pow_p * np.sum( lam ** ( 1 - p ) * eta ) +
        8 * n * math.sqrt( ctx.sigma_pow_p ) * ctx.b_x * math.sqrt( np.sum( lam ** ( 2 - p ) * eta ** 2 ) )
    )

    return float( total / eta_last )


def theorem2_rhs( ctx, d_var ):
    """High-probability bound for a non-convex run.

    :param odcsgd.bound_verifier.BoundContext ctx
    :param float d_var: Function variation D_T.
    :returns tuple: The bound on NREG/(2N) and the same bound scaled to NREG.
    """

    n, p, lip = ctx.n_agents, ctx.p, ctx.lipschitz
    eta, lam = ctx.eta, ctx.lam
    eta_last = eta[ -1 ]
    gamma, beta = ctx.gamma, ctx.beta
    ratio = _mixing_ratio( ctx )

    p_const = ( n * ctx.value_drop + ratio * eta[ 0 ] * ctx.r1 * ctx.b_g * lip +
        36 * n ** 3 * lip ** 2 * ctx.r1 ** 2 / ( 1 - beta * beta ) )
    q_const = ctx.b_g * lip * ( 2 + ratio )
    r_const = lip / 2 + 12 * n * lip ** 2

    half = (
        p_const / eta_last +
        q_const * np.sum( eta ** 2 * lam ) / eta_last +
        r_const * np.sum( eta ** 2 * lam ** 2 ) +
        4 * n * ctx.b_g * ctx.sigma_pow_p * np.sum( lam ** ( 1 - p ) * eta ) / eta_last +
        n * d_var / eta_last +
        4 * n * ctx.b_g * ctx.sigma_p ** ( p / 2 ) * math.sqrt( np.sum( lam ** ( 2 - p ) * eta ** 2 ) ) / eta_last +
        8 / 3 * ctx.b_g ** 2 * math.log( 2 / ctx.delta ) / eta_last +
        3 * n ** 3 * lip ** 2 * gamma ** 2 / ( 1 - beta ) ** 2 * np.sum( eta ** 3 * lam ** 2 )
    )

    return float( half ), float( 2 * n * half )


def theorem1_check( ledger, ctx ):
    """Realized REG_T against the theorem bound."""

    bound = theorem1_rhs( ctx, ledger.c_path )
    realized = ledger.final_reg()
    return CheckResult( 'theorem1_regret', bound, realized, _status( realized <= bound ),
        _THEOREM1_NOTE )


def theorem2_check( ledger, ctx ):
    _, bound = theorem2_rhs( ctx, ledger.d_var )
    realized = ledger.final_nreg()
    return CheckResult( 'theorem2_regret', bound, realized, _status( realized <= bound ) )


def high_probability_check( runs, rhs_fn, delta, name = 'high_probability' ):
    """Does the bound hold in at least a 1 - delta fraction of runs, up to binomial
    slack 2 sqrt(delta (1 - delta) / R)?

    :param list runs: RunTrace objects from independent seeds.
    :param rhs_fn: Callable taking a trace and returning (realized, bound).
    :param float delta: Failure probability.
    :returns odcsgd.bound_verifier.CheckResult
    """

    if not 0 < delta < 1:
        raise ValueError( 'delta must be in (0, 1), got {}'.format( delta ) )

    count = len( runs )
    if count < _MIN_RUNS_FOR_PROBABILITY:
        _logger.warning( 'Only {} runs; high-probability check needs {}'.format(
            count, _MIN_RUNS_FOR_PROBABILITY ) )

        return inapplicable( name, 'needs at least {} runs, got {}'.format(
            _MIN_RUNS_FOR_PROBABILITY, count ) )

    held = 0
    for trace in runs:
        realized, bound = rhs_fn( trace )
        if realized <= bound:
            held += 1

    fraction = held / count
    threshold = 1 - delta - 2 * math.sqrt( delta * ( 1 - delta ) / count )
    return CheckResult( name, threshold, fraction, _status( fraction >= threshold ),
        '{} of {} runs within bound'.format( held, count ), margin = fraction - threshold )


def rate_target( p ):
    """The growth exponent (1 + p)/(2p) of the regret bound for tail index p."""

    if not 1 <= p <= 2:
        raise ValueError( 'Tail index must be in [1, 2], got {}'.format( p ) )

    return ( 1 + p ) / ( 2 * p )


def corollary_rate_check( series, p, window, name = 'regret_rate' ):
    """Fit the log-log slope of a cumulative regret series over the window and
    compare it against the predicted exponent. Passes when the slope is at most
    min(0.95, target + 0.15).

    :param series: Cumulative series; series[ t - 1 ] is the value at time t.
    :param float p: Tail index.
    :param tuple window: (t_lo, t_hi).
    :returns odcsgd.bound_verifier.CheckResult
    """

    target = rate_target( p )
    limit = min( _RATE_CEILING, target + _RATE_MARGIN )
    slope = regret_metrics.sublinearity_slope( series, window[ 0 ], window[ 1 ] )

    return CheckResult( name, limit, slope, _status( slope <= limit ),
        'target exponent {:.4g} over [{}, {}]'.format( target, window[ 0 ], window[ 1 ] ) )

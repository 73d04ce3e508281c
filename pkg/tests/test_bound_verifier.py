import math

import numpy as np
import pytest
from pytest import approx

from odcsgd import bound_verifier, odcsgd_core, problem_suite, random_streams, regret_metrics
from odcsgd.bound_verifier import BoundContext, CheckResult, CheckStatus
from odcsgd.config import from_settings
from odcsgd.noise_models import NoiseKind, NoiseModel, GradientOracle
from odcsgd.graph_schedule import WeightMatrix, GraphSchedule
from odcsgd.errors import HypothesisViolated, MinimizerUnavailable


def _hand_context( horizon = 3, **overrides ):
    """Unit constants except beta = 1/2, which keeps 1/(1 - beta) finite."""

    settings = dict( gamma = 1.0, beta = 0.5, r1 = 1.0, b_g = 1.0, b_x = 1.0, lipschitz = 1.0,
        sigma_p = 1.0, p = 1.5, eta = np.ones( horizon ), lam = np.ones( horizon ), n_agents = 2,
        delta = 0.5, initial_gap = 1.0, value_drop = 0.5 )
    settings.update( overrides )
    return BoundContext( **settings )


def _short_run( horizon = 200, seed = 0, problem = 'tracking_convex' ):
    config = from_settings( { 'problem': problem, 'horizon': horizon, 'seeds': [ seed ] } )
    trace = odcsgd_core.run( config )
    oracle = GradientOracle( trace.problem, config.noise )
    ctx = bound_verifier.bound_context( trace, trace.problem, oracle, config.graph, config.delta )
    return config, trace, ctx


def _unit_gradient_oracle( kind ):
    # f(x) = 0.5 (x - 0)^2 in one dimension, so the gradient at x = 1 has norm 1
    problem = problem_suite.QuadraticProblem( np.zeros( ( 3, 1 ) ), 1 )
    return GradientOracle( problem, NoiseModel( kind ) )


def _stream( seed = 0 ):
    return random_streams.stream( seed, random_streams.Purpose.MONTE_CARLO )


class TestNetworkErrorBounds:

    def test_lemma2_first_step( self ):
        ctx = _hand_context( eta = np.array( [ 0.5, 0.4, 0.3 ] ), lam = np.array( [ 2.0, 3.0, 4.0 ] ) )
        expected = 2 * 1 * 0.5 * 1 + 2 * 2.0 * 0.5
        assert bound_verifier.lemma2_rhs( 1, ctx ) == approx( expected )


    def test_lemma2_geometric_closed_form( self ):
        horizon = 20
        ctx = _hand_context( horizon, beta = 0.8, gamma = 1.3, r1 = 4.0,
            eta = np.full( horizon, 0.5 ), lam = np.full( horizon, 2.0 ) )
        c = 1.0
        n, gamma, beta = 2, 1.3, 0.8
        series = bound_verifier.lemma2_rhs_series( ctx )

        for t in range( 1, horizon + 1 ):
            closed = ( n * gamma * beta ** t * 4.0 + 2 * c +
                n * gamma * c * beta * ( 1 - beta ** ( t - 1 ) ) / ( 1 - beta ) )
            assert bound_verifier.lemma2_rhs( t, ctx ) == approx( closed, abs = 1e-10 )
            assert series[ t - 1 ] == approx( closed, abs = 1e-10 )


    def test_lemma3_single_step( self ):
        ctx = _hand_context( 1, eta = np.array( [ 0.5 ] ), lam = np.array( [ 2.0 ] ) )
        expected = ( 3 * 4 * 1 / ( 1 - 0.25 ) + 12 * 0.25 * 4 + 3 * 4 / 0.25 * 0.125 * 4 )
        assert bound_verifier.lemma3_rhs( 1, ctx ) == approx( expected )


    def test_lemma3_is_monotone( self ):
        ctx = _hand_context( 30, eta = np.linspace( 1, 0.1, 30 ), lam = np.linspace( 1, 3, 30 ) )
        values = [ bound_verifier.lemma3_rhs( t, ctx ) for t in range( 1, 31 ) ]
        assert np.all( np.diff( values ) >= 0 )


    @pytest.mark.parametrize( 'seed', [ 0, 1, 2 ] )
    def test_pathwise_checks_hold_on_runs( self, seed ):
        config, trace, ctx = _short_run( seed = seed )

        assert bound_verifier.lemma2_check( trace, ctx ).status == CheckStatus.PASS
        assert bound_verifier.lemma3_check( trace, ctx ).status == CheckStatus.PASS
        assert bound_verifier.displacement_check( trace, config.graph ).status == CheckStatus.PASS


    def test_pathwise_checks_hold_on_long_runs( self ):
        for seed in range( 10 ):
            config, trace, ctx = _short_run( horizon = 2000, seed = seed )

            assert bound_verifier.lemma2_check( trace, ctx ).status == CheckStatus.PASS
            assert bound_verifier.lemma3_check( trace, ctx ).status == CheckStatus.PASS


    def test_context_from_trace( self ):
        config, trace, ctx = _short_run( horizon = 20 )

        assert ctx.r1 == np.max( np.linalg.norm( trace.states[ 0 ], axis = 1 ) )
        assert ctx.b_x == trace.max_state_norm
        assert ctx.horizon == 20
        assert 0 < ctx.beta < 1 and ctx.gamma > 1


    def test_declared_state_bound( self ):
        config = from_settings( { 'horizon': 10, 'seeds': [ 0 ] } )
        trace = odcsgd_core.run( config )
        oracle = GradientOracle( trace.problem, config.noise )
        ctx = bound_verifier.bound_context( trace, trace.problem, oracle, config.graph, 0.1,
            b_x_override = 30.0 )
        assert ctx.b_x == 30.0


class TestClipDecomposition:

    def test_no_noise( self ):
        estimate = bound_verifier.clip_decomposition_estimate( _unit_gradient_oracle( NoiseKind.NONE ),
            np.array( [ 1.0 ] ), 0, 1, 10.0, 10 ** 4, _stream() )

        assert estimate.theta_b == approx( [ 0.0 ], abs = 1e-12 )
        assert estimate.theta_u_max_norm == approx( 0.0, abs = 1e-12 )


    def test_gaussian_bounds( self ):
        estimate = bound_verifier.clip_decomposition_estimate(
            _unit_gradient_oracle( NoiseKind.GAUSSIAN ), np.array( [ 1.0 ] ), 0, 1, 10.0, 10 ** 5,
            _stream( 1 ) )

        assert estimate.bias_bound == approx( 0.4, rel = 1e-6 )
        assert estimate.fluctuation_bound == approx( 16.0, rel = 1e-6 )
        assert estimate.bias_within()
        assert estimate.fluctuation_within()
        assert estimate.cap_within()


    def test_heavy_tailed_cap( self ):
        estimate = bound_verifier.clip_decomposition_estimate(
            _unit_gradient_oracle( NoiseKind.STUDENT_T2 ), np.array( [ 1.0 ] ), 0, 1, 3.0, 10 ** 4,
            _stream( 2 ) )
        assert estimate.theta_u_max_norm <= 6.0 + 1e-9


    def test_large_gradient_is_outside_hypothesis( self ):
        oracle = _unit_gradient_oracle( NoiseKind.GAUSSIAN )
        with pytest.raises( HypothesisViolated ):
            bound_verifier.clip_decomposition_estimate( oracle, np.array( [ 10.0 ] ), 0, 1, 1.0,
                10 ** 4, _stream() )

        checks = bound_verifier.clip_decomposition_checks( oracle, np.array( [ 10.0 ] ), 0, 1, 1.0,
            10 ** 4, _stream() )
        assert [ c.status for c in checks ] == [ CheckStatus.INAPPLICABLE ] * 3


class TestClippedNoiseSums:

    def test_lemma6_hand_instance( self ):
        expected = 24 + 16 / 3 * math.log( 4 ) + math.sqrt( 192 )
        assert bound_verifier.lemma6_rhs( _hand_context() ) == approx( expected )


    def test_lemma6_grows_as_delta_shrinks( self ):
        assert ( bound_verifier.lemma6_rhs( _hand_context( delta = 0.01 ) ) >
            bound_verifier.lemma6_rhs( _hand_context() ) )


    def test_sums_by_hand( self ):
        # f(x) = 0.5 ||x||^2; from x = (3, 0) the gradient (3, 0) clips to (1, 0)
        problem = problem_suite.QuadraticProblem( np.zeros( ( 2, 2 ) ), 1 )
        oracle = GradientOracle( problem, NoiseModel( NoiseKind.NONE ) )
        schedule = GraphSchedule( [ WeightMatrix( [ [ 1.0 ] ] ) ], 1 )
        trace = odcsgd_core.simulate( problem, oracle, schedule, odcsgd_core.StepSchedule( 1, 1, 1 ),
            odcsgd_core.ClipSchedule( 1, 0 ), np.array( [ [ 3.0, 0.0 ] ] ), 1, seed = 0 )

        assert trace.clipped_gradients[ 0, 0 ] == approx( [ 1.0, 0.0 ] )
        assert bound_verifier.clipped_noise_sums( trace, problem ) == approx( [ 0.5 * -6.0 ] )


    def test_check_on_run( self ):
        config, trace, ctx = _short_run( horizon = 100 )
        result = bound_verifier.lemma6_check( trace, trace.problem, ctx )
        sums = bound_verifier.clipped_noise_sums( trace, trace.problem )

        assert sums.shape == ( 6, )
        assert result.bound == approx( bound_verifier.lemma6_rhs( ctx ) )
        assert result.realized == approx( np.abs( sums ).max() )
        assert result.status in ( CheckStatus.PASS, CheckStatus.FAIL )


    def test_unclipped_noiseless_sums_vanish( self ):
        config = from_settings( { 'horizon': 50, 'seeds': [ 0 ], 'noise': { 'kind': 'none' },
            'clip': { 'c0': 1000.0, 'alpha': 0.1 } } )
        trace = odcsgd_core.run( config )
        assert bound_verifier.clipped_noise_sums( trace, trace.problem ) == approx(
            np.zeros( 6 ), abs = 1e-9 )


    def test_not_applicable_without_minimizer( self ):
        config, trace, ctx = _short_run( horizon = 20, problem = 'tracking_nonconvex' )
        result = bound_verifier.lemma6_check( trace, trace.problem, ctx )
        assert result.status == CheckStatus.INAPPLICABLE

        with pytest.raises( MinimizerUnavailable ):
            bound_verifier.clipped_noise_sums( trace, trace.problem )


class TestTheorems:

    def test_theorem1_hand_instance( self ):
        ctx = _hand_context()
        expected = ( 41 + 78 + 144 + 2 * 2.0 + 32 / 3 * math.log( 4 ) + 48 + 16 * math.sqrt( 3 ) )
        assert bound_verifier.theorem1_rhs( ctx, 2.0 ) == approx( expected )


    def test_theorem1_monotone( self ):
        ctx = _hand_context()
        assert bound_verifier.theorem1_rhs( ctx, 5.0 ) >= bound_verifier.theorem1_rhs( ctx, 1.0 )
        assert ( bound_verifier.theorem1_rhs( _hand_context( delta = 0.01 ), 1.0 ) >
            bound_verifier.theorem1_rhs( ctx, 1.0 ) )


    def test_theorem2_hand_instance( self ):
        ctx = _hand_context()
        half = ( 389 + 18 + 73.5 + 24 + 2 * 1.0 + 8 * math.sqrt( 3 ) + 8 / 3 * math.log( 4 ) + 288 )
        bound, scaled = bound_verifier.theorem2_rhs( ctx, 1.0 )
        assert bound == approx( half )
        assert scaled == approx( 4 * half )


    def test_theorem2_monotone_in_variation( self ):
        ctx = _hand_context()
        assert bound_verifier.theorem2_rhs( ctx, 3.0 )[ 0 ] > bound_verifier.theorem2_rhs( ctx, 0.0 )[ 0 ]


    def test_cubic_step_term_fades( self ):
        def ratio( horizon ):
            eta = odcsgd_core.StepSchedule( 0.5, 10, 0.5 ).values( horizon )
            lam = odcsgd_core.ClipSchedule( 2, 0.1 ).values( horizon )
            return np.sum( eta ** 3 * lam ** 2 ) / np.sum( eta ** 2 * lam ** 2 )

        assert ratio( 5000 ) < ratio( 500 ) < ratio( 50 )


    def test_theorem_checks_on_runs( self ):
        config, trace, ctx = _short_run( horizon = 100 )
        ledger = regret_metrics.build_ledger( trace, trace.problem )
        result = bound_verifier.theorem1_check( ledger, ctx )

        assert result.bound > 0
        assert result.realized == ledger.final_reg()
        assert 'statement' in result.note


    def test_theorem_rhs_positive_for_nonconvex_run( self ):
        config, trace, ctx = _short_run( horizon = 100, problem = 'tracking_nonconvex' )
        ledger = regret_metrics.build_ledger( trace, trace.problem )
        assert bound_verifier.theorem2_rhs( ctx, ledger.d_var )[ 1 ] > 0


class TestProbabilityAndRate:

    def test_too_few_runs( self ):
        result = bound_verifier.high_probability_check( list( range( 10 ) ), lambda r: ( 0, 1 ), 0.1 )
        assert result.status == CheckStatus.INAPPLICABLE


    def test_deterministic_runs( self ):
        runs = list( range( 50 ) )
        assert bound_verifier.high_probability_check( runs, lambda r: ( 0, 1 ), 0.1 ).realized == 1.0
        assert bound_verifier.high_probability_check( runs, lambda r: ( 2, 1 ), 0.1 ).realized == 0.0


    def test_binomial_slack( self ):
        runs = list( range( 50 ) )
        # 42 of 50 within: 0.84 against 0.9 - 2 sqrt(0.09 / 50) = 0.815
        result = bound_verifier.high_probability_check( runs, lambda r: ( r, 41.5 ), 0.1 )
        assert result.realized == approx( 0.84 )
        assert result.bound == approx( 0.9 - 2 * math.sqrt( 0.09 / 50 ) )
        assert result.status == CheckStatus.PASS


    def test_order_does_not_matter( self ):
        runs = list( range( 40 ) )
        check = lambda r: ( r, 30 )
        forward = bound_verifier.high_probability_check( runs, check, 0.2 )
        backward = bound_verifier.high_probability_check( runs[ ::-1 ], check, 0.2 )
        assert forward.realized == backward.realized


    def test_rate_targets( self ):
        assert bound_verifier.rate_target( 2 ) == 0.75
        assert bound_verifier.rate_target( 1 ) == 1.0


    def test_rate_check( self ):
        t = np.arange( 1, 2001, dtype = float )
        passing = bound_verifier.corollary_rate_check( t ** 0.6, 2, ( 100, 2000 ) )
        failing = bound_verifier.corollary_rate_check( t ** 0.99, 2, ( 100, 2000 ) )
        limit_at_one = bound_verifier.corollary_rate_check( t ** 0.97, 1, ( 100, 2000 ) )

        assert passing.status == CheckStatus.PASS
        assert passing.bound == approx( 0.9 )
        assert failing.status == CheckStatus.FAIL
        assert limit_at_one.bound == 0.95
        assert limit_at_one.status == CheckStatus.FAIL


    def test_describe( self ):
        line = CheckResult( 'lemma2_network_error', 2.0, 1.5, CheckStatus.PASS ).describe()
        assert line == 'lemma2_network_error bound=2 realized=1.5 margin=0.5 pass'
        assert 'n/a' in bound_verifier.inapplicable( 'x', 'why' ).describe()

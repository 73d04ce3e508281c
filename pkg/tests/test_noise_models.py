import math

import numpy as np
import pytest
from pytest import approx
from scipy import integrate, special

from odcsgd import noise_models, problem_suite, random_streams
from odcsgd.noise_models import NoiseKind, NoiseModel, GradientOracle


def _stream( seed = 0 ):
    return random_streams.stream( seed, random_streams.Purpose.MONTE_CARLO )


def _tracking_problem():
    target = problem_suite.target_trajectory( 20, noise_on = False )
    return problem_suite.ConvexTrackingProblem( target, 6 )


def _quadratic_problem( dim ):
    return problem_suite.QuadraticProblem( np.zeros( ( 5, dim ) ), 2 )


class TestStudentT2:

    def test_density_integrates_to_one( self ):
        total, _ = integrate.quad( noise_models.t2_density, -np.inf, np.inf )
        assert total == approx( 1.0, rel = 1e-6 )


    def test_cdf_closed_form( self ):
        assert noise_models.t2_cdf( 0.0 ) == 0.5
        assert noise_models.t2_cdf( 1.0 ) == approx( 0.5 + 1 / ( 2 * math.sqrt( 3 ) ) )


    def test_empirical_cdf( self ):
        draws = noise_models.sample_t2( _stream( 1 ), 10 ** 6 )
        for x in [ -2.0, -1.0, 0.0, 1.0, 2.0 ]:
            assert np.mean( draws <= x ) == approx( noise_models.t2_cdf( x ), abs = 0.005 )


    def test_pth_moment_closed_form( self ):
        p = 1.5
        # E|T|^p for Student-t with 2 degrees of freedom
        expected = ( 2 ** ( p / 2 ) * special.gamma( ( p + 1 ) / 2 ) * special.gamma( ( 2 - p ) / 2 ) /
            math.sqrt( math.pi ) )

        model = NoiseModel( NoiseKind.STUDENT_T2, tail_p = p )
        assert noise_models.pth_moment_exact( model, p ) == approx( expected, rel = 1e-3 )
        assert model.sigma_p == approx( expected ** ( 1 / p ), rel = 1e-3 )


    def test_variance_is_not_certified( self ):
        with pytest.raises( ValueError ):
            NoiseModel( NoiseKind.STUDENT_T2, tail_p = 2.0 )


class TestNoiseModels:

    def test_gaussian_second_moment( self ):
        model = NoiseModel( NoiseKind.GAUSSIAN )
        estimate = noise_models.pth_moment_estimate( model, 2.0, 10 ** 6, _stream( 2 ) )
        assert estimate == approx( 1.0, rel = 0.03 )
        assert noise_models.pth_moment_exact( model, 2.0 ) == approx( 1.0, rel = 1e-6 )


    def test_scale_multiplies_moments( self ):
        model = NoiseModel( NoiseKind.GAUSSIAN, scale = 3.0 )
        assert model.sigma_p == approx( 3.0, rel = 1e-6 )


    def test_pareto_symmetric_is_centered( self ):
        model = NoiseModel( NoiseKind.PARETO_SYMMETRIC, pareto_shape = 3.0 )
        draws = noise_models.sample_noise( model, 1, _stream( 3 ), 10 ** 5 )[ :, 0 ]
        assert np.mean( draws ) == approx( 0.0, abs = 0.02 )
        assert np.mean( draws < 0 ) == approx( 0.5, abs = 0.01 )


    @pytest.mark.parametrize( 'kind', list( NoiseKind ) )
    def test_median_is_zero( self, kind ):
        draws = noise_models.sample_noise( NoiseModel( kind ), 1, _stream( 6 ), 10 ** 6 )[ :, 0 ]
        assert np.median( draws ) == approx( 0.0, abs = 0.01 )


    def test_tail_p_must_stay_below_pareto_shape( self ):
        with pytest.raises( ValueError ):
            NoiseModel( NoiseKind.PARETO_SYMMETRIC, tail_p = 2.0, pareto_shape = 1.8 )


    def test_estimate_needs_enough_samples( self ):
        with pytest.raises( ValueError ):
            noise_models.pth_moment_estimate( NoiseModel( NoiseKind.GAUSSIAN ), 2.0, 100, _stream() )


    def test_no_noise( self ):
        model = NoiseModel( NoiseKind.NONE )
        assert model.sigma_p == 0.0
        assert not np.any( noise_models.sample_noise( model, 3, _stream(), 10 ) )


    def test_same_key_same_draws( self ):
        model = NoiseModel( 'student_t2' )
        first = noise_models.sample_noise( model, 2, _stream( 9 ), 50 )
        second = noise_models.sample_noise( model, 2, _stream( 9 ), 50 )
        assert np.array_equal( first, second )


class TestGradientOracle:

    def test_noiseless_oracle_is_exact( self ):
        problem = _tracking_problem()
        oracle = GradientOracle( problem, NoiseModel( NoiseKind.NONE ) )
        x = np.array( [ 3.0, -2.0 ] )
        for i in range( 6 ):
            assert np.array_equal( noise_models.noisy_gradient( oracle, i, 4, x, _stream() ),
                problem.gradient( i, 4, x ) )


    def test_tracking_noise_enters_along_observed_axis( self ):
        problem = _tracking_problem()
        oracle = GradientOracle( problem, NoiseModel( NoiseKind.GAUSSIAN ) )
        x = np.array( [ 3.0, -2.0 ] )

        for i in range( 6 ):
            noisy = noise_models.noisy_gradient( oracle, i, 4, x, _stream( i ) )
            other = 1 - problem.noise_axis( i )
            assert noisy[ other ] == 0.0
            assert noisy[ problem.noise_axis( i ) ] != problem.gradient( i, 4, x )[ problem.noise_axis( i ) ]


    def test_sample_gradients_shape( self ):
        oracle = GradientOracle( _quadratic_problem( 3 ), NoiseModel( NoiseKind.GAUSSIAN ) )
        draws = oracle.sample_gradients( 0, 1, np.ones( 3 ), 100, _stream() )
        assert draws.shape == ( 100, 3 )


    def test_gaussian_oracle_is_unbiased( self ):
        problem = _quadratic_problem( 2 )
        oracle = GradientOracle( problem, NoiseModel( NoiseKind.GAUSSIAN ) )
        x = np.ones( 2 )
        samples = 10 ** 5

        draws = oracle.sample_gradients( 0, 1, x, samples, _stream( 4 ) )
        error = np.linalg.norm( draws.mean( axis = 0 ) - problem.gradient( 0, 1, x ) )
        standard_error = math.sqrt( np.sum( draws.var( axis = 0, ddof = 1 ) ) / samples )
        assert error <= 3 * standard_error


    def test_effective_sigma( self ):
        noise = NoiseModel( NoiseKind.GAUSSIAN )
        assert GradientOracle( _tracking_problem(), noise ).effective_sigma_p() == noise.sigma_p
        assert ( GradientOracle( _quadratic_problem( 3 ), noise ).effective_sigma_p() ==
            approx( 3 ** 0.5 * noise.sigma_p ) )

"""Gradient noise distributions and the stochastic gradient oracle.

All supplied distributions are symmetric with zero mean, so the oracle is an unbiased
estimate of the true gradient. Student-t with two degrees of freedom has a finite
p-th moment only for p < 2.
"""


import logging
import math
from enum import Enum

import numpy as np
from scipy import integrate, special, stats

from odcsgd.errors import DimensionMismatch

_DEFAULT_PARETO_SHAPE = 2.5

_logger = logging.getLogger( __name__ )


class NoiseKind( Enum ):
    STUDENT_T2 = 'student_t2'
    GAUSSIAN = 'gaussian'
    PARETO_SYMMETRIC = 'pareto_symmetric'
    NONE = 'none'


    def __str__( self ):
        return self.value


class NoiseModel:
    """Additive noise with a certified finite p-th moment, E|xi|^p <= sigma_p^p."""

    def __init__( self, kind, scale = 1.0, tail_p = None, sigma_p = None,
        pareto_shape = _DEFAULT_PARETO_SHAPE ):
        """
        :param odcsgd.noise_models.NoiseKind kind
        :param float scale: Multiplier applied to every draw.
        :param float tail_p: The p in (1, 2] for which the moment is certified. Defaults
            to 1.5 for the heavy-tailed kinds and 2 otherwise.
        :param float sigma_p: sigma such that E|xi|^p = sigma^p. Computed by numerical
            integration when not given.
        :param float pareto_shape: Tail shape of the symmetric Pareto kind.
        """

        kind = NoiseKind( kind )

        if scale <= 0:
            raise ValueError( 'Noise scale must be positive, got {}'.format( scale ) )

        if tail_p is None:
            tail_p = 1.5 if kind in ( NoiseKind.STUDENT_T2, NoiseKind.PARETO_SYMMETRIC ) else 2.0

        if not 1 < tail_p <= 2:
            raise ValueError( 'tail_p must be in (1, 2], got {}'.format( tail_p ) )

        # Variance of t2 is infinite, so only p < 2 is certified
        if kind == NoiseKind.STUDENT_T2 and tail_p >= 2:
            raise ValueError( 'student_t2 has infinite variance; tail_p must be < 2' )

        if kind == NoiseKind.PARETO_SYMMETRIC and tail_p >= pareto_shape:
            raise ValueError( 'tail_p {} must be below the Pareto shape {}'.format(
                tail_p, pareto_shape ) )

        self.kind = kind
        self.scale = float( scale )
        self.tail_p = float( tail_p )
        self.pareto_shape = float( pareto_shape )

        if sigma_p is None:
            sigma_p = pth_moment_exact( self, self.tail_p ) ** ( 1.0 / self.tail_p )
            _logger.debug( 'Computed sigma_p {} for {} noise at p={}'.format(
                sigma_p, kind, self.tail_p ) )

        elif sigma_p < 0:
            raise ValueError( 'sigma_p must be nonnegative, got {}'.format( sigma_p ) )

        self.sigma_p = float( sigma_p )


    def __repr__( self ):
        return 'NoiseModel(kind={}, scale={}, tail_p={}, sigma_p={})'.format(
            self.kind, self.scale, self.tail_p, self.sigma_p )


class GradientOracle:
    """Noisy gradients of a problem's local objectives."""

    def __init__( self, problem, noise ):
        """
        :param problem: A problem from odcsgd.problem_suite.
        :param odcsgd.noise_models.NoiseModel noise
        """

        self.problem = problem
        self.noise = noise


    def effective_sigma_p( self ):
        """sigma for the noise vector as a whole. Noise along one axis has the scalar
        sigma; isotropic noise in d dimensions gets d^(1/p) sigma, since
        ||xi||^p <= sum_k |xi_k|^p for p <= 2."""

        if self.problem.noise_axis( 0 ) is not None:
            return self.noise.sigma_p

        return self.problem.dim ** ( 1.0 / self.noise.tail_p ) * self.noise.sigma_p


    def sample_gradients( self, i, t, x, samples, stream ):
        """Draw many noisy gradients at the same point.

        :returns numpy.ndarray: Array of shape (samples, dim).
        """

        gradient = self.problem.gradient( i, t, x )
        axis = self.problem.noise_axis( i )

        if axis is None:
            noise = sample_noise( self.noise, self.problem.dim, stream, samples )
        else:
            noise = np.zeros( ( samples, self.problem.dim ) )
            noise[ :, axis ] = sample_noise( self.noise, 1, stream, samples )[ :, 0 ]

        return gradient + noise


def t2_density( x ):
    """Density of Student-t with 2 degrees of freedom, written with Gamma functions."""

    coefficient = special.gamma( 1.5 ) / ( special.gamma( 1.0 ) * math.sqrt( 2 * math.pi ) )
    return coefficient * ( 1 + np.square( x ) / 2 ) ** -1.5


def t2_cdf( x ):
    return 0.5 + x / ( 2 * np.sqrt( 2 + np.square( x ) ) )


def sample_t2( stream, size = None ):
    """Student-t2 draws as a standard normal over sqrt(chi-square_2 / 2); chi-square
    with 2 degrees of freedom halved is a unit exponential.

    :param numpy.random.Generator stream
    :param size: Output shape; a scalar float when None.
    """

    normal = stream.standard_normal( size )
    exponential = stream.standard_exponential( size )
    return normal / np.sqrt( exponential )


def sample_noise( model, dim, stream, samples = None ):
    """i.i.d. coordinates from the model, times model.scale.

    :param odcsgd.noise_models.NoiseModel model
    :param int dim: Vector dimension.
    :param numpy.random.Generator stream
    :param int samples: When given, return an array of shape (samples, dim).
    :returns numpy.ndarray
    """

    if dim < 1:
        raise DimensionMismatch( 'Noise dimension must be positive, got {}'.format( dim ) )

    shape = ( dim, ) if samples is None else ( samples, dim )

    if model.kind == NoiseKind.NONE:
        return np.zeros( shape )

    if model.kind == NoiseKind.STUDENT_T2:
        draws = sample_t2( stream, shape )

    elif model.kind == NoiseKind.GAUSSIAN:
        draws = stream.standard_normal( shape )

    elif model.kind == NoiseKind.PARETO_SYMMETRIC:
        signs = np.where( stream.random( shape ) < 0.5, -1.0, 1.0 )
        draws = signs * stream.pareto( model.pareto_shape, shape )

    else:
        raise ValueError( 'Unknown noise kind: {}'.format( model.kind ) )

    return model.scale * draws


def noisy_gradient( oracle, i, t, x, stream ):
    """A stochastic gradient of f_{i,t} at x. For tracking problems the scalar noise
    enters along the agent's observation axis; otherwise it is an isotropic vector.

    :param odcsgd.noise_models.GradientOracle oracle
    :param int i: Agent index (0-based).
    :param int t: Time step.
    :param numpy.ndarray x: Agent state.
    :param numpy.random.Generator stream: Stream for this (agent, time).
    :returns numpy.ndarray
    """

    problem = oracle.problem
    gradient = problem.gradient( i, t, x )

    if oracle.noise.kind == NoiseKind.NONE:
        return gradient

    axis = problem.noise_axis( i )
    if axis is None:
        return gradient + sample_noise( oracle.noise, problem.dim, stream )

    noisy = gradient.copy()
    noisy[ axis ] += sample_noise( oracle.noise, 1, stream )[ 0 ]
    return noisy


def pth_moment_estimate( model, p, samples, stream ):
    """Monte-Carlo estimate of E|xi|^p for a scalar draw."""

    if samples < 10 ** 4:
        raise ValueError( 'Need at least 10^4 samples, got {}'.format( samples ) )

    if model.kind == NoiseKind.NONE:
        return 0.0

    draws = sample_noise( model, 1, stream, samples )[ :, 0 ]
    return float( np.mean( np.abs( draws ) ** p ) )


def pth_moment_exact( model, p ):
    """E|xi|^p by numerical integration of the model's density.

    :returns float
    """

    if model.kind == NoiseKind.NONE:
        return 0.0

    if model.kind == NoiseKind.STUDENT_T2:
        density = t2_density

    elif model.kind == NoiseKind.GAUSSIAN:
        density = stats.norm.pdf

    elif model.kind == NoiseKind.PARETO_SYMMETRIC:
        # Half the mass of a Lomax law on each side of zero
        lomax = stats.lomax( c = model.pareto_shape )
        density = lambda x: 0.5 * lomax.pdf( x )

    else:
        raise ValueError( 'Unknown noise kind: {}'.format( model.kind ) )

    # All densities are even
    half, _ = integrate.quad( lambda x: x ** p * density( x ), 0, np.inf, limit = 200 )
    return model.scale ** p * 2 * half

"""Time-indexed objective sequences.

The tracking problems follow a target moving in the plane from (10, 10) to the origin.
Agent i (0-based) observes coordinate i mod 2 of the target, so agents with odd
labels (1, 3, 5) see the first coordinate and the others the second. A problem holds
all the local objectives f_{i,t}; the global objective is f_t = sum_i f_{i,t}.
"""


import logging
import math
from enum import Enum

import numpy as np

from odcsgd import random_streams
from odcsgd.errors import CoordinateUnobserved, MinimizerUnavailable, DimensionMismatch

TARGET_START = ( 10.0, 10.0 )
TARGET_DRIFT = 10.0

# Default state box half-width and grid density for sup-norm variations
DEFAULT_BOX_BOUND = 25.0
_VARIATION_GRID_POINTS = 201

_logger = logging.getLogger( __name__ )


class ProblemKind( Enum ):
    # Second item is the default loss scale
    TRACKING_CONVEX = ( 'tracking_convex', 0.5 )
    TRACKING_NONCONVEX = ( 'tracking_nonconvex', 0.25 )
    QUADRATIC = ( 'quadratic', 0.5 )


    def __init__( self, config_name, default_loss_scale ):
        self.config_name = config_name
        self.default_loss_scale = default_loss_scale


    def __str__( self ):
        return self.config_name


    @classmethod
    def from_name( cls, name ):
        for kind in cls:
            if kind.config_name == name:
                return kind

        raise ValueError( 'Unknown problem: {}'.format( name ) )


class TrackingTarget:
    """Target positions x*_0..x*_T."""

    def __init__( self, trajectory, drift, noise_std ):
        """
        :param numpy.ndarray trajectory: Shape (T + 1, 2).
        :param numpy.ndarray drift: v_1..v_T, shape (T, 2).
        :param float noise_std: Standard deviation of each coordinate of omega_t.
        """

        trajectory.setflags( write = False )
        self.trajectory = trajectory
        self.drift = drift
        self.noise_std = noise_std
        self.horizon = trajectory.shape[ 0 ] - 1


    def position( self, t ):
        """x*_t; times past the horizon keep the final position."""
        return self.trajectory[ min( t, self.horizon ) ]


class ObservationMap:
    """Which coordinate each agent observes."""

    def __init__( self, n_agents, dim = 2 ):
        self.n_agents = n_agents
        self.dim = dim
        self.axes = tuple( i % dim for i in range( n_agents ) )


    def observers( self, axis ):
        return [ i for i, a in enumerate( self.axes ) if a == axis ]


    def observation( self, i, target_position ):
        """z_{i,t} = e_{k_i}^T x*_t."""
        return target_position[ self.axes[ i ] ]


def target_trajectory( horizon, noise_on, stream = None ):
    """Generate x*_t = x*_{t-1} + omega_t + v_t for t = 1..T, starting at (10, 10),
    with v_t = -10 (1/T, sqrt(t/T) - sqrt((t-1)/T)) and omega_t Gaussian with
    variance (1/T)^2 per coordinate.

    :param int horizon: T.
    :param bool noise_on: Whether omega_t is drawn (otherwise zero).
    :param numpy.random.Generator stream: Required when noise_on.
    :returns odcsgd.problem_suite.TrackingTarget
    """

    if horizon < 1:
        raise ValueError( 'Horizon must be at least 1, got {}'.format( horizon ) )

    t = np.arange( 1, horizon + 1 )
    drift = -TARGET_DRIFT * np.column_stack( (
        np.full( horizon, 1.0 / horizon ),
        np.sqrt( t / horizon ) - np.sqrt( ( t - 1 ) / horizon )
    ) )

    noise_std = 1.0 / horizon
    steps = drift.copy()
    if noise_on:
        if stream is None:
            raise ValueError( 'A random stream is needed for target noise.' )

        steps += noise_std * stream.standard_normal( ( horizon, 2 ) )

    trajectory = np.vstack( ( np.array( TARGET_START ), TARGET_START + np.cumsum( steps, axis = 0 ) ) )
    return TrackingTarget( trajectory, drift, noise_std )


def convex_grad( i, t, x, target, observation_map = None, loss_scale = 0.5 ):
    """Gradient of loss_scale * (z_{i,t} - e_k^T x)^2; with the default scale of 1/2,
    e_k e_k^T (x - x*_t).

    :returns numpy.ndarray
    """

    axis = _axis( i, observation_map )
    gradient = np.zeros_like( x, dtype = float )
    gradient[ axis ] = _convex_slope( x[ axis ], target.position( t )[ axis ], loss_scale )
    return gradient


def nonconvex_grad( i, t, x, target, observation_map = None, loss_scale = 0.25 ):
    """Gradient of loss_scale * (z_{i,t}^2 - (e_k^T x)^2)^2; with the default scale of
    1/4, -(z^2 - u^2) u e_k where u = e_k^T x.

    :returns numpy.ndarray
    """

    axis = _axis( i, observation_map )
    gradient = np.zeros_like( x, dtype = float )
    gradient[ axis ] = _nonconvex_slope( x[ axis ], target.position( t )[ axis ], loss_scale )
    return gradient


def global_minimizer( t, target, observation_map ):
    """x*_t, the minimizer of the convex global objective when every coordinate is
    observed by some agent."""

    for axis in range( observation_map.dim ):
        if not observation_map.observers( axis ):
            raise CoordinateUnobserved( 'No agent observes coordinate {}'.format( axis ) )

    return target.position( t ).copy()


def _convex_slope( u, z, loss_scale ):
    return 2 * loss_scale * ( u - z )


def _nonconvex_slope( u, z, loss_scale ):
    return -4 * loss_scale * ( z * z - np.square( u ) ) * u


def _axis( i, observation_map ):
    if observation_map is None:
        return i % 2

    return observation_map.axes[ i ]


class ProblemSequence:
    """Superclass for problems. Subclasses provide the local value and gradient, and
    the per-coordinate loss used to evaluate sup-norm variations."""

    convex = True

    def __init__( self, n_agents, dim, horizon, loss_scale, box_bound ):
        if n_agents < 1 or dim < 1:
            raise ValueError( 'Need at least one agent and one dimension.' )

        if loss_scale <= 0:
            raise ValueError( 'Loss scale must be positive, got {}'.format( loss_scale ) )

        if box_bound <= 0:
            raise ValueError( 'Box bound must be positive, got {}'.format( box_bound ) )

        self.n_agents = n_agents
        self.dim = dim
        self.horizon = horizon
        self.loss_scale = loss_scale
        self.box_bound = box_bound


    def value( self, i, t, x ):
        raise NotImplementedError


    def gradient( self, i, t, x ):
        raise NotImplementedError


    def noise_axis( self, i ):
        """The axis along which agent i's gradient noise enters, or None for isotropic
        noise."""
        return None


    def global_value( self, t, x ):
        return sum( self.value( i, t, x ) for i in range( self.n_agents ) )


    def global_gradient( self, t, x ):
        return sum( self.gradient( i, t, x ) for i in range( self.n_agents ) )


    def global_values( self, t, points ):
        """f_t at each row of points."""
        return np.array( [ self.global_value( t, x ) for x in points ] )


    def global_gradients( self, t, points ):
        return np.array( [ self.global_gradient( t, x ) for x in points ] )


    def minimizer( self, t ):
        raise MinimizerUnavailable( '{} has no tracked global minimizer'.format(
            type( self ).__name__ ) )


    def stationary_point( self, t ):
        return self.minimizer( t )


    def constants( self, box_bound = None ):
        """Smoothness L and gradient bound B_g of the local objectives over the box
        |x_k| <= B_X.

        :returns dict: Keys lipschitz, b_g, b_x.
        """
        raise NotImplementedError


    def variation_increment( self, t, box_bound = None ):
        """sup over the box of |f_t(x) - f_{t-1}(x)|."""
        raise NotImplementedError


class TrackingProblem( ProblemSequence ):
    """Superclass for the convex and non-convex target tracking problems."""

    def __init__( self, target, n_agents, loss_scale, box_bound = DEFAULT_BOX_BOUND ):
        super().__init__( n_agents, 2, target.horizon, loss_scale, box_bound )
        self.target = target
        self.observation_map = ObservationMap( n_agents, 2 )

        # Number of agents observing each coordinate
        self._observer_counts = np.array(
            [ len( self.observation_map.observers( axis ) ) for axis in range( 2 ) ] )

        self._target_extent = float( np.max( np.abs( target.trajectory ) ) )


    def noise_axis( self, i ):
        return self.observation_map.axes[ i ]


    def global_values( self, t, points ):
        points = np.atleast_2d( points )
        position = self.target.position( t )
        return sum(
            self._observer_counts[ axis ] * self._coordinate_loss( points[ :, axis ], position[ axis ] )
            for axis in range( 2 )
        )


    def global_value( self, t, x ):
        return float( self.global_values( t, x )[ 0 ] )


    def global_gradients( self, t, points ):
        points = np.atleast_2d( points )
        position = self.target.position( t )
        return np.column_stack( [
            self._observer_counts[ axis ] * self._coordinate_slope( points[ :, axis ], position[ axis ] )
            for axis in range( 2 )
        ] )


    def global_gradient( self, t, x ):
        return self.global_gradients( t, x )[ 0 ]


    def value( self, i, t, x ):
        axis = self.observation_map.axes[ i ]
        return float( self._coordinate_loss( x[ axis ], self.target.position( t )[ axis ] ) )


    def variation_increment_grid( self, t, box_bound = None ):
        """Sup-norm change between f_{t-1} and f_t over the box, on a grid that
        includes the box corners. The objective is a sum of per-coordinate terms, so the sup of |f_t - f_{t-1}| over the box is the
        larger of |sum of per-axis maxima| and |sum of per-axis minima|."""

        if t < 2:
            raise ValueError( 'Variation increments start at t=2, got {}'.format( t ) )

        box_bound = self.box_bound if box_bound is None else box_bound
        grid = np.linspace( -box_bound, box_bound, _VARIATION_GRID_POINTS )
        now = self.target.position( t )
        before = self.target.position( t - 1 )

        highest = 0.0
        lowest = 0.0
        for axis in range( 2 ):
            difference = self._observer_counts[ axis ] * (
                self._coordinate_loss( grid, now[ axis ] ) -
                self._coordinate_loss( grid, before[ axis ] ) )
            highest += difference.max()
            lowest += difference.min()

        return float( max( abs( highest ), abs( lowest ) ) )


    def _coordinate_loss( self, u, z ):
        raise NotImplementedError


    def _coordinate_slope( self, u, z ):
        raise NotImplementedError


class ConvexTrackingProblem( TrackingProblem ):
    """f_{i,t}(x) = loss_scale (z_{i,t} - e_k^T x)^2."""

    convex = True

    def __init__( self, target, n_agents, loss_scale = 0.5, box_bound = DEFAULT_BOX_BOUND ):
        super().__init__( target, n_agents, loss_scale, box_bound )


    def gradient( self, i, t, x ):
        return convex_grad( i, t, x, self.target, self.observation_map, self.loss_scale )


    def minimizer( self, t ):
        return global_minimizer( t, self.target, self.observation_map )


    def constants( self, box_bound = None ):
        box_bound = self.box_bound if box_bound is None else box_bound
        return {
            'lipschitz': 2 * self.loss_scale,
            'b_g': 2 * self.loss_scale * ( box_bound + self._target_extent ),
            'b_x': box_bound
        }


    def variation_increment( self, t, box_bound = None ):
        """sup over the box of |f_t(x) - f_{t-1}(x)|, in closed form. Each per-axis
        difference s n_k ((a - u)^2 - (b - u)^2) is affine in u, so the sup sits at a
        corner."""

        if t < 2:
            raise ValueError( 'Variation increments start at t=2, got {}'.format( t ) )

        box_bound = self.box_bound if box_bound is None else box_bound

        now = self.target.position( t )
        before = self.target.position( t - 1 )
        offset = 0.0
        slope_mass = 0.0
        for axis in range( 2 ):
            weight = self.loss_scale * self._observer_counts[ axis ]
            a, b = now[ axis ], before[ axis ]
            offset += weight * ( a * a - b * b )
            slope_mass += abs( 2 * weight * ( a - b ) )

        return float( abs( offset ) + box_bound * slope_mass )


    def _coordinate_loss( self, u, z ):
        return self.loss_scale * np.square( z - u )


    def _coordinate_slope( self, u, z ):
        return _convex_slope( u, z, self.loss_scale )


class NonconvexTrackingProblem( TrackingProblem ):
    """f_{i,t}(x) = loss_scale (z_{i,t}^2 - (e_k^T x)^2)^2. Both x*_t and -x*_t are
    stationary points (and global minimizers, with value zero)."""

    convex = False

    def __init__( self, target, n_agents, loss_scale = 0.25, box_bound = DEFAULT_BOX_BOUND ):
        super().__init__( target, n_agents, loss_scale, box_bound )


    def gradient( self, i, t, x ):
        return nonconvex_grad( i, t, x, self.target, self.observation_map, self.loss_scale )


    def stationary_point( self, t ):
        return self.target.position( t ).copy()


    def constants( self, box_bound = None ):
        box_bound = self.box_bound if box_bound is None else box_bound
        extent = self._target_extent

        # Second derivative in u is 4 s (3u^2 - z^2)
        return {
            'lipschitz': 4 * self.loss_scale * max( 3 * box_bound ** 2, extent ** 2 ),
            'b_g': 4 * self.loss_scale * ( extent ** 2 + box_bound ** 2 ) * box_bound,
            'b_x': box_bound
        }


    def variation_increment( self, t, box_bound = None ):
        # Each per-axis difference is affine in u^2, so the grid (which holds 0 and
        # the box corners) attains the sup.
        return self.variation_increment_grid( t, box_bound )


    def _coordinate_loss( self, u, z ):
        return self.loss_scale * np.square( z * z - np.square( u ) )


    def _coordinate_slope( self, u, z ):
        return _nonconvex_slope( u, z, self.loss_scale )


class QuadraticProblem( ProblemSequence ):
    """f_{i,t}(x) = loss_scale ||x - c_t||^2 for every agent, with isotropic gradient
    noise. A generic problem in any dimension."""

    convex = True

    def __init__( self, centers, n_agents, loss_scale = 0.5, box_bound = DEFAULT_BOX_BOUND ):
        """
        :param numpy.ndarray centers: c_0..c_T, shape (T + 1, d).
        """

        centers = np.atleast_2d( np.array( centers, dtype = float ) )
        super().__init__( n_agents, centers.shape[ 1 ], centers.shape[ 0 ] - 1, loss_scale,
            box_bound )

        centers.setflags( write = False )
        self.centers = centers


    def center( self, t ):
        return self.centers[ min( t, self.horizon ) ]


    def value( self, i, t, x ):
        return float( self.loss_scale * np.sum( np.square( x - self.center( t ) ) ) )


    def gradient( self, i, t, x ):
        if x.shape != ( self.dim, ):
            raise DimensionMismatch( 'Expected a state of dimension {}, got shape {}'.format(
                self.dim, x.shape ) )

        return 2 * self.loss_scale * ( x - self.center( t ) )


    def minimizer( self, t ):
        return self.center( t ).copy()


    def constants( self, box_bound = None ):
        box_bound = self.box_bound if box_bound is None else box_bound
        extent = float( np.max( np.linalg.norm( self.centers, axis = 1 ) ) )
        radius = box_bound * math.sqrt( self.dim )
        return {
            'lipschitz': 2 * self.loss_scale,
            'b_g': 2 * self.loss_scale * ( radius + extent ),
            'b_x': box_bound
        }


    def variation_increment( self, t, box_bound = None ):
        """n s ((||c_t||^2 - ||c_{t-1}||^2) - 2 <x, c_t - c_{t-1}>) is affine in x."""

        if t < 2:
            raise ValueError( 'Variation increments start at t=2, got {}'.format( t ) )

        box_bound = self.box_bound if box_bound is None else box_bound
        now, before = self.center( t ), self.center( t - 1 )
        weight = self.n_agents * self.loss_scale
        offset = weight * ( now @ now - before @ before )
        return float( abs( offset ) + box_bound * np.sum( np.abs( 2 * weight * ( now - before ) ) ) )


def new_problem( kind, n_agents, horizon, seed, loss_scale = None, box_bound = DEFAULT_BOX_BOUND,
    target_noise = True, dim = 2 ):
    """Build the problem for one run. The target (and its noise) depends on the seed.

    :param odcsgd.problem_suite.ProblemKind kind
    :param int n_agents
    :param int horizon: T; a horizon of 0 still builds a one-step target.
    :param int seed: Run seed.
    :param float loss_scale: Defaults to the kind's scale.
    :param float box_bound: B_X for the state box.
    :param bool target_noise: Whether the target takes random steps.
    :param int dim: State dimension. Tracking problems are planar; the quadratic problem
        follows the target in its first two coordinates and is centered at 0 in the rest.
    """

    if loss_scale is None:
        loss_scale = kind.default_loss_scale

    if kind != ProblemKind.QUADRATIC and dim != 2:
        raise DimensionMismatch( '{} is planar, got dimension {}'.format( kind, dim ) )

    stream = random_streams.stream( seed, random_streams.Purpose.TARGET_NOISE )
    target = target_trajectory( max( horizon, 1 ), target_noise, stream )

    if kind == ProblemKind.TRACKING_CONVEX:
        return ConvexTrackingProblem( target, n_agents, loss_scale, box_bound )

    if kind == ProblemKind.TRACKING_NONCONVEX:
        return NonconvexTrackingProblem( target, n_agents, loss_scale, box_bound )

    if kind == ProblemKind.QUADRATIC:
        centers = np.zeros( ( target.trajectory.shape[ 0 ], dim ) )
        shared = min( dim, 2 )
        centers[ :, :shared ] = target.trajectory[ :, :shared ]
        return QuadraticProblem( centers, n_agents, loss_scale, box_bound )

    raise ValueError( 'Unknown problem: {}'.format( kind ) )

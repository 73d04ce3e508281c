"""Time-varying communication graphs: doubly stochastic weight matrices applied
cyclically, connectivity checks over windows, and the consensus mixing constants."""


import logging

import numpy as np
import networkx as nx

from odcsgd.errors import NegativeSelfLoop, DimensionMismatch, ValidationError

# Row and column sums of built matrices must match 1 to this tolerance.
DOUBLY_STOCHASTIC_TOL = 1e-12

_logger = logging.getLogger( __name__ )


class WeightMatrix:
    """A weight matrix W_t. Entries aren't validated here; see
    validate_doubly_stochastic()."""

    def __init__( self, entries ):
        """
        :param entries: Square array-like of nonnegative weights.
        """

        entries = np.array( entries, dtype = float )
        if entries.ndim != 2 or entries.shape[ 0 ] != entries.shape[ 1 ]:
            raise DimensionMismatch( 'Weight matrix must be square, got shape {}'.format(
                entries.shape ) )

        entries.setflags( write = False )
        self.entries = entries
        self.n = entries.shape[ 0 ]


    @property
    def w_min( self ):
        """Smallest nonzero entry."""
        return float( self.entries[ self.entries > 0 ].min() )


    def edges( self ):
        """Directed edges (i, j), i != j, such that agent i receives from agent j.

        :returns set
        """

        rows, cols = np.nonzero( self.entries )
        return { ( int( i ), int( j ) ) for i, j in zip( rows, cols ) if i != j }


class GraphSchedule:
    """A periodic sequence of weight matrices, W_t = matrices[ ( t - 1 ) % period ]."""

    def __init__( self, matrices, window_b ):
        """
        :param list matrices: WeightMatrix objects, applied in order and cyclically.
        :param int window_b: Connectivity window B.
        """

        if not matrices:
            raise ValueError( 'A graph schedule needs at least one matrix.' )

        if window_b < 1:
            raise ValueError( 'Invalid window B: {}'.format( window_b ) )

        sizes = { m.n for m in matrices }
        if len( sizes ) != 1:
            raise DimensionMismatch( 'Matrices of different sizes in schedule: {}'.format(
                sorted( sizes ) ) )

        self.matrices = tuple( matrices )
        self.period = len( matrices )
        self.window_b = window_b
        self.n = matrices[ 0 ].n


    def matrix_at( self, t ):
        if t < 1:
            raise ValueError( 'Time steps start at 1, got {}'.format( t ) )

        return self.matrices[ ( t - 1 ) % self.period ]


    @property
    def w_min( self ):
        return min( m.w_min for m in self.matrices )


class MixingConstants:

    def __init__( self, gamma, beta ):
        self.gamma = gamma
        self.beta = beta


    def __repr__( self ):
        return 'MixingConstants(gamma={!r}, beta={!r})'.format( self.gamma, self.beta )


def build_edge_weight_matrix( n, edges, w ):
    """Build a symmetric weight matrix with weight w on every undirected edge and the
    remainder of each row on the diagonal.

    :param int n: Number of agents.
    :param edges: Iterable of undirected pairs of 0-based agent indices.
    :param float w: Edge weight, in (0, 1).
    :returns odcsgd.graph_schedule.WeightMatrix
    """

    if not 0 < w < 1:
        raise ValueError( 'Edge weight must be in (0, 1), got {}'.format( w ) )

    entries = np.zeros( ( n, n ) )
    for i, j in edges:
        if i == j or not ( 0 <= i < n and 0 <= j < n ):
            raise ValueError( 'Invalid edge ({}, {}) for {} agents'.format( i, j, n ) )

        entries[ i, j ] = w
        entries[ j, i ] = w

    # Each node's self-loop takes whatever weight its edges leave over
    degrees = np.count_nonzero( entries, axis = 1 )
    self_loops = 1.0 - w * degrees
    if np.any( self_loops <= 0 ):
        node = int( np.argmin( self_loops ) )
        raise NegativeSelfLoop( 'Agent {} has incident weight {} > 1'.format(
            node, w * degrees[ node ] ) )

    entries[ np.diag_indices( n ) ] = self_loops
    return WeightMatrix( entries )


def validate_doubly_stochastic( matrix, tol = DOUBLY_STOCHASTIC_TOL ):
    """Are all entries nonnegative and all row and column sums within tol of 1?

    :param odcsgd.graph_schedule.WeightMatrix matrix
    :param float tol
    :returns bool
    """

    if tol <= 0:
        raise ValueError( 'Tolerance must be positive, got {}'.format( tol ) )

    entries = matrix.entries
    return bool(
        np.all( entries >= 0 ) and
        np.all( np.abs( entries.sum( axis = 1 ) - 1 ) <= tol ) and
        np.all( np.abs( entries.sum( axis = 0 ) - 1 ) <= tol )
    )


def check_b_strong_connectivity( schedule, b, horizon ):
    """Is the union of edges over every window of b consecutive times in
    [1, horizon] strongly connected?

    :param odcsgd.graph_schedule.GraphSchedule schedule
    :param int b: Window length.
    :param int horizon: Last time step considered (at least b).
    :returns bool
    """

    if b < 1 or horizon < b:
        raise ValueError( 'Need 1 <= B <= horizon, got B={} horizon={}'.format( b, horizon ) )

    edge_sets = [ m.edges() for m in schedule.matrices ]

    # The schedule is periodic, so windows starting one period apart are identical.
    last_start = min( horizon - b + 1, schedule.period )
    for start in range( 1, last_start + 1 ):
        graph = nx.DiGraph()
        graph.add_nodes_from( range( schedule.n ) )
        for offset in range( b ):
            graph.add_edges_from( edge_sets[ ( start - 1 + offset ) % schedule.period ] )

        if not nx.is_strongly_connected( graph ):
            _logger.debug( 'Window starting at t={} is not strongly connected'.format( start ) )
            return False

    return True


def mixing_constants( w_min, n, b ):
    """Consensus contraction constants gamma = (1 - w_min/(2n^2))^-2 and
    beta = (1 - w_min/(2n^2))^(1/B).

    :param float w_min: Edge-weight floor, in (0, 1).
    :param int n: Number of agents.
    :param int b: Connectivity window B.
    :returns odcsgd.graph_schedule.MixingConstants
    """

    if not 0 < w_min < 1:
        raise ValueError( 'w_min must be in (0, 1), got {}'.format( w_min ) )

    if n < 1 or b < 1:
        raise ValueError( 'Need n >= 1 and B >= 1, got n={} B={}'.format( n, b ) )

    base = 1.0 - w_min / ( 2.0 * n * n )
    return MixingConstants( gamma = base ** -2, beta = base ** ( 1.0 / b ) )


def apply_consensus( matrix, swarm ):
    """One consensus round, y_i = sum_j W_ij x_j.

    :param odcsgd.graph_schedule.WeightMatrix matrix
    :param odcsgd.odcsgd_core.SwarmState swarm
    :returns odcsgd.odcsgd_core.SwarmState
    """

    if matrix.n != swarm.n:
        raise DimensionMismatch( 'Weight matrix for {} agents applied to {} states'.format(
            matrix.n, swarm.n ) )

    return swarm.replace( matrix.entries @ swarm.states )


def ring_phases( n, phase_count ):
    """Split the undirected ring over n agents into phase_count edge sets; ring edge
    (k, k+1) goes to phase k mod phase_count. When that would put the closing edge
    (n-1, 0) in the same phase as (0, 1), it goes to phase 1 instead, so no two edges
    of a phase share an agent. With two phases an odd ring can't be split that way.

    :returns list: One list of 0-based edge pairs per phase.
    """

    if n < 2:
        return [ [] for _ in range( phase_count ) ]

    ring = [ ( k, ( k + 1 ) % n ) for k in range( n if n > 2 else 1 ) ]
    phases = [ [] for _ in range( phase_count ) ]
    for k, edge in enumerate( ring ):
        phases[ _ring_phase( k, n, phase_count ) ].append( edge )

    return phases


def _ring_phase( k, n, phase_count ):
    closing = n > 2 and k == n - 1
    if closing and phase_count >= 3 and k % phase_count == 0:
        return 1

    return k % phase_count


def schedule_from_phases( n, phases, edge_weight, window_b ):
    """Build a schedule from edge phases and check it meets the graph assumptions.

    :param int n: Number of agents.
    :param list phases: For each phase, a list of undirected 0-based edge pairs.
    :param float edge_weight: Weight on each edge.
    :param int window_b: Connectivity window B.
    :returns odcsgd.graph_schedule.GraphSchedule
    """

    matrices = [ build_edge_weight_matrix( n, edges, edge_weight ) for edges in phases ]
    for index, matrix in enumerate( matrices ):
        if not validate_doubly_stochastic( matrix ):
            raise ValidationError( 'doubly_stochastic',
                'phase {} is not doubly stochastic'.format( index ) )

    schedule = GraphSchedule( matrices, window_b )

    # One full period past the first window covers every distinct window.
    horizon = window_b + schedule.period
    if not check_b_strong_connectivity( schedule, window_b, horizon ):
        raise ValidationError( 'b_strong_connectivity',
            'schedule is not {}-strongly connected'.format( window_b ) )

    _logger.debug( 'Graph schedule: {} agents, {} phases, w_min {}'.format(
        n, schedule.period, schedule.w_min ) )
    return schedule

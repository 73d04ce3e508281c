"""Performance measures computed from run traces. All measures use exact function and
gradient evaluations, never the noisy oracle."""


import logging

import numpy as np
import pandas as pd

from odcsgd.errors import MinimizerUnavailable, NonPositiveSeries

# Column order of the per-run CSV tables
CSV_COLUMNS = [ 't', 'reg_d', 'reg_d_over_t', 'nreg_d', 'nreg_d_over_t', 'disagreement',
    'eta_t', 'lambda_t' ]

_logger = logging.getLogger( __name__ )


class RegretLedger:
    """Cumulative regret series (entry t - 1 holds the value through time t), path
    length, function variation and disagreement of one run."""

    def __init__( self, reg_d, nreg_d, c_path, d_var, disagreement ):
        """
        :param numpy.ndarray reg_d: Dynamic regret series, or None when the problem has
            no tracked minimizer.
        :param numpy.ndarray nreg_d: Non-convex (gradient norm) regret series.
        :param float c_path: Path length C_T.
        :param float d_var: Function variation D_T.
        :param numpy.ndarray disagreement: max_i ||x_{i,t} - mean_t|| for t = 1..T.
        """

        self.reg_d = reg_d
        self.nreg_d = nreg_d
        self.c_path = c_path
        self.d_var = d_var
        self.disagreement = disagreement


    @property
    def horizon( self ):
        return self.nreg_d.shape[ 0 ]


    def final_reg( self ):
        if self.reg_d is None or not self.reg_d.size:
            return float( 'nan' )

        return float( self.reg_d[ -1 ] )


    def final_nreg( self ):
        return float( self.nreg_d[ -1 ] ) if self.nreg_d.size else float( 'nan' )


def dynamic_regret( trace, problem ):
    """Partial sums over t of sum_i [ f_t(x_{i,t}) - f_t(x*_t) ], each agent against
    the global objective.

    :param odcsgd.odcsgd_core.RunTrace trace
    :param odcsgd.problem_suite.ProblemSequence problem
    :returns numpy.ndarray
    """

    if not problem.convex:
        raise MinimizerUnavailable( 'Dynamic regret needs a convex problem with minimizers.' )

    summands = np.empty( trace.horizon )
    for t in range( 1, trace.horizon + 1 ):
        optimum = problem.global_value( t, problem.minimizer( t ) )
        values = problem.global_values( t, trace.states[ t - 1 ] )
        summands[ t - 1 ] = np.sum( values - optimum )

    return np.cumsum( summands )


def nonconvex_regret( trace, problem ):
    """Partial sums over t of sum_i ||grad f_t(x_{i,t})||^2.

    :returns numpy.ndarray
    """

    summands = np.empty( trace.horizon )
    for t in range( 1, trace.horizon + 1 ):
        gradients = problem.global_gradients( t, trace.states[ t - 1 ] )
        summands[ t - 1 ] = np.sum( np.square( gradients ) )

    return np.cumsum( summands )


def path_length( minimizers ):
    """sum_{t=2..T} ||x*_t - x*_{t-1}||.

    :param minimizers: A TrackingTarget, or an array of x*_1..x*_T (one per row).
    :returns float
    """

    if hasattr( minimizers, 'trajectory' ):
        # Drop x*_0; the sum runs over consecutive pairs within 1..T
        minimizers = minimizers.trajectory[ 1: ]

    minimizers = np.asarray( minimizers, dtype = float )
    if minimizers.shape[ 0 ] < 2:
        raise ValueError( 'Path length needs T >= 2.' )

    return float( np.sum( np.linalg.norm( np.diff( minimizers, axis = 0 ), axis = 1 ) ) )


def function_variation( problem, t_from = 2, t_to = None ):
    """sum_{t} sup_x |f_t(x) - f_{t-1}(x)| for t from t_from to t_to (default T).

    :returns float
    """

    t_to = problem.horizon if t_to is None else t_to
    if t_from < 2:
        raise ValueError( 'Variation sums start at t=2, got {}'.format( t_from ) )

    return float( sum( problem.variation_increment( t ) for t in range( t_from, t_to + 1 ) ) )


def sublinearity_slope( series, t_lo, t_hi ):
    """Least-squares slope of log(series[t]) against log(t) for t in [t_lo, t_hi].

    :param series: Cumulative series; series[ t - 1 ] is the value at time t.
    :returns float
    """

    series = np.asarray( series, dtype = float )
    if not 1 <= t_lo < t_hi <= series.shape[ 0 ]:
        raise ValueError( 'Invalid window [{}, {}] for a series of length {}'.format(
            t_lo, t_hi, series.shape[ 0 ] ) )

    window = series[ t_lo - 1:t_hi ]
    if np.any( ~( window > 0 ) ):
        raise NonPositiveSeries( 'Series is not positive on [{}, {}]'.format( t_lo, t_hi ) )

    times = np.arange( t_lo, t_hi + 1, dtype = float )
    slope, _ = np.polyfit( np.log( times ), np.log( window ), 1 )
    return float( slope )


def disagreement_series( states ):
    """max_i ||x_{i,t} - mean_t|| for each row of a (T, N, d) array."""

    deviations = states - states.mean( axis = 1, keepdims = True )
    return np.max( np.linalg.norm( deviations, axis = 2 ), axis = 1 )


def build_ledger( trace, problem ):
    """All measures for one run.

    :returns odcsgd.regret_metrics.RegretLedger
    """

    reg_d = dynamic_regret( trace, problem ) if problem.convex else None

    if hasattr( problem, 'target' ) and problem.horizon >= 2:
        c_path = path_length( problem.target )
    elif hasattr( problem, 'centers' ) and problem.horizon >= 2:
        c_path = path_length( problem.centers[ 1: ] )
    else:
        c_path = 0.0

    d_var = function_variation( problem ) if problem.horizon >= 2 else 0.0

    return RegretLedger(
        reg_d = reg_d,
        nreg_d = nonconvex_regret( trace, problem ),
        c_path = c_path,
        d_var = d_var,
        disagreement = trace.disagreement[ :trace.horizon ]
    )


def ledger_frame( ledger, trace ):
    """The per-run CSV table.

    :returns pandas.DataFrame
    """

    t = np.arange( 1, trace.horizon + 1 )
    reg_d = ledger.reg_d if ledger.reg_d is not None else np.full( trace.horizon, np.nan )

    return pd.DataFrame( {
        't': t,
        'reg_d': reg_d,
        'reg_d_over_t': reg_d / t,
        'nreg_d': ledger.nreg_d,
        'nreg_d_over_t': ledger.nreg_d / t,
        'disagreement': ledger.disagreement,
        'eta_t': trace.eta,
        'lambda_t': trace.lam
    }, columns = CSV_COLUMNS )

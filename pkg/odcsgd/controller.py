"""Controller module, responsible for high-level logic for experiments. General rules:
- The controller may know about the modules it uses to perform lower-level tasks, but
no other code (except the entry point script) may know about controller functions.
- Controller module is stateless. All settings are passed in as method arguments; the
controller may not retrieve configuration itself (only the entry point script does that).
- As much as possible, other modules are also stateless.
"""


import logging
import time
from concurrent.futures import ProcessPoolExecutor
from itertools import repeat

import numpy as np

from odcsgd.stats import StatCollection
from odcsgd.noise_models import GradientOracle
from odcsgd.bound_verifier import CheckStatus
from odcsgd import odcsgd_core, regret_metrics, bound_verifier, output_manager, random_streams

# Points per run at which the clipped-gradient decomposition is checked
_CLIP_CHECK_POINTS = 3

_QUANTILES = ( 0.1, 0.5, 0.9 )

_logger = logging.getLogger( __name__ )


class ExperimentReport:
    """Results of running every seed of a configuration."""

    def __init__( self, config, outcomes, checks, seconds, csv_paths ):
        """
        :param odcsgd.config.RunConfig config
        :param list outcomes: _SeedOutcome objects, in seed order.
        :param list checks: CheckResult objects, per seed and across seeds.
        :param float seconds: Wall-clock time for the whole experiment.
        :param list csv_paths: Files written.
        """

        self.config = config
        self.outcomes = outcomes
        self.checks = checks
        self.seconds = seconds
        self.csv_paths = csv_paths

        self.summaries = [ o.summary() for o in outcomes ]

        self.stats = StatCollection()
        self.stats.new_stat( 'seeds', 'Seeds run', len( outcomes ) )
        for status in CheckStatus:
            self.stats.new_stat( str( status ), 'Checks {}'.format( status ),
                sum( 1 for c in checks if c.status == status ) )

        self.stats.new_stat( 'seconds', 'Wall-clock seconds', float( seconds ) )


    @property
    def seeds( self ):
        return [ o.seed for o in self.outcomes ]


    @property
    def ledgers( self ):
        return [ o.ledger for o in self.outcomes ]


    @property
    def traces( self ):
        return [ o.trace for o in self.outcomes ]


    def aggregate( self, key ):
        """Quantiles of a per-seed summary value over seeds.

        :param str key: A key of the per-seed summaries.
        :returns dict: Keys q10, median, q90.
        """

        values = np.array( [ s[ key ] for s in self.summaries ], dtype = float )
        low, median, high = np.quantile( values, _QUANTILES )
        return { 'q10': float( low ), 'median': float( np.median( values ) ), 'q90': float( high ) }


    def median_series( self, column ):
        """Median over seeds of a per-time series of the ledgers, such as reg_d or
        nreg_d."""
        return np.median( np.vstack( [ getattr( l, column ) for l in self.ledgers ] ), axis = 0 )


    def failed_checks( self ):
        return [ c for c in self.checks if c.status == CheckStatus.FAIL ]


    def exit_code( self ):
        """0 when every check passed or was inapplicable, 1 otherwise."""
        return 1 if self.failed_checks() else 0


    def describe( self ):
        lines = [ 'run {}: {} seeds, T={}, N={}, problem {}'.format( self.config.run_name,
            len( self.outcomes ), self.config.horizon, self.config.n_agents, self.config.problem ) ]

        for summary in self.summaries:
            lines.append( 'seed {seed} reg_T={final_reg:.6g} nreg_T={final_nreg:.6g} '
                'c_path={c_path:.6g} d_var={d_var:.6g} seconds={seconds:.3f}'.format( **summary ) )

        for key in ( 'reg_over_t', 'nreg_over_t' ):
            if not all( np.isnan( s[ key ] ) for s in self.summaries ):
                lines.append( '{} q10={q10:.6g} median={median:.6g} q90={q90:.6g}'.format(
                    key, **self.aggregate( key ) ) )

        lines.extend( c.describe() for c in self.checks )
        return lines


class _SeedOutcome:
    """What one seed's run returns from a worker."""

    def __init__( self, seed, trace, ledger, checks, seconds ):
        self.seed = seed
        self.trace = trace
        self.ledger = ledger
        self.checks = checks
        self.seconds = seconds


    def summary( self ):
        horizon = self.trace.horizon
        return {
            'seed': self.seed,
            'final_reg': self.ledger.final_reg(),
            'final_nreg': self.ledger.final_nreg(),
            'reg_over_t': self.ledger.final_reg() / horizon,
            'nreg_over_t': self.ledger.final_nreg() / horizon,
            'c_path': self.ledger.c_path,
            'd_var': self.ledger.d_var,
            'max_disagreement': float( self.ledger.disagreement.max() ),
            'seconds': self.seconds
        }


def run_experiment( config, write_output = True ):
    """Run every configured seed, compute ledgers, evaluate bound checks and (unless
    write_output is off) write per-seed CSVs.

    :param odcsgd.config.RunConfig config
    :param bool write_output: Whether to write files to the output directory.
    :returns odcsgd.controller.ExperimentReport
    """

    started = time.perf_counter()

    if not config.theory_applicable:
        _logger.warning( 'kappa={} and alpha={} don\'t satisfy kappa > 2 alpha > 0; regret '
            'bound checks are inapplicable'.format( config.step.kappa, config.clip.alpha ) )

    if config.workers > 1 and len( config.seeds ) > 1:
        with ProcessPoolExecutor( max_workers = config.workers ) as pool:
            outcomes = list( pool.map( _run_seed, repeat( config ), config.seeds ) )
    else:
        outcomes = [ _run_seed( config, seed ) for seed in config.seeds ]

    checks = []
    for outcome in outcomes:
        checks.extend( outcome.checks )

    checks.append( _high_probability( config, outcomes ) )
    checks.append( _lemma6_high_probability( config, outcomes ) )
    checks.extend( _clip_checks( config, outcomes[ 0 ] ) )

    csv_paths = []
    if write_output:
        directory = output_manager.run_directory( config.output_dir, config.run_name )
        for outcome in outcomes:
            frame = regret_metrics.ledger_frame( outcome.ledger, outcome.trace )
            csv_paths.append( output_manager.write_ledger_csv(
                frame, directory, config.run_name, outcome.seed ) )

            if config.save_traces:
                output_manager.write_trace( outcome.trace, directory, config.run_name, outcome.seed )

    report = ExperimentReport( config, outcomes, checks, time.perf_counter() - started, csv_paths )

    if write_output:
        output_manager.write_report( report.describe(), directory, config.run_name )

    return report


def verify( config ):
    """Run the seeds and evaluate the bound checks, without writing files.

    :returns odcsgd.controller.ExperimentReport
    """
    return run_experiment( config, write_output = False )


def sweep( config, axis, values, write_output = True ):
    """One experiment per value of a configuration axis. Seeds are shared across
    values, so runs are paired.

    :param odcsgd.config.RunConfig config
    :param str axis: A sweep axis (see odcsgd.config.SWEEP_AXES).
    :param list values: Settings for the axis.
    :returns list: ExperimentReport objects, in the order of values.
    """

    # Validate every value before running anything
    configs = [ config.with_override( axis, value ) for value in values ]

    reports = []
    for value, swept in zip( values, configs ):
        swept.run_name = '{}_{}={}'.format( config.run_name, axis, value )
        _logger.debug( 'Sweep {}={}'.format( axis, value ) )
        reports.append( run_experiment( swept, write_output ) )

    return reports


def sweep_rate_check( reports ):
    """Slope of median final regret against T across a sweep over T, compared with
    the rate predicted for the noise's tail index.

    :param list reports: Reports from a sweep over T.
    :returns odcsgd.bound_verifier.CheckResult
    """

    horizons = np.array( [ r.config.horizon for r in reports ], dtype = float )
    if len( reports ) < 2 or len( set( horizons ) ) != len( horizons ):
        return bound_verifier.inapplicable( 'sweep_regret_rate', 'needs two or more distinct T' )

    convex = reports[ 0 ].traces[ 0 ].problem.convex
    key = 'final_reg' if convex else 'final_nreg'
    medians = np.array( [ r.aggregate( key )[ 'median' ] for r in reports ] )

    if np.any( ~( medians > 0 ) ):
        return bound_verifier.inapplicable( 'sweep_regret_rate', 'non-positive median regret' )

    p = reports[ 0 ].config.noise.tail_p
    target = bound_verifier.rate_target( p )
    limit = min( 0.95, target + 0.15 )
    slope, _ = np.polyfit( np.log( horizons ), np.log( medians ), 1 )

    return bound_verifier.CheckResult( 'sweep_regret_rate', limit, float( slope ),
        CheckStatus.PASS if slope <= limit else CheckStatus.FAIL,
        'target exponent {:.4g}'.format( target ) )


def sweep_stats( reports ):
    """Counters summed over every report of a sweep.

    :param list reports: ExperimentReport objects.
    :returns odcsgd.stats.StatCollection
    """

    totals = StatCollection()
    for report in reports:
        totals.merge( report.stats )

    return totals


def _run_seed( config, seed ):
    """Simulate one seed and evaluate its per-run checks. Runs in a worker process
    when the pool is used, so everything it needs comes through its arguments."""

    started = time.perf_counter()
    _logger.debug( 'Starting seed {}'.format( seed ) )

    trace = odcsgd_core.run( config, seed )
    problem = trace.problem
    ledger = regret_metrics.build_ledger( trace, problem )
    checks = [ _seed_check( c, seed ) for c in _per_seed_checks( config, trace, ledger ) ]

    seconds = time.perf_counter() - started
    _logger.debug( 'Finished seed {} in {:.3f}s'.format( seed, seconds ) )

    return _SeedOutcome( seed, trace, ledger, checks, seconds )


def _seed_check( check, seed ):
    check.name = '{}[seed={}]'.format( check.name, seed )
    return check


def _context( config, trace ):
    oracle = GradientOracle( trace.problem, config.noise )
    return bound_verifier.bound_context( trace, trace.problem, oracle, config.graph,
        config.delta, config.b_x_override )


def _per_seed_checks( config, trace, ledger ):
    ctx = _context( config, trace )

    checks = [
        bound_verifier.lemma2_check( trace, ctx ),
        bound_verifier.lemma3_check( trace, ctx ),
        bound_verifier.displacement_check( trace, config.graph ),
        bound_verifier.lemma6_check( trace, trace.problem, ctx )
    ]

    convex = trace.problem.convex
    theorem_name = 'theorem1_regret' if convex else 'theorem2_regret'
    if not config.theory_applicable:
        checks.append( bound_verifier.inapplicable( theorem_name, 'needs kappa > 2 alpha > 0' ) )
    elif convex:
        checks.append( bound_verifier.theorem1_check( ledger, ctx ) )
    else:
        checks.append( bound_verifier.theorem2_check( ledger, ctx ) )

    series = ledger.reg_d if convex else ledger.nreg_d
    t_lo, t_hi = config.rate_window
    if t_lo >= t_hi:
        checks.append( bound_verifier.inapplicable( 'regret_rate', 'window has a single point' ) )
    else:
        try:
            checks.append( bound_verifier.corollary_rate_check( series, config.noise.tail_p,
                config.rate_window ) )

        except ValueError as e:
            checks.append( bound_verifier.inapplicable( 'regret_rate', str( e ) ) )

    return checks


def _high_probability( config, outcomes ):
    if not config.theory_applicable:
        return bound_verifier.inapplicable( 'high_probability', 'needs kappa > 2 alpha > 0' )

    ledgers = { o.seed: o.ledger for o in outcomes }

    def realized_and_bound( trace ):
        ctx = _context( config, trace )
        ledger = ledgers[ trace.seed ]
        if trace.problem.convex:
            return ledger.final_reg(), bound_verifier.theorem1_rhs( ctx, ledger.c_path )

        return ledger.final_nreg(), bound_verifier.theorem2_rhs( ctx, ledger.d_var )[ 1 ]

    return bound_verifier.high_probability_check(
        [ o.trace for o in outcomes ], realized_and_bound, config.delta )


def _lemma6_high_probability( config, outcomes ):
    name = 'lemma6_high_probability'
    if not outcomes[ 0 ].trace.problem.convex:
        return bound_verifier.inapplicable( name, 'no tracked minimizer for a non-convex problem' )

    def realized_and_bound( trace ):
        sums = bound_verifier.clipped_noise_sums( trace, trace.problem )
        return float( np.abs( sums ).max() ), bound_verifier.lemma6_rhs( _context( config, trace ) )

    return bound_verifier.high_probability_check(
        [ o.trace for o in outcomes ], realized_and_bound, config.delta, name )


def _clip_checks( config, outcome ):
    """Clipped-gradient decomposition checks at a few states of one run, agent 0 at the
    start, middle and end of the horizon."""

    trace = outcome.trace
    oracle = GradientOracle( trace.problem, config.noise )
    times = sorted( set( np.linspace( 1, trace.horizon, _CLIP_CHECK_POINTS ).astype( int ) ) )

    checks = []
    for t in times:
        stream = random_streams.stream( outcome.seed, random_streams.Purpose.MONTE_CARLO, 0, t )
        checks.extend( bound_verifier.clip_decomposition_checks( oracle, trace.states[ t - 1 ][ 0 ],
            0, t, trace.lam[ t - 1 ], config.clip_check_samples, stream ) )

    return checks

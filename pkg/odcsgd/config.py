"""Module to retrieve and validate experiment configuration."""


import copy
import os

import logging
import yaml

from odcsgd import CONFIG_FILENAME, graph_schedule, problem_suite
from odcsgd.errors import ParseError, ValidationError, UnknownAxis
from odcsgd.noise_models import NoiseModel
from odcsgd.odcsgd_core import StepSchedule, ClipSchedule

OUTPUT_DIR_ENV_VAR = 'ODCSGD_OUTPUT_DIR'

directories_to_try = [ os.path.dirname( os.path.realpath( __file__ ) ) + '/../', '/etc/' ]
"""Directories to search for configuration file."""

filename = None
"""Non-default configuration file to load. (To load from default locations, leave this
set to None.)"""

# Settings reproducing the convex tracking experiment. Sections are merged key by key
# with the file's settings.
DEFAULTS = {
    'problem': 'tracking_convex',
    'n_agents': 6,
    'dim': 2,
    'horizon': 5000,
    'seeds': list( range( 10 ) ),
    'delta': 0.1,
    'step': { 'a': 0.5, 'b': 10.0, 'kappa': 0.5 },
    'clip': { 'c0': 2.0, 'alpha': 0.1 },
    'graph': { 'edge_weight': 0.8, 'window_B': 4, 'ring_phases': 4 },
    'noise': { 'kind': 'student_t2', 'scale': 1.0 },
    'initial_box': [ 9.0, 10.0 ],
    'box_bound': problem_suite.DEFAULT_BOX_BOUND,
    'loss_scale': None,
    'target_noise': True,
    'b_x_override': None,
    'output_dir': 'output',
    'run_name': 'odcsgd',
    'save_traces': False,
    'workers': 1,
    'rate_window': None,
    'clip_check_samples': 10 ** 4
}

# Step exponent used by the non-convex experiment when none is given
NONCONVEX_KAPPA = 0.4

# Sweep axis names and the settings they address
SWEEP_AXES = {
    'alpha': ( 'clip', 'alpha' ),
    'kappa': ( 'step', 'kappa' ),
    'noise.scale': ( 'noise', 'scale' ),
    'noise.kind': ( 'noise', 'kind' ),
    'T': ( 'horizon', ),
    'N': ( 'n_agents', )
}

_SECTIONS = [ 'step', 'clip', 'graph', 'noise' ]

_config = None

_logger = logging.getLogger( __name__ )


class RunConfig:
    """Validated settings for an experiment. Build with parse_config() or
    from_settings()."""

    def __init__( self, settings ):
        """
        :param dict settings: Complete settings (defaults merged in).
        """

        self.settings = settings

        self.problem = _build( 'problem', problem_suite.ProblemKind.from_name,
            settings[ 'problem' ] )

        self.n_agents = _positive_int( settings, 'n_agents' )
        self.dim = _positive_int( settings, 'dim' )
        self.horizon = _positive_int( settings, 'horizon' )
        if self.problem != problem_suite.ProblemKind.QUADRATIC and self.dim != 2:
            raise ValidationError( 'dim', '{} needs dim 2, got {}'.format( self.problem, self.dim ) )

        seeds = settings[ 'seeds' ]
        if ( not isinstance( seeds, list ) or not seeds or
            not all( isinstance( s, int ) and s >= 0 for s in seeds ) ):
            raise ValidationError( 'seeds', 'need a non-empty list of non-negative integers, '
                'got {}'.format( seeds ) )

        if len( set( seeds ) ) != len( seeds ):
            raise ValidationError( 'seeds', 'duplicate seeds in {}'.format( seeds ) )

        self.seeds = list( seeds )

        self.delta = float( settings[ 'delta' ] )
        if not 0 < self.delta < 1:
            raise ValidationError( 'delta', 'must be in (0, 1), got {}'.format( self.delta ) )

        step = settings[ 'step' ]
        self.step = _build( 'step', StepSchedule, step[ 'a' ], step[ 'b' ], step[ 'kappa' ] )

        clip = settings[ 'clip' ]
        self.clip = _build( 'clip', ClipSchedule, clip[ 'c0' ], clip[ 'alpha' ] )

        self.graph = _graph( settings[ 'graph' ], self.n_agents )

        self.noise = _noise( settings[ 'noise' ] )

        box = settings[ 'initial_box' ]
        if not isinstance( box, list ) or len( box ) != 2 or not box[ 0 ] <= box[ 1 ]:
            raise ValidationError( 'initial_box', 'need [lo, hi] with lo <= hi, got {}'.format( box ) )

        self.initial_box = ( float( box[ 0 ] ), float( box[ 1 ] ) )

        self.box_bound = float( settings[ 'box_bound' ] )
        if self.box_bound <= 0:
            raise ValidationError( 'box_bound', 'must be positive, got {}'.format( self.box_bound ) )

        self.loss_scale = settings[ 'loss_scale' ]
        if self.loss_scale is not None and self.loss_scale <= 0:
            raise ValidationError( 'loss_scale', 'must be positive, got {}'.format( self.loss_scale ) )

        self.target_noise = bool( settings[ 'target_noise' ] )
        self.b_x_override = settings[ 'b_x_override' ]
        self.output_dir = settings[ 'output_dir' ]
        self.run_name = str( settings[ 'run_name' ] )
        self.save_traces = bool( settings[ 'save_traces' ] )
        self.workers = _positive_int( settings, 'workers' )
        self.clip_check_samples = _positive_int( settings, 'clip_check_samples' )
        if self.clip_check_samples < 10 ** 4:
            raise ValidationError( 'clip_check_samples', 'need at least 10^4, got {}'.format(
                self.clip_check_samples ) )

        window = settings[ 'rate_window' ]
        if window is None:
            window = [ max( 1, self.horizon // 10 ), self.horizon ]

        if not 1 <= window[ 0 ] <= window[ 1 ] <= self.horizon:
            raise ValidationError( 'rate_window', 'need 1 <= t_lo <= t_hi <= T, got {}'.format(
                window ) )

        self.rate_window = ( int( window[ 0 ] ), int( window[ 1 ] ) )


    @property
    def theory_applicable( self ):
        """Whether the regret bounds' hypothesis kappa > 2 alpha > 0 holds."""
        return self.step.kappa > 2 * self.clip.alpha > 0


    def with_override( self, axis, value ):
        """A copy of this configuration with one sweep axis changed.

        :param str axis: One of SWEEP_AXES.
        :param value: The new setting.
        :returns odcsgd.config.RunConfig
        """

        if axis not in SWEEP_AXES:
            raise UnknownAxis( 'Unknown sweep axis: {}. Expected one of {}'.format(
                axis, ', '.join( SWEEP_AXES ) ) )

        settings = copy.deepcopy( self.settings )
        path = SWEEP_AXES[ axis ]
        target = settings
        for key in path[ :-1 ]:
            target = target[ key ]

        target[ path[ -1 ] ] = value

        # A noise kind switch leaves the previous kind's moment settings behind
        if axis == 'noise.kind':
            settings[ 'noise' ].pop( 'tail_p', None )
            settings[ 'noise' ].pop( 'sigma_p', None )

        return RunConfig( settings )


def get():
    """Return the configuration object. The configuration is loaded from the
    appropriate yaml file the first time it's called."""

    if _config is None:
        _load()

    return _config


def parse_config( path ):
    """Read and validate a configuration file. An empty file gives the default
    settings.

    :param str path: Path to a yaml file.
    :returns odcsgd.config.RunConfig
    """

    with open( path, 'r' ) as stream:
        try:
            loaded = yaml.safe_load( stream )

        except yaml.YAMLError as e:
            mark = getattr( e, 'problem_mark', None )
            raise ParseError( 'Malformed configuration file {}: {}'.format(
                path, getattr( e, 'problem', e ) ),
                line = mark.line + 1 if mark is not None else None )

    if loaded is None:
        loaded = {}

    if not isinstance( loaded, dict ):
        raise ParseError( 'Configuration file {} must hold a mapping of settings'.format( path ),
            line = 1 )

    _logger.debug( 'Using configuration file: {}'.format( path ) )
    return from_settings( loaded )


def from_settings( loaded ):
    """Merge settings over the defaults, apply presets and environment overrides, and
    validate.

    :param dict loaded: Settings as read from a file.
    :returns odcsgd.config.RunConfig
    """

    unknown = set( loaded ) - set( DEFAULTS )
    if unknown:
        raise ValidationError( 'known_keys', 'unknown settings: {}'.format(
            ', '.join( sorted( unknown ) ) ) )

    settings = copy.deepcopy( DEFAULTS )
    for key, value in loaded.items():
        if key in _SECTIONS:
            if not isinstance( value, dict ):
                raise ValidationError( key, 'must be a mapping, got {}'.format( value ) )

            settings[ key ].update( value )

        else:
            settings[ key ] = value

    # Phases in the file replace the default ring
    if 'phases' in loaded.get( 'graph', {} ):
        settings[ 'graph' ].pop( 'ring_phases', None )

    if ( settings[ 'problem' ] == str( problem_suite.ProblemKind.TRACKING_NONCONVEX ) and
        'kappa' not in loaded.get( 'step', {} ) ):
        settings[ 'step' ][ 'kappa' ] = NONCONVEX_KAPPA

    env_output_dir = os.environ.get( OUTPUT_DIR_ENV_VAR )
    if env_output_dir:
        _logger.debug( 'Output directory from {}: {}'.format( OUTPUT_DIR_ENV_VAR, env_output_dir ) )
        settings[ 'output_dir' ] = env_output_dir

    return RunConfig( settings )


def _positive_int( settings, key ):
    value = settings[ key ]
    if isinstance( value, bool ) or not isinstance( value, int ) or value < 1:
        raise ValidationError( key, 'must be a positive integer, got {}'.format( value ) )

    return value


def _build( invariant, constructor, *args, **kwargs ):
    """Call a constructor, reporting its ValueErrors as violations of the named
    invariant."""

    try:
        return constructor( *args, **kwargs )

    except ValidationError:
        raise

    except ( ValueError, TypeError ) as e:
        raise ValidationError( invariant, str( e ) )


def _graph( graph, n_agents ):
    unknown = set( graph ) - { 'edge_weight', 'window_B', 'phases', 'ring_phases' }
    if unknown:
        raise ValidationError( 'graph', 'unknown settings: {}'.format( ', '.join( sorted( unknown ) ) ) )

    if 'phases' in graph:
        phases = _build( 'graph', _zero_based_phases, graph[ 'phases' ] )
    else:
        phases = graph_schedule.ring_phases( n_agents, graph[ 'ring_phases' ] )

    return _build( 'graph', graph_schedule.schedule_from_phases, n_agents, phases,
        graph[ 'edge_weight' ], graph[ 'window_B' ] )


def _load():
    """Load the config file. If a non-default filename is set, use that. Otherwise,
    look in default locations.
    """

    global _config

    if filename is not None:
        _config = parse_config( filename )
        return

    for directory_to_try in directories_to_try:
        try:
            _config = parse_config( directory_to_try + CONFIG_FILENAME )
            return

        except FileNotFoundError:
            continue

    raise FileNotFoundError( 'No configuration file found.' )


def _zero_based_phases( phases ):
    # Agents are labelled from 1 in configuration files
    return [ [ ( int( i ) - 1, int( j ) - 1 ) for i, j in phase ] for phase in phases ]


def _noise( noise ):
    unknown = set( noise ) - { 'kind', 'scale', 'tail_p', 'sigma_p', 'pareto_shape' }
    if unknown:
        raise ValidationError( 'noise', 'unknown settings: {}'.format( ', '.join( sorted( unknown ) ) ) )

    options = { key: noise[ key ] for key in ( 'tail_p', 'sigma_p', 'pareto_shape' ) if key in noise }
    return _build( 'noise', NoiseModel, noise[ 'kind' ], noise[ 'scale' ], **options )

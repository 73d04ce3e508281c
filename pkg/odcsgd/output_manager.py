"""Writing and reading experiment output. Interaction with the filesystem (creating
directories, naming, writing and reading result files) is the exclusive responsibility
of this module."""


import os

import logging
import numpy as np
import pandas as pd

from odcsgd.odcsgd_core import RunTrace

# Enough digits to read floats back exactly
_FLOAT_FORMAT = '%.17g'

_logger = logging.getLogger( __name__ )


def run_directory( output_dir, run_name ):
    """Create (if needed) and return the directory for a run's files.

    :param str output_dir: Root output directory.
    :param str run_name: Name of the run.
    :returns str
    """

    if os.path.dirname( run_name ):
        raise ValueError( 'run_name can\'t include a directory: {}'.format( run_name ) )

    directory = os.path.join( output_dir, run_name )
    os.makedirs( directory, exist_ok = True )
    return directory


def ledger_filename( run_name, seed ):
    return '{}_seed{}.csv'.format( run_name, seed )


def trace_filename( run_name, seed ):
    return '{}_seed{}_trace.npz'.format( run_name, seed )


def write_ledger_csv( frame, directory, run_name, seed ):
    """Write a per-seed ledger table.

    :param pandas.DataFrame frame: Table from regret_metrics.ledger_frame().
    :returns str: Path of the written file.
    """

    path = os.path.join( directory, ledger_filename( run_name, seed ) )
    frame.to_csv( path, index = False, float_format = _FLOAT_FORMAT )
    _logger.debug( 'Wrote {}'.format( path ) )
    return path


def read_ledger_csv( path ):
    """:returns pandas.DataFrame"""
    return pd.read_csv( path )


def write_trace( trace, directory, run_name, seed ):
    """Save a full state trace as a compressed archive.

    :param odcsgd.odcsgd_core.RunTrace trace
    :returns str: Path of the written file.
    """

    path = os.path.join( directory, trace_filename( run_name, seed ) )
    np.savez_compressed(
        path,
        seed = trace.seed,
        states = trace.states,
        clipped_gradients = trace.clipped_gradients,
        gradient_norms = trace.gradient_norms,
        eta = trace.eta,
        lam = trace.lam
    )

    _logger.debug( 'Wrote {}'.format( path ) )
    return path


def read_trace( path, problem = None ):
    """Load a trace written by write_trace(). The problem isn't stored; pass it in
    to attach it.

    :returns odcsgd.odcsgd_core.RunTrace
    """

    with np.load( path ) as archive:
        return RunTrace(
            seed = int( archive[ 'seed' ] ),
            states = archive[ 'states' ],
            clipped_gradients = archive[ 'clipped_gradients' ],
            gradient_norms = archive[ 'gradient_norms' ],
            eta = archive[ 'eta' ],
            lam = archive[ 'lam' ],
            problem = problem
        )


def write_report( lines, directory, run_name ):
    path = os.path.join( directory, '{}_report.txt'.format( run_name ) )
    with open( path, 'w' ) as stream:
        for line in lines:
            stream.write( line + '\n' )

    _logger.debug( 'Wrote {}'.format( path ) )
    return path

import os

import numpy as np
import pytest
from pytest import approx

from odcsgd import output_manager, regret_metrics, odcsgd_core
from odcsgd.config import from_settings


def _run():
    config = from_settings( { 'horizon': 25, 'seeds': [ 5 ] } )
    trace = odcsgd_core.run( config )
    return trace, regret_metrics.build_ledger( trace, trace.problem )


def test_run_directory_is_created( tmp_path ):
    directory = output_manager.run_directory( str( tmp_path ), 'trial' )
    assert os.path.isdir( directory )
    assert output_manager.run_directory( str( tmp_path ), 'trial' ) == directory


def test_run_name_without_directories( tmp_path ):
    with pytest.raises( ValueError ):
        output_manager.run_directory( str( tmp_path ), 'a/b' )


def test_ledger_csv_round_trip( tmp_path ):
    trace, ledger = _run()
    frame = regret_metrics.ledger_frame( ledger, trace )
    path = output_manager.write_ledger_csv( frame, str( tmp_path ), 'trial', 5 )

    assert os.path.basename( path ) == 'trial_seed5.csv'

    read = output_manager.read_ledger_csv( path )
    assert list( read.columns ) == regret_metrics.CSV_COLUMNS
    for column in regret_metrics.CSV_COLUMNS:
        assert read[ column ].values == approx( frame[ column ].values, abs = 1e-9 )


def test_ledgers_recomputed_from_saved_trace( tmp_path ):
    trace, ledger = _run()
    path = output_manager.write_trace( trace, str( tmp_path ), 'trial', 5 )
    loaded = output_manager.read_trace( path, trace.problem )

    assert loaded.seed == 5
    assert np.array_equal( loaded.states, trace.states )
    assert np.array_equal( loaded.clipped_gradients, trace.clipped_gradients )

    again = regret_metrics.build_ledger( loaded, loaded.problem )
    assert again.reg_d == approx( ledger.reg_d, abs = 1e-9 )
    assert again.nreg_d == approx( ledger.nreg_d, abs = 1e-9 )

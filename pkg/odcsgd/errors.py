"""Errors raised by the simulator. Value errors signal bad inputs; runtime errors
signal a simulation or check that can't continue."""


class NegativeSelfLoop( ValueError ):
    """An agent's incident edge weight exceeds 1, so its self-loop would be negative."""


class DimensionMismatch( ValueError ):
    pass


class CoordinateUnobserved( ValueError ):
    """No agent observes some coordinate, so the global minimizer isn't unique."""


class MinimizerUnavailable( ValueError ):
    pass


class NonPositiveSeries( ValueError ):
    pass


class UnknownAxis( ValueError ):
    pass


class HypothesisViolated( ValueError ):
    """The gradient norm exceeds half the clip level, so the clipped-noise bounds
    don't apply at this point."""


class ParseError( ValueError ):

    def __init__( self, message, line = None ):
        if line is not None:
            message = '{} (line {})'.format( message, line )

        super().__init__( message )
        self.line = line


class ValidationError( ValueError ):

    def __init__( self, invariant, message ):
        super().__init__( '{}: {}'.format( invariant, message ) )
        self.invariant = invariant


class NonFiniteState( RuntimeError ):

    def __init__( self, step, seed = None ):
        super().__init__( 'Non-finite agent state at step {} (seed {})'.format( step, seed ) )
        self.step = step
        self.seed = seed

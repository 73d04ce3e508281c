class StatCollection:
    """Named counters reported at the end of an experiment."""

    def __init__( self ):
        self._stats = {}


    def new_stat( self, key, description, val = 0 ):
        self._stats[ key ] = _Stat( description, val )


    def increment( self, key, amount = 1 ):
        self._stats[ key ].val += amount


    def value( self, key ):
        return self._stats[ key ].val


    def merge( self, other ):
        """Add another collection's counters to the ones with matching keys here,
        creating any that are missing."""

        for key, stat in other._stats.items():
            if key in self._stats:
                self._stats[ key ].val += stat.val
            else:
                self._stats[ key ] = _Stat( stat.description, stat.val )


    def describe( self ):
        return [ stat.describe() for stat in self._stats.values() ]


class _Stat:

    def __init__( self, description, val = 0 ):
        self.description = description
        self.val = val


    def describe( self ):
        if isinstance( self.val, float ):
            return '{}: {:.3f}'.format( self.description, self.val )

        return self.description + ': ' + str( self.val )

from setuptools import setup

setup(
    name = 'odcsgd',
    version  = '0.1',
    description = 'Simulation and bound checks for online distributed clipped SGD over time-varying graphs',
    license = 'GPL',
    packages = [ 'odcsgd' ],
    install_requires = [
        'pyyaml >= 3.11',
        'numpy >= 1.17',
        'scipy >= 1.4',
        'networkx >= 2.4',
        'pandas >= 1.0'
    ],
    extras_require = {
        'test': [ 'pytest >= 5.0' ]
    },
    scripts = [
       'bin/odcsgd'
   ]
)

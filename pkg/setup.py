"""
Setup of the Flex-TPU simulator and cost model
"""

import os
from setuptools import setup

# load __version__
version_file = 'flex_tpu/version.py'
exec(open(version_file).read())

# load README.md as long_description
long_description = ''
if os.path.exists('README.md'):
    with open('README.md', 'r') as f:
        long_description = f.read()

requirements = [
    'numpy',                    # For operand matrices and the PE grid state
    'tqdm',                     # For pretty progress bars
    'autolab_core>=0.0.9',      # For YAML configs and logging
    'ruamel.yaml<0.18',         # autolab_core's YamlConfig uses the removed ruamel.yaml.load()
]

test_requirements = [
    'pytest',
]

setup(
    name='flex_tpu',
    version=__version__,
    description='Cycle model and PE-grid simulator for a systolic array with per-layer dataflow',
    long_description=long_description,
    long_description_content_type='text/markdown',
    license='MIT',
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        'Natural Language :: English',
        'Topic :: Scientific/Engineering'
    ],
    packages=['flex_tpu'],
    package_data={'flex_tpu': ['data/topologies/*.csv']},
    install_requires=requirements,
    extras_require={
        'test': test_requirements
    }
)

from setuptools import setup

from delipy import __version__

with open('requirements.txt') as f:
    requirements = [line.strip() for line in f if line.strip() and not line.startswith('pytest')]

setup(
    name='delipy',
    version=__version__,
    description='Density-based clustering of lines and line segments (DeLi)',
    packages=['delipy'],
    python_requires='>=3.9',
    install_requires=requirements,
    entry_points={'console_scripts': ['deli = delipy.cli:main']},
)

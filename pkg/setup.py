"""Setup script for wasn-sync."""

from setuptools import setup, find_packages
from pathlib import Path

# Read README
readme_file = Path(__file__).parent / 'README.md'
long_description = readme_file.read_text() if readme_file.exists() else ''

setup(
    name='wasn-sync',
    version='0.1.0',
    description='Sampling-rate and sampling-time offset estimation for wireless acoustic sensor networks',
    long_description=long_description,
    long_description_content_type='text/markdown',
    packages=find_packages(exclude=['tests', 'tests.*', 'examples', 'examples.*']),
    py_modules=['cli'],
    data_files=[('schemas', [str(p) for p in sorted(Path('schemas').glob('*.schema.json'))])],
    install_requires=[
        'pyyaml>=6.0',
        'jsonschema>=4.0.0',
        'numpy>=1.22',
        'scipy>=1.8',
        'soundfile>=0.12',
        'matplotlib>=3.5',
    ],
    extras_require={
        'dev': [
            'pytest>=7.0.0',
            'pytest-cov>=4.0.0',
            'hypothesis>=6.0.0',
            'black>=23.0.0',
            'flake8>=6.0.0',
        ]
    },
    entry_points={
        'console_scripts': [
            'wasn-sync=cli:main',
        ],
    },
    classifiers=[
        'Development Status :: 3 - Alpha',
        'Intended Audience :: Science/Research',
        'License :: OSI Approved :: MIT License',
        'Programming Language :: Python :: 3',
        'Programming Language :: Python :: 3.9',
        'Programming Language :: Python :: 3.10',
        'Programming Language :: Python :: 3.11',
        'Topic :: Multimedia :: Sound/Audio :: Analysis',
    ],
    python_requires='>=3.9',
)

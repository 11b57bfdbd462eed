from setuptools import find_packages, setup

setup(
    name='driftdecomp',
    version='0.1.0',
    description='PARAFAC2x2 decomposition of GC x GC-TOFMS regions with two-mode retention drift',
    packages=find_packages(exclude=['tests']),
    include_package_data=True,
    package_data={'driftdecomp': ['templates/*/*']},
    python_requires='>=3.9',
    install_requires=[
        'Flask>=3.0',
        'numpy>=1.24',
        'scipy>=1.11',
    ],
    extras_require={'test': ['pytest>=7']},
    entry_points={
        'console_scripts': [
            'driftdecomp=driftdecomp.app:cli',
        ],
    },
)

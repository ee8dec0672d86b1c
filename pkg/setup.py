from setuptools import setup

setup(
    name='mefnow',
    version='0.1.0',
    packages=[
        'mefnow', 'mefnow.tests', 'mefnow.grid', 'mefnow.dataset', 'mefnow.extrapolation', 'mefnow.fusion',
        'mefnow.evaluation',
    ],
    install_requires=[
        'numpy>=1.23.5,<2',
        'pandas>=1.5.2',
        'scipy>=1.9.3',
        'pyyaml>=6.0',
        'numba>=0.56.4',
        'bokeh<=2.4.3',
        'pillow>=9.2.0',
    ],
    extras_require={'test': ['pytest>=7.2.0']},
    entry_points={'console_scripts': ['mefnow=mefnow.cli:main']},
    license='GPL-3.0 license',
    description='Multi-scale extrapolation and GAN fusion for satellite cloud nowcasting',
    classifiers=[
        'Development Status :: 2 - Pre-Alpha',
        'License :: OSI Approved :: GNU General Public License v3 (GPLv3)'
    ],
)

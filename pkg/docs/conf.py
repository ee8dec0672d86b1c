# Sphinx configuration for the MEFNOW documentation.
import os
import sys
sys.path.insert(0, os.path.abspath('..'))

project = 'MEFNOW'
author = 'MEFNOW developers'
release = '0.1.0'

extensions = ['sphinx.ext.napoleon', 'sphinx.ext.autodoc', 'sphinx.ext.autosummary']
exclude_patterns = ['_build']

html_theme = 'sphinx_rtd_theme'

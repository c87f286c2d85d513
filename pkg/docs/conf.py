# -*- coding: utf-8 -*-
#
# Configuration file for the Sphinx documentation builder.

# -- Path setup --------------------------------------------------------------

import os
import sys
sys.path.insert(0, os.path.abspath('..'))

about = {}
with open(os.path.join(os.path.abspath('..'), 'altphillips', '__version__.py')) as f:
    exec(f.read(), about)


# -- Project information -----------------------------------------------------

project = 'alt-phillips-lab'
copyright = '2026, The alt-phillips-lab team'
author = 'The alt-phillips-lab team'

version = about['__version__']
release = about['__version__']


# -- General configuration ---------------------------------------------------

extensions = [
    'sphinx.ext.napoleon',
    'sphinx.ext.autodoc',
    'sphinx_autodoc_typehints',
    'sphinx.ext.coverage',
    'sphinx.ext.viewcode'
]

templates_path = ['_templates']

source_suffix = '.rst'

master_doc = 'index'

language = None

exclude_patterns = ['_build', 'Thumbs.db', '.DS_Store']

pygments_style = None


# -- Options for HTML output -------------------------------------------------

html_theme = 'sphinx_rtd_theme'

html_theme_options = {
    'display_version': True,
    'prev_next_buttons_location': 'bottom',
    'style_external_links': False,
    # Toc options
    'collapse_navigation': False,
    'sticky_navigation': True,
    'navigation_depth': 4,
    'includehidden': True,
    'titles_only': False
}

html_static_path = []

htmlhelp_basename = 'altphillipsdoc'


# -- Options for manual page output ------------------------------------------

man_pages = [
    (master_doc, 'alt-phillips', 'alt-phillips-lab Documentation',
     [author], 1)
]

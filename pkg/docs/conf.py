# -*- coding: utf-8 -*-
#
# Orchard Detection Toolkit documentation build configuration file.
#
# This file is execfile()d with the current directory set to its
# containing dir.

import os
import sys
sys.path.insert(0, os.path.abspath('../'))
sys.path.insert(0, os.path.abspath('./'))

import orcharddetect

VERSION = orcharddetect.__version__

# -- General configuration ------------------------------------------------

extensions = [
    'sphinx.ext.autodoc',
    'sphinx.ext.autosummary',
    'sphinx.ext.doctest',
    'sphinx.ext.todo',
    'sphinx.ext.coverage',
    'sphinx.ext.viewcode',
]

templates_path = ['_templates']
source_suffix = '.rst'
master_doc = 'index'

project = u'Orchard Detection Toolkit'
copyright = u'2019-2020, Orchard Detection Toolkit Authors'
author = u'Orchard Detection Toolkit Authors'

version = VERSION
release = VERSION

language = "en"

exclude_patterns = ['_build',
                    'Thumbs.db',
                    '.DS_Store',
                    'README.rst']

pygments_style = 'sphinx'
todo_include_todos = False

# -- Options for HTML output ----------------------------------------------

html_theme = 'alabaster'
html_title = 'Orchard Detection Toolkit'
html_static_path = []
html_use_index = True
html_show_sourcelink = True
html_show_sphinx = False
html_show_copyright = True
htmlhelp_basename = 'orchard-detection-toolkit_doc'

# -- Options for LaTeX output ---------------------------------------------

latex_elements = {
}

latex_documents = [
    (master_doc, 'orchard-detection-toolkit.tex',
     u'Orchard Detection Toolkit Documentation',
     u'Orchard Detection Toolkit Authors', 'manual'),
]

# -- Options for manual page output ---------------------------------------

man_pages = [
    (master_doc, 'orchard-pipeline',
     u'Orchard Detection Toolkit Documentation',
     [author], 1)
]

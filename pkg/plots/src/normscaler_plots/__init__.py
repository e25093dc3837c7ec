"""Standalone renderer for normscaler sweep CSVs.

Pure post-processing: every plotted number (norms, risks, theory overlays)
comes out of the CSV columns; nothing is recomputed here.
"""

__version__ = "0.1.0"

from .render import PlotSpec, render

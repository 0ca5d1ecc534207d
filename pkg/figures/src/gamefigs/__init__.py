"""Render publication-style figures from gamelab CSV artifacts.

This package reads only the documented CSV schemas (``gap.csv`` with
``iter,last_gap,avg_gap``; ``runlog.csv`` with ``iter,player,x0,...``;
continuous logs with ``iter,player,...,norm``) and has no dependency on
the library that produced them.  Rendering is deterministic: a fixed
style, a fixed SVG hash salt, and stripped timestamps make re-renders
byte-identical.
"""

from gamefigs.render import FigureError, render

__all__ = ["FigureError", "render"]

__version__ = "0.1.0"

"""geomlab: desk-scale numerical differential geometry.

Modules:
  chart_tensor     metric fields, Christoffel symbols, L2 metric distance
  surface_geom     fundamental forms, curvatures, areas, Willmore energy
  umbilic_topology umbilic detection, half-integer indices, conjecture audit
  line_space       oriented lines as TS^2 with its neutral pseudo-Kahler structure
  neutral_flow     codimension-two mean curvature flow of graphical discs
  scenarios        packaged experiments with pass/fail reports
  cli              command-line front end
"""

__version__ = "0.1.0"

"""Field-based floorplan generation.

Rooms claim grid cells through competing virtual fields, corridors are routed
with a path-sharing Dijkstra variant and layouts are searched with NSGA-II.
"""

__version__ = "0.1.0"

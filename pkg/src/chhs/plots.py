"""Plot-script and image emission (no graphics dependency)."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import spectral as sp

GNUPLOT_TEMPLATE = """\
# gnuplot script generated by chhs
set datafile separator ','
set key autotitle columnhead
set terminal pngcairo size 900,600
set xlabel 'time'

set output 'energy.png'
set ylabel 'energy'
plot 'diagnostics.csv' using 1:3 with lines

set output 'distances.png'
set logscale y
set ylabel 'distance to mean'
plot 'diagnostics.csv' using 1:($6**2) with lines title '||phi - mean||_{H1}^2', \\
     '' using 1:($7**2) with lines title '||phi - mean||_{H2}^2'
unset logscale y

set output 'dissipation.png'
set ylabel 'dissipation'
plot 'diagnostics.csv' using 1:4 with lines title '||grad mu||^2', \\
     '' using 1:5 with lines title '||v||^2'

set output 'gevrey.png'
set ylabel 'Gevrey slope'
plot 'diagnostics.csv' using 1:9 with lines

set output 'smoothing.png'
set ylabel 't ||phi||_{H4}^2'
plot 'diagnostics.csv' using 1:8 with lines
"""


def write_gnuplot_script(directory) -> Path:
    path = Path(directory) / "plots.gp"
    path.write_text(GNUPLOT_TEMPLATE)
    return path


def to_graymap(values: np.ndarray) -> np.ndarray:
    lo, hi = float(values.min()), float(values.max())
    if hi - lo <= 0:
        return np.zeros(values.shape, dtype=np.uint8)
    return np.clip(np.round((values - lo) / (hi - lo) * 255.0), 0, 255).astype(np.uint8)


def write_pgm(path, phi: sp.SpectralField) -> Path | None:
    """Binary PGM of a 2D field (x to the right, y upwards); 3D fields are skipped."""
    if phi.domain.dim != 2:
        return None
    values = sp.inverse_transform(phi).values
    img = to_graymap(values.T[::-1])
    h, w = img.shape
    path = Path(path)
    path.write_bytes(f"P5\n{w} {h}\n255\n".encode("ascii") + img.tobytes())
    return path

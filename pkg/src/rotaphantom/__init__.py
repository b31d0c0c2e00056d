"""Rotation-rate quantification for mechanically driven motion phantoms.

Typical use::

    from rotaphantom import mechsim, render, spectral

    preset = mechsim.get_preset("3dp")
    angles = mechsim.simulate_release(preset.model, preset.duration)
    seq = render.render_sequence(angles, render.GEOMETRIES["3dp"],
                                 render.NOISE_PRESETS["mri"], preset.fps, seed=1)
    velocity = spectral.analyze(seq)
"""

__version__ = "0.1.0"

from .core import AngleTrace, Frame, ImageSequence, VelocityTrace, read_sequence, read_trace, write_sequence, write_trace
from .embedding import Embedding1D, embed_sequence
from .mechsim import MechanicalModel, SimPreset, builtin_presets, get_preset, simulate_release, derivative_trace
from .metrics import ConsistencyReport, build_report, format_table, one_way_anova
from .render import GEOMETRIES, NOISE_PRESETS, BarGeometry, NoisePreset, render_sequence
from .spectral import AnalysisConfig, analyze, analyze_detailed
from .spiralgen import SpiralSpec, archimedean_length, export_svg, polyline_length, spiral_polyline

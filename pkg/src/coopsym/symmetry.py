"""Radial / foliated-Schwarz classification of computed solutions.

A field is foliated Schwarz symmetric when every component depends only on
r and on the angle from one shared unit vector p, nonincreasing in that
angle.  The classifier estimates p from the radius-integrated first angular
Fourier mode, interpolates each ring onto the two half-circle branches
around p, and measures three deficits, all relative to the sup norm of the
field:

  radiality_deficit       worst rms angular variation over radii
  mirror deficit          worst mismatch between the two branches
  monotonicity_violation  worst positive angular slope on (0, pi)

The classifier never asserts the underlying symmetry statement: it verifies
the conclusion for solutions whose hypotheses (full coupling, convex
Jacobian entries, low Morse index) are machine-checked, and raises a
counterexample alarm when a hypothesis-satisfying solution fails the
conclusion.  Asymmetric solutions with failed hypotheses are classified
outside_hypotheses instead.

For a smooth foliated field the angular derivative vanishes at the poles
theta = 0, pi, so the strictness grade excludes one angular step at each
endpoint and asks for a definitely negative worst slope on at least half of
the remaining interval.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline

from .coupling import CouplingReport
from .solver import Solution
from .spectral import SpectralReport


class DegenerateAxis(Exception):
    """Every component's first angular mode is below the detection threshold."""


class Classification(enum.Enum):
    RADIAL = "radial"
    FOLIATED_SCHWARZ_STRICT = "foliated_schwarz_strict"
    FOLIATED_SCHWARZ = "foliated_schwarz"
    VIOLATED = "violated"
    OUTSIDE_HYPOTHESES = "outside_hypotheses"


@dataclass
class SymmetryReport:
    axis_angle: float | None
    radiality_deficit: float
    monotonicity_violation: float
    mirror_deficit: float
    axis_disagreement: float
    classification: Classification
    hypothesis_ledger: dict
    counterexample_alarm: bool
    tolerances: dict

    def to_json_dict(self) -> dict:
        return {
            "axis_angle": self.axis_angle,
            "radiality_deficit": self.radiality_deficit,
            "monotonicity_violation": self.monotonicity_violation,
            "mirror_deficit": self.mirror_deficit,
            "axis_disagreement": self.axis_disagreement,
            "classification": self.classification.value,
            "hypothesis_ledger": dict(self.hypothesis_ledger),
            "counterexample_alarm": self.counterexample_alarm,
            "tolerances": dict(self.tolerances),
        }


def _first_modes(solution: Solution) -> np.ndarray:
    """Radius-integrated first angular Fourier mode per component (complex)."""
    grid = solution.grid
    phase = np.exp(-1j * grid.node_theta)
    w = grid.cell_weights
    return (solution.field.node_view() * (w * phase)[np.newaxis, :]).sum(axis=1)


def estimate_axis(solution: Solution, axis_tol: float = 1e-8) -> float:
    """Angle of the symmetry axis candidate p.

    p points along the radius-integrated first angular Fourier mode of the
    component with the largest mode magnitude (ties: smallest component
    index; the angle is normalized to [0, 2 pi)).  Raises DegenerateAxis when
    every component's relative mode magnitude is below axis_tol, which for a
    foliated field happens exactly when it is radial.
    """
    modes = _first_modes(solution)
    unorm = solution.field.max_norm()
    area = float(solution.grid.cell_weights.sum())
    scale = max(unorm * area, 1e-300)
    mags = np.abs(modes) / scale
    if np.all(mags < axis_tol):
        raise DegenerateAxis(f"largest relative mode magnitude {mags.max():.3e}")
    best = int(np.argmax(mags))
    return float(np.mod(-np.angle(modes[best]), 2.0 * np.pi))


def component_axis_angles(solution: Solution, axis_tol: float = 1e-8):
    """(angles, magnitudes) per component; angle is nan below the threshold."""
    modes = _first_modes(solution)
    unorm = solution.field.max_norm()
    area = float(solution.grid.cell_weights.sum())
    mags = np.abs(modes) / max(unorm * area, 1e-300)
    angles = np.mod(-np.angle(modes), 2.0 * np.pi)
    angles[mags < axis_tol] = np.nan
    return angles, mags


def radiality_deficit(solution: Solution) -> float:
    """Worst rms angular variation about the angular mean, relative to |U|_inf."""
    vals = solution.field.values
    unorm = solution.field.max_norm()
    if unorm == 0.0:
        return 0.0
    dev = vals - vals.mean(axis=2, keepdims=True)
    rms = np.sqrt((dev * dev).mean(axis=2))
    return float(rms.max() / unorm)


def mirror_deficit_about(solution: Solution, axis: float) -> float:
    """Sup-norm bound on the odd-about-axis part, relative to |U|_inf.

    Works in the angular Fourier basis: the trigonometric interpolant of a
    ring is symmetric about the axis exactly when every derotated mode
    c_k e^{i k axis} is real, so the imaginary parts bound the asymmetry
    without the O(dtheta^4) noise a pointwise interpolation check would add.
    """
    grid = solution.grid
    unorm = solution.field.max_norm()
    if unorm == 0.0:
        return 0.0
    n = grid.ntheta
    modes = np.fft.rfft(solution.field.values, axis=2)  # (m, nr, n//2+1)
    k = np.arange(modes.shape[2])
    derotated = modes * np.exp(1j * k * axis)[np.newaxis, np.newaxis, :]
    odd_amp = 2.0 * np.abs(derotated.imag) / n
    odd_amp[:, :, 0] = 0.0
    if n % 2 == 0:
        odd_amp[:, :, -1] *= 0.5
    return float(odd_amp.sum(axis=2).max() / unorm)


def _branch_profiles(solution: Solution, axis: float):
    """Cubic-interpolated ring profiles on both half-circle branches.

    Returns (s, plus, minus): angles s in [0, pi] and arrays (m, nr, len(s))
    with the field at axis + s and axis - s.
    """
    grid = solution.grid
    theta = np.append(grid.theta_nodes, 2.0 * np.pi)
    vals = solution.field.values
    closed = np.concatenate([vals, vals[:, :, :1]], axis=2)
    spline = CubicSpline(theta, closed, axis=2, bc_type="periodic")
    n_s = grid.ntheta // 2 + 1
    s = np.linspace(0.0, np.pi, n_s)
    plus = spline(np.mod(axis + s, 2.0 * np.pi))
    minus = spline(np.mod(axis - s, 2.0 * np.pi))
    return s, plus, minus


def _wrap_distance(a: float, b: float) -> float:
    d = np.mod(a - b, 2.0 * np.pi)
    return float(min(d, 2.0 * np.pi - d))


def classify(solution: Solution, spectral: SpectralReport,
             coupling: CouplingReport,
             rad_tol: float = 1e-6, mono_tol: float = 1e-6,
             axis_tol: float = 1e-8, strict_tol: float = 1e-7) -> SymmetryReport:
    """Assemble the symmetry verdict for one solution.

    The hypothesis ledger contains full coupling (from the coupling report),
    convexity of the Jacobian entries (problem tag, machine-checked at
    catalog load) and certified Morse index <= 1 (spatial dimension minus
    one; certified means even the band-ambiguous eigenvalues cannot push the
    count higher).
    """
    tolerances = {"rad_tol": rad_tol, "mono_tol": mono_tol,
                  "axis_tol": axis_tol, "strict_tol": strict_tol}
    n_low = int(np.sum(spectral.eigenvalues < spectral.tol_eig))
    ledger = {
        "fully_coupled": bool(coupling.fully_coupled),
        "convex_derivatives": "convex_derivatives" in solution.problem.tags,
        "morse_index_at_most_1": n_low <= 1,
    }
    hypotheses_met = all(ledger.values())

    deficit = radiality_deficit(solution)
    if deficit <= rad_tol:
        return SymmetryReport(None, deficit, 0.0, 0.0, 0.0,
                              Classification.RADIAL, ledger, False, tolerances)

    angles, mags = component_axis_angles(solution, axis_tol)
    try:
        axis = estimate_axis(solution, axis_tol)
        disagreement = 0.0
        for c in range(solution.problem.m):
            if not np.isnan(angles[c]):
                disagreement = max(disagreement, _wrap_distance(float(angles[c]), axis))
    except DegenerateAxis:
        # nonradial field without a first mode cannot be foliated; fall back
        # to the strongest single-ring mode so the deficits stay informative
        axis = _fallback_axis(solution)
        disagreement = float("inf") if np.isnan(angles).all() else 0.0

    s, plus, minus = _branch_profiles(solution, axis)
    unorm = solution.field.max_norm()
    mirror = mirror_deficit_about(solution, axis)

    ds = s[1] - s[0]
    slopes = np.concatenate([
        (plus[:, :, 2:] - plus[:, :, :-2]) / (2 * ds),
        (minus[:, :, 2:] - minus[:, :, :-2]) / (2 * ds),
    ])  # (2m, nr, n_s - 2), slopes at s[1:-1]
    violation = float(max(0.0, slopes.max()) / unorm)

    is_foliated = (mirror <= rad_tol and violation <= mono_tol
                   and disagreement <= axis_tol)
    if is_foliated:
        strict = _is_strict(s, slopes, unorm, solution.grid.dtheta, strict_tol)
        cls = (Classification.FOLIATED_SCHWARZ_STRICT if strict
               else Classification.FOLIATED_SCHWARZ)
        alarm = False
    elif hypotheses_met:
        cls, alarm = Classification.VIOLATED, True
    else:
        cls, alarm = Classification.OUTSIDE_HYPOTHESES, False
    if disagreement == float("inf"):
        disagreement = -1.0  # serialized sentinel: no component had a mode
    return SymmetryReport(axis, deficit, violation, mirror, disagreement,
                          cls, ledger, alarm, tolerances)


def _is_strict(s, slopes, unorm, dtheta, strict_tol) -> bool:
    """Worst slope definitely negative on at least half of the interior band."""
    s_mid = s[1:-1]
    keep = (s_mid > dtheta) & (s_mid < np.pi - dtheta)
    if not keep.any():
        return False
    worst = slopes[:, :, keep].max(axis=(0, 1))  # per angle sample
    frac = float((worst <= -strict_tol * unorm).mean())
    return frac >= 0.5


def _fallback_axis(solution: Solution) -> float:
    grid = solution.grid
    phase = np.exp(-1j * grid.theta_nodes)[np.newaxis, np.newaxis, :]
    ring_modes = (solution.field.values * phase).sum(axis=2) * grid.dtheta
    c, i = np.unravel_index(np.argmax(np.abs(ring_modes)), ring_modes.shape)
    if np.abs(ring_modes[c, i]) == 0.0:
        return 0.0
    return float(np.mod(-np.angle(ring_modes[c, i]), 2.0 * np.pi))

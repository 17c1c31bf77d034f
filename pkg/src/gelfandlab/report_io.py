"""Deterministic CSV/JSON emission and the run manifest.

CSV floats carry 17 significant digits (exact double round trip); JSON reports are
sorted-key dumps with no timestamps, so identical configs give byte-identical
reports.  Wall time and library versions live only in the manifest.
"""

from __future__ import annotations

import csv
import json
import math
import platform
from pathlib import Path


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return "%.17g" % x
    return str(x)


def write_csv(path, header, rows):
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(x) for x in row])
    return path


def _sanitize(obj):
    # numpy scalars are not JSON serializable
    if hasattr(obj, "item"):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj)}")


def write_json(path, obj):
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True,
                               default=_sanitize) + "\n")
    return path


def profile_csv(path, profile):
    rows = zip(profile.r, profile.v, profile.v_prime)
    return write_csv(path, ["r", "v", "v_prime"], rows)


def trajectory_csv(path, traj):
    rows = zip(traj.t, traj.value, traj.deriv, traj.phi)
    return write_csv(path, ["t", "value", "derivative", "phi"], rows)


def solution_csv(path, solution):
    rows = zip(solution.r_grid, solution.V, solution.V_prime)
    return write_csv(path, ["r", "V", "V_prime"], rows)


def curve_csv(path, curve):
    """Two-column plot data plus annotation rows for turning brackets, the
    singular reference level and confirmed crossings."""
    a, l = curve.alpha, curve.lam
    rows = []
    slopes = [0.0]
    for i in range(1, len(a)):
        if math.isfinite(l[i]) and math.isfinite(l[i - 1]):
            slopes.append(math.copysign(1.0, l[i] - l[i - 1])
                          if l[i] != l[i - 1] else 0.0)
        else:
            slopes.append(math.nan)
    for ai, li, si in zip(a, l, slopes):
        rows.append((ai, li, si, ""))
    if curve.lambda_star_ref is not None:
        rows.append((None, curve.lambda_star_ref, None, "lambda_star"))
    for c in curve.crossings:
        rows.append((c, curve.lambda_star_ref, None, "crossing"))
    for lo, hi in curve.turning_brackets:
        rows.append((lo, None, None, "turning_low"))
        rows.append((hi, None, None, "turning_high"))
    return write_csv(path, ["alpha", "lambda", "slope_sign", "annotation"], rows)


def curve_report_dict(curve):
    return {
        "family": curve.family.spec_dict(),
        "shootingRtol": curve.rtol,
        "hysteresis": curve.hysteresis,
        "exploredAlphaMax": curve.explored_alpha_max,
        "lambdaStarRef": curve.lambda_star_ref,
        "lambdaStarSource": curve.lambda_star_source,
        "turningBrackets": [list(b) for b in curve.turning_brackets],
        "crossings": list(curve.crossings),
        "tailMonotone": curve.tail_monotone(),
        "truncatedEarly": curve.truncated_early,
        "failures": [[a, msg] for a, msg in curve.failures],
        "samples": [[float(a), (float(l) if math.isfinite(l) else None)]
                    for a, l in zip(curve.alpha, curve.lam)],
    }


def write_manifest(out_dir, config_dict, artifacts, wall_time_s):
    import numpy
    import scipy

    from . import __version__

    manifest = {
        "config": config_dict,
        "artifacts": sorted(str(Path(a).name) for a in artifacts),
        "versions": {
            "gelfandlab": __version__,
            "numpy": numpy.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        "wallTimeSeconds": wall_time_s,
    }
    path = Path(out_dir) / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path

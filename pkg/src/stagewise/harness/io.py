"""Write an experiment bundle to a directory of CSV files plus a JSON
summary.

Files, all written through a single lock so that concurrent writers to
the same directory do not interleave:

``path_<method>_rep<r>.csv``
    stagewise path records (see :meth:`stagewise.engine.Path.to_csv`)
``oracle_<method>_rep<r>.csv``
    certified grid, columns ``t,gap,iterations,loss,x1..xp``
``curve_<method>.csv``
    averaged error curve, columns ``index,t,metric``
``summary.json``
    :meth:`Bundle.summary` with sorted keys

With ``timings=False`` every wall-clock field is written as zero, which
makes the output a pure function of the spec.
"""

import json
import os
import threading

import numpy as np

_WRITE_LOCK = threading.Lock()


def _fmt(v):
    return format(float(v), ".17g")


def curve_csv(curve):
    lines = ["index,t,metric"]
    for i, t, m in zip(curve.index, curve.t, curve.metric):
        lines.append(f"{int(i)},{_fmt(t)},{_fmt(m)}")
    return "\n".join(lines) + "\n"


def _write(path, text):
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"{path}: {exc.strerror or exc}") from exc


def emit(bundle, out_dir, timings=True):
    """Write ``bundle`` into ``out_dir`` (created if missing).

    Returns the list of written file paths, in write order. IO failures
    are raised as ``OSError`` naming the offending path.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as exc:
        raise OSError(f"{out_dir}: {exc.strerror or exc}") from exc
    files = []
    with _WRITE_LOCK:
        for name in sorted(bundle.paths):
            for rep, path in enumerate(bundle.paths[name]):
                dest = os.path.join(out_dir, f"path_{name}_rep{rep}.csv")
                _write(dest, path.to_csv(timings=timings))
                files.append(dest)
        for name in sorted(bundle.oracles):
            for rep, grid in enumerate(bundle.oracles[name]):
                dest = os.path.join(out_dir, f"oracle_{name}_rep{rep}.csv")
                _write(dest, grid.to_csv())
                files.append(dest)
        for name in sorted(bundle.curves):
            dest = os.path.join(out_dir, f"curve_{name}.csv")
            _write(dest, curve_csv(bundle.curves[name]))
            files.append(dest)
        dest = os.path.join(out_dir, "summary.json")
        _write(dest, json.dumps(bundle.summary(timings=timings), indent=2,
                                sort_keys=True, default=_json_default) + "\n")
        files.append(dest)
    return files


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"cannot serialize {type(obj).__name__}")

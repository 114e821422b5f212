"""Equations of motion under the Dirac bracket and fixed-step RK4 integration."""

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar

from .errors import NonFiniteState
from .expr import Expression, compile_expressions
from .reduce import dirac_bracket


def equations_of_motion(H, D, variables=None):
    """``v' = {v, H}_DB`` for every kept variable (or the given ones)."""
    H = Expression.lift(H)
    names = list(variables) if variables is not None else list(D.keep)
    return {v: dirac_bracket(Expression.variable(v), H, D) for v in names}


def canonical_equations(H, chart):
    """Hamilton's equations for ``H`` in a plain canonical chart."""
    out = {}
    for q, p in chart.pairs:
        out[q] = H.diff(p)
        out[p] = -H.diff(q)
    return out


def time_derivative(f, eom):
    """Chain rule: ``df/dt = sum_v (df/dv) v'``."""
    f = Expression.lift(f)
    out = Expression()
    for v, rhs in eom.items():
        d = f.diff(v)
        if d:
            out = out + d * rhs
    return out


@dataclass
class Trajectory:
    names: tuple
    times: list
    values: list  # one row per time, ordered as ``names``
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    @property
    def states(self):
        return [dict(zip(self.names, row)) for row in self.values]

    def column(self, name):
        i = self.names.index(name)
        return np.array([row[i] for row in self.values])

    def final(self):
        return dict(zip(self.names, self.values[-1]))

    def with_reconstructed(self, solved):
        """Append eliminated variables computed from the evolving ones."""
        extra = [n for n in solved if n not in self.names]
        if not extra:
            return self
        fn = compile_expressions([solved[n] for n in extra], self.names)
        rows = [list(row) + fn(row) for row in self.values]
        return Trajectory(tuple(self.names) + tuple(extra), list(self.times), rows, dict(self.metadata))

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", *self.names])
        for t, row in zip(self.times, self.values):
            w.writerow([repr(float(t)), *(repr(float(x)) for x in row)])
        return buf.getvalue()

    def to_json(self):
        return json.dumps(
            {
                "metadata": self.metadata,
                "variables": list(self.names),
                "times": [float(t) for t in self.times],
                "states": [[float(x) for x in row] for row in self.values],
            },
            sort_keys=True,
            indent=2,
        )


def _rk4_step(f, y, h):
    k1 = f(y)
    k2 = f([a + 0.5 * h * b for a, b in zip(y, k1)])
    k3 = f([a + 0.5 * h * b for a, b in zip(y, k2)])
    k4 = f([a + h * b for a, b in zip(y, k3)])
    return [a + h / 6 * (b + 2 * c + 2 * d + e) for a, b, c, d, e in zip(y, k1, k2, k3, k4)]


def integrate(eom, initial, dt, T, record_every=1):
    """Classical RK4 from ``t = 0`` to ``t = T`` with step ``dt``.

    A shorter final step lands exactly on ``T`` when ``T/dt`` is not an
    integer. ``record_every`` thins the stored samples; the endpoint is
    always kept.
    """
    if not (dt > 0 and math.isfinite(dt)):
        raise ValueError(f"dt must be a positive finite number, got {dt}")
    if not (T >= dt):
        raise ValueError(f"T must be at least dt, got T={T}, dt={dt}")
    names = tuple(eom)
    missing = [n for n in names if n not in initial]
    if missing:
        raise ValueError(f"initial state is missing {missing}")
    f = compile_expressions([eom[n] for n in names], names)
    y = [float(initial[n]) for n in names]
    n_full = int(math.floor(T / dt + 1e-9))
    rest = T - n_full * dt
    if rest < 1e-12 * max(1.0, T):
        rest = 0.0
    times = [0.0]
    rows = [list(y)]
    t = 0.0
    steps = [dt] * n_full + ([rest] if rest else [])
    for k, h in enumerate(steps, start=1):
        try:
            y = _rk4_step(f, y, h)
        except (OverflowError, ValueError) as exc:
            raise NonFiniteState(f"state overflowed at step {k}: {exc}", step=k) from None
        if not all(math.isfinite(x) for x in y):
            raise NonFiniteState(f"non-finite state at step {k}", step=k)
        t = k * dt if k <= n_full else T
        if k % record_every == 0 or k == len(steps):
            times.append(t)
            rows.append(list(y))
    meta = {"integrator": "rk4", "dt": dt, "t_end": T, "steps": len(steps)}
    return Trajectory(names, times, rows, meta)


def evaluate_along(expr, traj):
    fn = compile_expressions([Expression.lift(expr)], traj.names)
    return np.array([fn(row)[0] for row in traj.values])


def energy_drift(H, traj):
    """``max |H(t) - H(0)| / |H(0)|``."""
    e = evaluate_along(H, traj)
    return float(np.max(np.abs(e - e[0])) / abs(e[0]))


def relative_deviation(a, b):
    """``max |a - b| / max |a|`` for two sampled signals."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return float(np.max(np.abs(a - b)) / np.max(np.abs(a)))


def linearize(eom, point=None, eps=1e-6):
    """Central finite-difference Jacobian of the vector field at ``point``."""
    names = tuple(eom)
    f = compile_expressions([eom[n] for n in names], names)
    x0 = np.array([0.0 if point is None else float(point[n]) for n in names])
    J = np.zeros((len(names), len(names)))
    for j in range(len(names)):
        step = np.zeros(len(names))
        step[j] = eps
        J[:, j] = (np.array(f(x0 + step)) - np.array(f(x0 - step))) / (2 * eps)
    return names, J


def eigenfrequencies(J, tol=1e-9):
    """Distinct positive angular frequencies of the linear flow ``x' = J x``."""
    ev = np.linalg.eigvals(J)
    freqs = sorted({round(abs(z.imag), 12) for z in ev if abs(z.imag) > tol})
    return freqs


def _crossing_frequency(t, s):
    idx = np.nonzero((s[:-1] < 0) & (s[1:] >= 0))[0]
    if len(idx) < 2:
        raise ValueError("signal has fewer than two upward zero crossings")
    cross = t[idx] - s[idx] * (t[idx + 1] - t[idx]) / (s[idx + 1] - s[idx])
    period = (cross[-1] - cross[0]) / (len(cross) - 1)
    return 2 * math.pi / period


def measure_frequency(times, signal, detrend=1):
    """Dominant angular frequency of a sampled signal.

    Zero crossings of the detrended signal give a first estimate, which is
    refined by least squares on ``poly(t) + A cos(w t) + B sin(w t)`` so a
    slow drift from zero-frequency modes does not bias the result.
    """
    t = np.asarray(times, dtype=float)
    s = np.asarray(signal, dtype=float)
    guess = _crossing_frequency(t, s - np.polyval(np.polyfit(t, s, detrend), t))
    poly = np.vander(t / t[-1], detrend + 1)

    def residual(w):
        X = np.column_stack([poly, np.cos(w * t), np.sin(w * t)])
        coef, *_ = np.linalg.lstsq(X, s, rcond=None)
        r = s - X @ coef
        return float(r @ r)

    res = minimize_scalar(residual, bounds=(0.9 * guess, 1.1 * guess), method="bounded",
                          options={"xatol": 1e-10 * guess})
    return float(res.x)

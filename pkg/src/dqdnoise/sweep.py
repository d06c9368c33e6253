"""Parameter sweeps and figure presets with Fock-cutoff convergence control.

Axes may vary the noise frequency ("omega") or any of the model knobs
("g", "delta", "epsilon", "T"). Grid points are independent; when one
axis is the noise frequency, work factorizes over the other axis so the
steady state and projector are reused across frequencies. Results are
placed by grid index, so output is deterministic and independent of the
worker count. Per-point failures become explicit gap entries (NaN in
the arrays, null in serialized output), never silent interpolation.

Cutoff policy baked into the presets: T = 0 runs at N_b = 6, T <= omega_b
at N_b = 15, hotter at N_b = 25 (thermal tails dominate the cutoff need);
:func:`fock_convergence` provides the ladder check behind those choices.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConvergenceFailure, NumericalError
from .model import ModelParams, build_hamiltonian, build_jc_hamiltonian, build_operators
from .noise import ResolventSolver, _pair_value
from .steady import currents, fano_number, min_quadrature_variance, solve_steady_state
from .superop import build_liouvillian

__all__ = [
    "SweepAxis",
    "SweepSpec",
    "GridResult",
    "AXIS_NAMES",
    "QUANTITIES",
    "PRESET_NAMES",
    "fock_convergence",
    "run_sweep",
    "preset",
    "cutoff_policy",
]

AXIS_NAMES = ("omega", "g", "delta", "epsilon", "T")
_PARAM_FIELD = {"g": "g", "delta": "delta", "epsilon": "epsilon", "T": "temperature"}

#: quantity -> (channel pair, normalization); None marks steady-state-only
QUANTITIES = {
    "S_ee": (("e", "e"), "fano"),
    "S_bb": (("b", "b"), "fano"),
    "S_eb": (("e", "b"), "raw"),
    "I_e": None,
    "I_b": None,
    "F_Q": None,
    "quad_min": None,
}


@dataclass(frozen=True)
class SweepAxis:
    """One sweep axis: either a (start, stop, count) range or explicit values."""

    name: str
    start: float = 0.0
    stop: float = 0.0
    count: int = 0
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.name not in AXIS_NAMES:
            raise ValueError(f"unknown axis {self.name!r}; expected one of {AXIS_NAMES}")
        if self.values is not None:
            if len(self.values) < 2:
                raise ValueError(f"axis {self.name!r} needs at least 2 values")
        elif self.count < 2:
            raise ValueError(f"axis {self.name!r}: counts >= 2 required, got {self.count}")

    def grid(self) -> np.ndarray:
        if self.values is not None:
            return np.asarray(self.values, dtype=float)
        return np.linspace(self.start, self.stop, self.count)


@dataclass(frozen=True)
class SweepSpec:
    """Base parameters plus up to two axes and the quantities to evaluate.

    ``hamiltonian`` picks the coherent part of the master equation:
    "full" (the complete dot-resonator coupling) or "jc" (the
    rotating-wave form used for the spectroscopy figures).
    """

    base: ModelParams
    axes: tuple[SweepAxis, ...]
    quantities: tuple[str, ...]
    preset: str | None = None
    hamiltonian: str = "full"

    def __post_init__(self):
        if not 1 <= len(self.axes) <= 2:
            raise ValueError(f"need 1 or 2 axes, got {len(self.axes)}")
        names = [a.name for a in self.axes]
        if len(set(names)) != len(names):
            raise ValueError(f"axis parameters must be distinct, got {names}")
        for q in self.quantities:
            if q not in QUANTITIES:
                raise ValueError(f"unknown quantity {q!r}; expected one of {sorted(QUANTITIES)}")
        if not self.quantities:
            raise ValueError("at least one quantity required")
        if self.hamiltonian not in ("full", "jc"):
            raise ValueError(f"hamiltonian must be 'full' or 'jc', got {self.hamiltonian!r}")

    def to_manifest(self) -> dict:
        """Stable serialized form (used for preset fidelity checks)."""
        base = {k: getattr(self.base, k) for k in (
            "epsilon", "delta", "g", "omega_b", "gamma_L", "gamma_R",
            "gamma_b", "temperature", "n_fock")}
        axes = [
            {"name": a.name, "start": a.start, "stop": a.stop, "count": a.count,
             "values": list(a.values) if a.values is not None else None}
            for a in self.axes
        ]
        return {"preset": self.preset, "base": base, "axes": axes,
                "quantities": list(self.quantities), "hamiltonian": self.hamiltonian}


@dataclass
class GridResult:
    """Evaluated sweep grid; arrays are indexed [axis1][axis2]."""

    spec: SweepSpec
    axis_values: tuple[np.ndarray, ...]
    data: dict[str, np.ndarray]
    cutoff_used: int
    convergence_report: dict
    gaps: list[tuple[tuple[int, ...], str]] = field(default_factory=list)


def cutoff_policy(temperature: float, omega_b: float = 1.0) -> int:
    """Documented starting cutoff per bath temperature."""
    t = temperature / omega_b
    if t == 0.0:
        return 6
    if t <= 1.0:
        return 15
    return 25


_HAMILTONIAN_BUILDERS = {"full": build_hamiltonian, "jc": build_jc_hamiltonian}


def _steady_probe(params: ModelParams, hamiltonian: str = "full") -> tuple[float, float]:
    """Default convergence probe: electron current and mean phonon number."""
    space = params.space()
    ops = build_operators(space)
    h = _HAMILTONIAN_BUILDERS[hamiltonian](params, space, ops)
    liouv = build_liouvillian(h, params)
    ss = solve_steady_state(liouv)
    cur = currents(ss, liouv)
    mean_n = float(np.real(np.trace(ops.number @ ss.rho_ss)))
    return cur.e, mean_n


def fock_convergence(params: ModelParams, probe=None, start: int = 1,
                     max_cutoff: int = 40, rtol: float = 1e-6) -> int:
    """Smallest cutoff N_b whose probes move by less than ``rtol`` relative
    when raised to N_b + 3. Raises ConvergenceFailure at the cap."""
    probe = probe or _steady_probe
    cache: dict[int, tuple[float, ...]] = {}

    def values(n: int) -> tuple[float, ...]:
        if n not in cache:
            cache[n] = tuple(probe(replace(params, n_fock=n)))
        return cache[n]

    n = max(1, start)
    while n <= max_cutoff:
        v1, v2 = values(n), values(n + 3)
        rel = max(
            abs(a - b) / max(abs(a), abs(b), 1e-12) for a, b in zip(v1, v2)
        )
        if rel < rtol:
            return n
        n += 1
    raise ConvergenceFailure(
        f"Fock cutoff did not converge below N_b = {max_cutoff} (rtol {rtol:g})"
    )


def _axis_params(base: ModelParams, names: list[str], vals: list[float],
                 n_fock: int) -> ModelParams:
    kw = {"n_fock": n_fock}
    for name, val in zip(names, vals):
        if name != "omega":
            kw[_PARAM_FIELD[name]] = float(val)
    return replace(base, **kw)


class _PointEngine:
    """Steady state plus lazily built resolvent machinery for one parameter point."""

    def __init__(self, params: ModelParams, hamiltonian: str = "full"):
        self.params = params
        space = params.space()
        self.ops = build_operators(space)
        h = _HAMILTONIAN_BUILDERS[hamiltonian](params, space, self.ops)
        self.liouv = build_liouvillian(h, params)
        self.ss = solve_steady_state(self.liouv)
        self._solver = None
        self._currents = None

    @property
    def solver(self) -> ResolventSolver:
        if self._solver is None:
            self._solver = ResolventSolver(self.liouv, self.ss)
        return self._solver

    @property
    def flux(self):
        if self._currents is None:
            self._currents = currents(self.ss, self.liouv)
        return self._currents

    def quantity(self, name: str, omega: float) -> float:
        if name == "I_e":
            return self.flux.e
        if name == "I_b":
            return self.flux.b
        if name == "F_Q":
            return fano_number(self.ss)
        if name == "quad_min":
            return min_quadrature_variance(self.ss)[1]
        (i, j), norm = QUANTITIES[name]
        flux_i = {"e": self.flux.e, "b": self.flux.b}[i]
        value = _pair_value(self.solver, self.liouv, i, j, omega, flux_i)
        if norm == "fano":
            if flux_i <= 0:
                raise NumericalError(f"cannot Fano-normalize {name}: zero channel flux")
            value /= 2.0 * flux_i
        return value


def run_sweep(spec: SweepSpec, workers: int = 1, fail_fast: bool = False,
              cutoff: int | str | None = None) -> GridResult:
    """Evaluate a sweep grid.

    ``cutoff`` is the Fock cutoff to run at: None uses the spec's base
    n_fock (presets carry their documented policy value), "auto" runs the
    convergence ladder on the most demanding grid corners, an int forces
    a value. Output is deterministic for a given spec regardless of
    ``workers``.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    report: dict = {"mode": "fixed"}
    if cutoff is None:
        n_fock = spec.base.n_fock
    elif cutoff == "auto":
        corners = [[]]
        for axis in spec.axes:
            if axis.name == "omega":
                continue
            g = axis.grid()
            lo, hi = float(g.min()), float(g.max())
            extremes = {min(lo, hi, key=abs), max(lo, hi, key=abs)}
            corners = [c + [(axis.name, v)] for c in corners for v in sorted(extremes)]
        n_fock = spec.base.n_fock
        probe = lambda p: _steady_probe(p, spec.hamiltonian)  # noqa: E731
        for corner in corners:
            p = _axis_params(spec.base, [n for n, _ in corner], [v for _, v in corner],
                             spec.base.n_fock)
            n_fock = max(n_fock, fock_convergence(p, probe=probe))
        report = {"mode": "auto", "corners": len(corners)}
    else:
        n_fock = int(cutoff)
    report["cutoff"] = n_fock

    axis_values = tuple(a.grid() for a in spec.axes)
    shape = tuple(len(v) for v in axis_values)
    data = {q: np.full(shape, np.nan) for q in spec.quantities}
    gaps: list[tuple[tuple[int, ...], str]] = []

    names = [a.name for a in spec.axes]
    omega_axis = names.index("omega") if "omega" in names else None
    param_axes = [k for k in range(len(names)) if k != omega_axis]

    # one task per non-omega grid index; frequencies reuse the factorizations
    task_indices = [()] if not param_axes else [
        idx for idx in np.ndindex(*(shape[k] for k in param_axes))
    ]

    def run_task(task_idx):
        pnames = [names[k] for k in param_axes]
        pvals = [float(axis_values[k][i]) for k, i in zip(param_axes, task_idx)]
        try:
            engine = _PointEngine(_axis_params(spec.base, pnames, pvals, n_fock),
                                  spec.hamiltonian)
        except Exception as exc:  # noqa: BLE001 - recorded as an explicit gap
            return [(_full_index(task_idx, w_i), None, str(exc))
                    for w_i in _omega_indices()]
        out = []
        for w_i in _omega_indices():
            omega = float(axis_values[omega_axis][w_i]) if omega_axis is not None else 0.0
            full = _full_index(task_idx, w_i)
            try:
                vals = {q: engine.quantity(q, omega) for q in spec.quantities}
                out.append((full, vals, None))
            except Exception as exc:  # noqa: BLE001
                out.append((full, None, str(exc)))
        return out

    def _omega_indices():
        return range(shape[omega_axis]) if omega_axis is not None else [None]

    def _full_index(task_idx, w_i):
        full = [0] * len(shape)
        for k, i in zip(param_axes, task_idx):
            full[k] = i
        if omega_axis is not None:
            full[omega_axis] = w_i
        return tuple(full)

    if workers == 1:
        results = map(run_task, task_indices)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_task, task_indices))

    for chunk in results:
        for full, vals, err in chunk:
            if err is not None:
                gaps.append((full, err))
                if fail_fast:
                    raise NumericalError(f"sweep point {full} failed: {err}")
                continue
            for q, v in vals.items():
                data[q][full] = v

    return GridResult(spec=spec, axis_values=axis_values, data=data,
                      cutoff_used=n_fock, convergence_report=report, gaps=gaps)


def _fig2_base(**kw) -> ModelParams:
    defaults = dict(epsilon=0.0, delta=0.5, g=0.0, omega_b=1.0,
                    gamma_L=0.01, gamma_R=0.01, gamma_b=0.05, temperature=0.0,
                    n_fock=6)
    defaults.update(kw)
    return ModelParams(**defaults)


def _fig5_base(**kw) -> ModelParams:
    defaults = dict(epsilon=0.0, delta=0.1, g=0.0008, omega_b=1.0,
                    gamma_L=0.1, gamma_R=0.001, gamma_b=0.01, temperature=0.0,
                    n_fock=8)
    defaults.update(kw)
    return ModelParams(**defaults)


def _presets() -> dict[str, SweepSpec]:
    omega_axis = SweepAxis(name="omega", start=0.2, stop=1.8, count=161)
    return {
        "fig2": SweepSpec(
            base=_fig2_base(),
            axes=(SweepAxis(name="g", start=0.0, stop=0.4, count=21), omega_axis),
            quantities=("S_ee",),
            preset="fig2",
            hamiltonian="jc",
        ),
        "fig3": SweepSpec(
            base=_fig2_base(g=0.4, n_fock=15),
            axes=(SweepAxis(name="T", values=(0.0, 0.5, 1.0)),
                  SweepAxis(name="omega", start=0.2, stop=1.8, count=321)),
            quantities=("S_ee",),
            preset="fig3",
            hamiltonian="jc",
        ),
        "fig4a": SweepSpec(
            base=_fig2_base(g=0.1),
            axes=(SweepAxis(name="delta", start=0.3, stop=0.7, count=17), omega_axis),
            quantities=("S_ee",),
            preset="fig4a",
            hamiltonian="jc",
        ),
        "fig4b": SweepSpec(
            base=_fig2_base(g=0.4),
            axes=(SweepAxis(name="delta", start=0.3, stop=0.7, count=17), omega_axis),
            quantities=("S_ee",),
            preset="fig4b",
            hamiltonian="jc",
        ),
        "fig5a": SweepSpec(
            base=_fig5_base(n_fock=25),
            axes=(SweepAxis(name="epsilon", start=-2.0, stop=2.0, count=81),
                  SweepAxis(name="T", values=(0.0, 0.5, 1.0, 1.5, 2.0))),
            quantities=("S_ee",),
            preset="fig5a",
        ),
        "fig5b": SweepSpec(
            base=_fig5_base(),
            axes=(SweepAxis(name="epsilon", start=-2.0, stop=2.0, count=81),
                  SweepAxis(name="g", values=(0.0, 0.1, 0.2, 0.4))),
            quantities=("S_ee",),
            preset="fig5b",
        ),
        "fig5c": SweepSpec(
            base=_fig5_base(),
            axes=(SweepAxis(name="epsilon", start=-2.0, stop=2.0, count=81),
                  SweepAxis(name="g", values=(0.0, 0.1, 0.2, 0.4))),
            quantities=("S_eb",),
            preset="fig5c",
        ),
        "fig6a": SweepSpec(
            base=_fig2_base(n_fock=15),
            axes=(SweepAxis(name="g", start=0.0, stop=0.4, count=21),
                  SweepAxis(name="T", values=(0.0, 0.5, 1.0))),
            quantities=("S_bb",),
            preset="fig6a",
        ),
        "fig6b": SweepSpec(
            base=_fig2_base(n_fock=15),
            axes=(SweepAxis(name="g", start=0.0, stop=0.4, count=21),
                  SweepAxis(name="T", values=(0.0, 0.5, 1.0))),
            quantities=("F_Q",),
            preset="fig6b",
        ),
        "fig6c": SweepSpec(
            base=_fig2_base(n_fock=15),
            axes=(SweepAxis(name="g", start=0.0, stop=0.4, count=21),
                  SweepAxis(name="T", values=(0.0, 0.5, 1.0))),
            quantities=("S_eb",),
            preset="fig6c",
        ),
    }


PRESET_NAMES = tuple(sorted(_presets()))


def preset(name: str) -> SweepSpec:
    """Figure preset with the caption parameters and documented grid density."""
    table = _presets()
    if name not in table:
        raise KeyError(f"unknown preset {name!r}; known: {', '.join(sorted(table))}")
    return table[name]

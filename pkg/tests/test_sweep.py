import json
import pathlib

import numpy as np
import pytest

from dqdnoise.errors import ConvergenceFailure, NumericalError
from dqdnoise.model import ModelParams
from dqdnoise.noise import noise_resolvent
from dqdnoise.sweep import (
    PRESET_NAMES,
    SweepAxis,
    SweepSpec,
    cutoff_policy,
    fock_convergence,
    preset,
    run_sweep,
)

HERE = pathlib.Path(__file__).parent


class TestSpecValidation:
    def test_count_minimum(self):
        with pytest.raises(ValueError, match="counts >= 2"):
            SweepAxis(name="g", start=0, stop=1, count=1)

    def test_unknown_axis(self):
        with pytest.raises(ValueError):
            SweepAxis(name="frequency", start=0, stop=1, count=3)

    def test_distinct_axes(self):
        ax = SweepAxis(name="g", start=0, stop=0.4, count=3)
        with pytest.raises(ValueError, match="distinct"):
            SweepSpec(base=ModelParams(), axes=(ax, ax), quantities=("I_e",))

    def test_unknown_quantity(self):
        ax = SweepAxis(name="g", start=0, stop=0.4, count=3)
        with pytest.raises(ValueError, match="quantity"):
            SweepSpec(base=ModelParams(), axes=(ax,), quantities=("S_xx",))

    def test_explicit_values_grid(self):
        ax = SweepAxis(name="T", values=(0.0, 0.5, 1.0))
        assert np.array_equal(ax.grid(), [0.0, 0.5, 1.0])


class TestFockConvergence:
    def test_vacuum_exact(self):
        p = ModelParams(delta=0.5, g=0.0, temperature=0.0)
        assert fock_convergence(p) == 1

    def test_fig2_regime_small(self):
        p = ModelParams(delta=0.5, g=0.2, temperature=0.0)
        assert fock_convergence(p) <= 6

    def test_monotone_in_temperature(self):
        cold = fock_convergence(ModelParams(delta=0.5, g=0.2, temperature=0.0))
        hot = fock_convergence(ModelParams(delta=0.5, g=0.2, temperature=1.0))
        assert hot > cold

    def test_cap_failure(self):
        p = ModelParams(delta=0.5, g=0.2, temperature=2.0)
        with pytest.raises(ConvergenceFailure):
            fock_convergence(p, max_cutoff=4)

    def test_policy_values(self):
        assert cutoff_policy(0.0) == 6
        assert cutoff_policy(1.0) == 15
        assert cutoff_policy(2.0) == 25


class TestPresets:
    def test_unknown_name(self):
        with pytest.raises(KeyError):
            preset("fig9")

    def test_fig2_caption_parameters(self):
        spec = preset("fig2")
        b = spec.base
        assert (b.omega_b, b.gamma_L, b.gamma_R, b.delta, b.gamma_b,
                b.temperature, b.epsilon) == (1.0, 0.01, 0.01, 0.5, 0.05, 0.0, 0.0)

    def test_fig5b_caption_parameters(self):
        spec = preset("fig5b")
        b = spec.base
        assert (b.gamma_L, b.gamma_R, b.delta, b.gamma_b, b.temperature) == \
            (0.1, 0.001, 0.1, 0.01, 0.0)
        g_axis = [a for a in spec.axes if a.name == "g"][0]
        assert g_axis.values == (0.0, 0.1, 0.2, 0.4)

    def test_fig6a_quantity(self):
        spec = preset("fig6a")
        assert spec.quantities == ("S_bb",)
        assert spec.base.epsilon == 0.0 and spec.base.delta == 0.5
        assert {a.name for a in spec.axes} == {"g", "T"}

    def test_manifest_byte_match(self):
        stored = json.loads((HERE / "preset_manifest.json").read_text())
        live = {name: preset(name).to_manifest() for name in PRESET_NAMES}
        assert json.dumps(live, sort_keys=True) == json.dumps(stored, sort_keys=True)


class TestRunSweep:
    def test_deterministic_across_workers(self):
        spec = SweepSpec(
            base=ModelParams(delta=0.5, n_fock=4),
            axes=(SweepAxis(name="g", start=0.0, stop=0.3, count=4),),
            quantities=("I_e", "F_Q"),
        )
        r1 = run_sweep(spec, workers=1)
        r4 = run_sweep(spec, workers=4)
        for q in spec.quantities:
            assert np.array_equal(r1.data[q], r4.data[q])

    def test_2d_grid_shape_and_values(self):
        spec = SweepSpec(
            base=ModelParams(delta=0.5, g=0.2, n_fock=4),
            axes=(SweepAxis(name="g", values=(0.1, 0.2)),
                  SweepAxis(name="omega", start=0.8, stop=1.2, count=3)),
            quantities=("S_ee",),
        )
        result = run_sweep(spec)
        assert result.data["S_ee"].shape == (2, 3)
        assert not np.any(np.isnan(result.data["S_ee"]))
        # spot check one grid point against the direct computation
        from conftest import transport_bundle
        from dqdnoise.steady import currents

        p = ModelParams(delta=0.5, g=0.2, n_fock=4)
        _, liouv, ss = transport_bundle(p)
        expected = noise_resolvent(liouv, ss, "e", "e", 1.0) / (2 * currents(ss, liouv).e)
        assert result.data["S_ee"][1, 1] == pytest.approx(expected, rel=1e-12)

    def test_quantities_at_zero_frequency_without_omega_axis(self):
        spec = SweepSpec(
            base=ModelParams(delta=0.5, n_fock=4),
            axes=(SweepAxis(name="g", values=(0.1, 0.2)),),
            quantities=("S_ee", "S_eb"),
        )
        result = run_sweep(spec)
        from conftest import transport_bundle
        from dqdnoise.steady import currents

        p = ModelParams(delta=0.5, g=0.1, n_fock=4)
        _, liouv, ss = transport_bundle(p)
        s0 = noise_resolvent(liouv, ss, "e", "e", 0.0) / (2 * currents(ss, liouv).e)
        assert result.data["S_ee"][0] == pytest.approx(s0, rel=1e-12)

    def test_failed_points_become_gaps(self):
        # Delta = g = 0 blocks transport; Fano normalization of S_ee fails
        spec = SweepSpec(
            base=ModelParams(delta=0.0, g=0.0, n_fock=2),
            axes=(SweepAxis(name="epsilon", values=(0.0, 0.5)),),
            quantities=("S_ee",),
        )
        result = run_sweep(spec)
        assert len(result.gaps) == 2
        assert np.all(np.isnan(result.data["S_ee"]))

    def test_fail_fast_raises(self):
        spec = SweepSpec(
            base=ModelParams(delta=0.0, g=0.0, n_fock=2),
            axes=(SweepAxis(name="epsilon", values=(0.0, 0.5)),),
            quantities=("S_ee",),
        )
        with pytest.raises(NumericalError):
            run_sweep(spec, fail_fast=True)

    def test_explicit_cutoff_respected(self):
        spec = SweepSpec(
            base=ModelParams(delta=0.5, n_fock=6),
            axes=(SweepAxis(name="g", values=(0.0, 0.1)),),
            quantities=("I_e",),
        )
        result = run_sweep(spec, cutoff=3)
        assert result.cutoff_used == 3

    def test_auto_cutoff_reported(self):
        spec = SweepSpec(
            base=ModelParams(delta=0.5, n_fock=2),
            axes=(SweepAxis(name="g", values=(0.0, 0.1)),),
            quantities=("I_e",),
        )
        result = run_sweep(spec, cutoff="auto")
        assert result.convergence_report["mode"] == "auto"
        assert result.cutoff_used >= 2

    def test_jc_hamiltonian_variant(self):
        spec = SweepSpec(
            base=ModelParams(delta=0.5, g=0.2, n_fock=4),
            axes=(SweepAxis(name="omega", start=0.9, stop=1.1, count=3),),
            quantities=("S_ee",),
            hamiltonian="jc",
        )
        full = run_sweep(SweepSpec(base=spec.base, axes=spec.axes,
                                   quantities=spec.quantities))
        jc = run_sweep(spec)
        assert not np.allclose(full.data["S_ee"], jc.data["S_ee"])

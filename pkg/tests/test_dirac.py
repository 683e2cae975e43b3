import math

import numpy as np
import pytest

from schurdirac import (
    CSV_COLUMNS,
    BadRange,
    DiracChannelSpec,
    HypothesisFailed,
    InvalidQuantumNumbers,
    RadialGrid,
    build_channel,
    build_grid,
    c2_consistency,
    channel_spectrum,
    check_admissibility,
    embedding_delta,
    full_matrix,
    hardy_sweep,
    sommerfeld_energy,
)

GROUND = DiracChannelSpec(kappa=-1, nu=0.5, gamma=0.5)


class TestBuildGrid:
    def test_uniform_five_nodes(self):
        g = build_grid("uniform", 5, 1.0, 5.0)
        assert g.nodes.tolist() == [1.0, 2.0, 3.0, 4.0, 5.0]

    def test_logarithmic_three_nodes(self):
        g = build_grid("logarithmic", 3, 1.0, 100.0)
        assert g.nodes == pytest.approx([1.0, 10.0, 100.0], rel=1e-12)

    def test_bad_ranges(self):
        with pytest.raises(BadRange):
            build_grid("uniform", 16, 2.0, 1.0)
        with pytest.raises(BadRange):
            build_grid("uniform", 1, 1.0, 2.0)
        with pytest.raises(BadRange):
            build_grid("quadratic", 16, 1.0, 2.0)
        with pytest.raises(BadRange):
            build_grid("logarithmic", 16, 0.0, 2.0)
        with pytest.raises(BadRange):
            build_grid("logarithmic", 16, -1.0, 2.0)

    def test_uniform_spacings(self):
        g = build_grid("uniform", 5, 1.0, 5.0)
        assert g.forward_spacings() == pytest.approx([1.0] * 5)

    def test_logarithmic_ghost_keeps_ratio(self):
        g = build_grid("logarithmic", 4, 1.0, 8.0)
        h = g.forward_spacings()
        # constant-ratio grid: spacings are geometric, ghost included
        ratios = h[1:] / h[:-1]
        assert ratios == pytest.approx([2.0, 2.0, 2.0], rel=1e-12)

    def test_nodes_read_only(self):
        g = build_grid("uniform", 5, 1.0, 5.0)
        with pytest.raises(ValueError):
            g.nodes[0] = 0.0

    def test_grid_validates_consistency(self):
        with pytest.raises(BadRange):
            RadialGrid("uniform", 3, 1.0, 3.0, np.array([1.0, 2.5, 2.0]))
        with pytest.raises(BadRange):
            RadialGrid("uniform", 3, 1.0, 3.0, np.array([1.0, 2.0, 4.0]))


class TestChannelSpec:
    def test_valid(self):
        assert GROUND.kappa == -1
        assert GROUND.nu == 0.5

    def test_kappa_zero(self):
        with pytest.raises(InvalidQuantumNumbers):
            DiracChannelSpec(kappa=0, nu=0.5, gamma=0.5)

    def test_kappa_non_integer(self):
        with pytest.raises(InvalidQuantumNumbers):
            DiracChannelSpec(kappa=1.5, nu=0.5, gamma=0.5)

    def test_nu_band(self):
        with pytest.raises(HypothesisFailed):
            DiracChannelSpec(kappa=-1, nu=0.0, gamma=0.5)
        with pytest.raises(HypothesisFailed):
            DiracChannelSpec(kappa=-1, nu=1.3, gamma=0.5)
        DiracChannelSpec(kappa=-1, nu=1.2, gamma=0.5)  # band edge constructs

    def test_gamma_positive(self):
        with pytest.raises(HypothesisFailed):
            DiracChannelSpec(kappa=-1, nu=0.5, gamma=0.0)


class TestBuildChannel:
    def test_two_node_uniform_blocks(self):
        g = build_grid("uniform", 2, 1.0, 2.0)
        B = build_channel(GROUND, g)
        assert B.S.diagonal() == pytest.approx([1.0, 0.75])
        assert B.P.diagonal() == pytest.approx([1.0, 1.25])
        assert B.c1 == 0.5

    def test_two_node_uniform_coupling(self):
        g = build_grid("uniform", 2, 1.0, 2.0)
        T = build_channel(GROUND, g).T.toarray()
        # D = [[-1, 1], [0, -1]] plus kappa/r = diag(-1, -0.5)
        assert T == pytest.approx(np.array([[-2.0, 1.0], [0.0, -1.5]]))

    def test_uniform_reduces_to_forward_difference(self):
        g = build_grid("uniform", 6, 1.0, 6.0)
        spec = DiracChannelSpec(kappa=1, nu=0.5, gamma=0.5)
        T = build_channel(spec, g).T.toarray()
        D = T - np.diag(spec.kappa / g.nodes)
        h = 1.0
        expect = (np.diag(-np.ones(6)) + np.diag(np.ones(5), 1)) / h
        assert D == pytest.approx(expect)

    def test_q_is_exact_transpose(self):
        g = build_grid("logarithmic", 40, 1e-2, 10.0)
        B = build_channel(GROUND, g)
        assert (B.Q - B.T.T).nnz == 0
        H = full_matrix(B)
        assert (H - H.T).nnz == 0

    def test_zero_potential_blocks(self):
        g = build_grid("uniform", 4, 1.0, 4.0)
        B = build_channel(GROUND, g, potential=np.zeros(4))
        assert B.P.diagonal() == pytest.approx([1.5] * 4)
        assert B.S.diagonal() == pytest.approx([0.5] * 4)
        assert B.c1 == pytest.approx(0.5)

    def test_callable_potential_matches_builtin(self):
        g = build_grid("logarithmic", 30, 1e-2, 10.0)
        B0 = build_channel(GROUND, g)
        B1 = build_channel(GROUND, g, potential=lambda r: -GROUND.nu / r)
        assert np.array_equal(B0.S.diagonal(), B1.S.diagonal())
        assert np.array_equal(B0.P.diagonal(), B1.P.diagonal())

    def test_sampled_potential_length_mismatch(self):
        g = build_grid("uniform", 4, 1.0, 4.0)
        with pytest.raises(BadRange):
            build_channel(GROUND, g, potential=np.zeros(5))


class TestAdmissibility:
    def test_subcritical(self):
        g = build_grid("logarithmic", 50, 1e-3, 10.0)
        rep = check_admissibility(GROUND, g)
        assert rep.coupling_sup == pytest.approx(0.5, rel=1e-12)
        assert rep.coupling_ok
        assert rep.integral_bounded

    def test_integral_limit_value(self):
        # closed form at kappa=-1, nu=gamma=0.5: int_0^1 4r^2/(1+r)^4 dr = 1/6
        g = build_grid("logarithmic", 50, 1e-3, 10.0)
        rep = check_admissibility(GROUND, g)
        assert rep.integral_estimates[-1] == pytest.approx(1.0 / 6.0, abs=1e-6)
        diffs = np.abs(np.diff(rep.integral_estimates))
        assert diffs[-1] < diffs[0]

    def test_supercritical_flagged(self):
        spec = DiracChannelSpec(kappa=-1, nu=1.05, gamma=0.5)
        g = build_grid("logarithmic", 50, 1e-3, 10.0)
        rep = check_admissibility(spec, g)
        assert rep.coupling_sup == pytest.approx(1.05, rel=1e-12)
        assert not rep.coupling_ok

    def test_sampled_reports_sup_only(self):
        g = build_grid("uniform", 4, 1.0, 4.0)
        rep = check_admissibility(GROUND, g, potential=np.zeros(4))
        assert rep.coupling_sup == 0.0
        assert rep.coupling_ok
        assert rep.integral_bounded is None
        assert rep.integral_cutoffs == ()


class TestSommerfeld:
    def test_ground_state(self):
        assert sommerfeld_energy(1, -1, 0.5) == pytest.approx(
            math.sqrt(0.75), abs=1e-15
        )

    def test_first_excited(self):
        want = 1.0 / math.sqrt(1.0 + 0.25 / (1.0 + math.sqrt(0.75)) ** 2)
        assert sommerfeld_energy(2, -1, 0.5) == pytest.approx(want, abs=1e-15)
        assert want == pytest.approx(0.9659258262890683, abs=1e-12)

    def test_kappa_plus_one_degeneracy(self):
        # same n - |kappa| + sqrt(kappa^2 - nu^2) for kappa = +/-1 at n = 2
        assert sommerfeld_energy(2, 1, 0.5) == sommerfeld_energy(2, -1, 0.5)

    def test_zero_coupling(self):
        assert sommerfeld_energy(1, -1, 0.0) == 1.0

    def test_invalid_quantum_numbers(self):
        with pytest.raises(InvalidQuantumNumbers):
            sommerfeld_energy(1, 0, 0.5)
        with pytest.raises(InvalidQuantumNumbers):
            sommerfeld_energy(1, 1, 0.5)  # kappa > 0 needs n >= kappa + 1
        with pytest.raises(InvalidQuantumNumbers):
            sommerfeld_energy(2, 1, 1.0)  # nu must stay below |kappa|
        with pytest.raises(InvalidQuantumNumbers):
            sommerfeld_energy(0, -1, 0.5)
        with pytest.raises(InvalidQuantumNumbers):
            sommerfeld_energy(1.5, -1, 0.5)


class TestChannelSpectrum:
    def test_ground_and_excited(self):
        g = build_grid("logarithmic", 1500, 1e-4, 100.0)
        e1, e2 = channel_spectrum(GROUND, g, k=2)
        assert abs(e1 - sommerfeld_energy(1, -1, 0.5)) <= 2e-3
        assert abs(e2 - sommerfeld_energy(2, -1, 0.5)) <= 1e-3

    def test_truncation_error_decays_with_domain(self):
        # near-zero coupling: the lowest state is the box mode at
        # E ~ 1 + pi^2/(2 r_max^2), so growing the domain must shrink |E - 1|
        spec = DiracChannelSpec(kappa=-1, nu=1e-6, gamma=0.5)
        errs = []
        for r_max in (100.0, 200.0, 400.0):
            g = build_grid("logarithmic", 1200, 1e-3, r_max)
            (e1,) = channel_spectrum(spec, g, k=1)
            errs.append(abs(e1 - 1.0))
        assert errs[1] < errs[0]
        assert errs[2] < errs[1]

    def test_energy_monotone_in_coupling(self):
        g = build_grid("logarithmic", 800, 1e-4, 60.0)
        energies = []
        for nu in (0.1, 0.3, 0.5, 0.7, 0.9):
            spec = DiracChannelSpec(kappa=-1, nu=nu, gamma=0.5)
            energies.append(channel_spectrum(spec, g, k=1)[0])
        assert all(a > b for a, b in zip(energies, energies[1:]))

    def test_k_validation(self):
        g = build_grid("logarithmic", 100, 1e-2, 10.0)
        with pytest.raises(ValueError):
            channel_spectrum(GROUND, g, k=0)


class TestHardySweep:
    def test_margins_decrease_with_coupling(self):
        g = build_grid("logarithmic", 600, 1e-4, 60.0)
        rep = hardy_sweep(-1, [0.3, 0.5, 0.7, 0.9], 0.5, [g])
        margins = [c.margin for c in rep.cells]
        assert all(m is not None for m in margins)
        assert all(a > b for a, b in zip(margins, margins[1:]))
        assert rep.margins_for(0.5)[0] >= 0.0
        assert rep.nu_star is None

    def test_supercritical_margin_goes_negative(self):
        g = build_grid("logarithmic", 1000, 1e-4, 100.0)
        rep = hardy_sweep(-1, [0.9, 1.1], 0.5, [g])
        m09, m11 = (rep.margins_for(nu)[0] for nu in (0.9, 1.1))
        assert m09 >= 0.0
        assert m11 < 0.0
        assert rep.nu_star == 1.1

    def test_cell_error_capture(self):
        g = build_grid("logarithmic", 50, 1e-3, 10.0)
        rep = hardy_sweep(-1, [0.5, 1.25], 0.5, [g])
        good, bad = rep.cells
        assert good.error is None and good.margin is not None
        assert bad.error is not None and bad.margin is None
        assert "1.25" in bad.error

    def test_cells_are_nu_major(self):
        g1 = build_grid("logarithmic", 40, 1e-3, 10.0)
        g2 = build_grid("logarithmic", 80, 1e-3, 10.0)
        rep = hardy_sweep(-1, [0.4, 0.6], 0.5, [g1, g2])
        layout = [(c.nu, c.grid_N) for c in rep.cells]
        assert layout == [(0.4, 40), (0.4, 80), (0.6, 40), (0.6, 80)]
        assert len(rep.margins_for(0.4)) == 2

    def test_empty_arguments(self):
        g = build_grid("uniform", 4, 1.0, 4.0)
        with pytest.raises(ValueError):
            hardy_sweep(-1, [], 0.5, [g])
        with pytest.raises(ValueError):
            hardy_sweep(-1, [0.5], 0.5, [])


class TestC2Consistency:
    def test_matches_analytic_and_oracle(self):
        g = build_grid("logarithmic", 300, 1e-4, 100.0)
        c2n, c2a, diff = c2_consistency(GROUND, g)
        assert c2a == pytest.approx(1.0 + math.sqrt(0.75) - 0.5, abs=1e-15)
        assert diff == c2n - c2a
        assert abs(diff) < 0.05  # coarse grid, just sanity here

    def test_analytic_limit_small_coupling(self):
        g = build_grid("logarithmic", 100, 1e-3, 50.0)
        _, c2a, _ = c2_consistency(
            DiracChannelSpec(kappa=-1, nu=1e-8, gamma=0.5), g
        )
        assert c2a == pytest.approx(1.5, abs=1e-12)

    def test_supercritical_rejected(self):
        g = build_grid("logarithmic", 100, 1e-3, 50.0)
        with pytest.raises(HypothesisFailed):
            c2_consistency(DiracChannelSpec(kappa=-1, nu=1.05, gamma=0.5), g)


class TestStructure:
    def test_gamma_shift_covariance(self):
        # H(gamma') = H(gamma) - (gamma' - gamma) I exactly
        g = build_grid("logarithmic", 120, 1e-3, 50.0)
        s0 = DiracChannelSpec(kappa=-1, nu=0.5, gamma=0.5)
        s1 = DiracChannelSpec(kappa=-1, nu=0.5, gamma=0.8)
        w0 = np.linalg.eigvalsh(full_matrix(build_channel(s0, g)).toarray())
        w1 = np.linalg.eigvalsh(full_matrix(build_channel(s1, g)).toarray())
        assert np.allclose(w1, w0 - 0.3, atol=1e-10)

    def test_embedding_certifies_on_channel(self):
        g = build_grid("logarithmic", 500, 1e-4, 100.0)
        delta, certified = embedding_delta(build_channel(GROUND, g))
        assert certified
        assert 0.0 < delta < GROUND.gamma  # delta < c1 always

    def test_csv_columns_frozen(self):
        assert CSV_COLUMNS == (
            "nu",
            "grid_N",
            "grid_scheme",
            "margin",
            "c2_numeric",
            "c2_analytic",
            "e1_numeric",
            "e1_analytic",
        )

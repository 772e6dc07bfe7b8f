"""One-particle radiation: brute force against closed forms."""

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ticktock.operators import ScatterParams, basic_evolver, moved_evolver
from ticktock.single_particle import (
    DomainError,
    WindowError,
    asymptotic_closed,
    asymptotic_profile,
    cent_continuum,
    ent0_closed,
    evolve,
    internal_entropy,
    limiting_radiation_state,
    parity_coherence_norm,
    psi0_closed,
    psi_start,
    psi_tilde_closed,
    radiation_part,
    rho0_closed,
    rho_minus1_closed,
    rho_tilde_closed,
    rho_tilde_limit,
    shadow_entropy_closed,
    trajectory,
    v_level,
)
from ticktock.state import E, G, INTERNAL, BasisLabel, basis_state, inner_product, line, partial_trace


def _same(a, b, tol=1e-13):
    keys = set(a.amplitudes) | set(b.amplitudes)
    return max(abs(a.amplitude(k) - b.amplitude(k)) for k in keys) <= tol


class TestEvolve:
    def test_zero_steps(self):
        psi = psi_start(0)
        assert evolve(psi, basic_evolver(ScatterParams.from_q(0.9)), 0) is psi

    def test_negative_steps(self):
        with pytest.raises(ValueError):
            evolve(psi_start(0), basic_evolver(ScatterParams.from_q(0.9)), -1)

    @pytest.mark.parametrize("phase", [0.0, 0.8, -2.5])
    def test_matches_closed_state(self, phase):
        p = ScatterParams.from_q(0.85, phase)
        for n, s in enumerate(trajectory(psi_start(0), basic_evolver(p), 40)):
            assert _same(s, psi0_closed(n, p))

    @pytest.mark.parametrize("phase", [0.0, 1.3])
    def test_moved_matches_closed_state(self, phase):
        p = ScatterParams.from_q(0.6, phase)
        for n, s in enumerate(trajectory(psi_start(0), moved_evolver(p), 40)):
            assert _same(s, psi_tilde_closed(n, p))

    def test_v_level_tracks_history(self):
        p = ScatterParams.from_q(0.5)
        for n, s in enumerate(trajectory(psi_start(0), moved_evolver(p), 9)):
            assert s.amplitude(BasisLabel((line(0),), (v_level(n),))) != 0

    def test_support_bound(self):
        op = basic_evolver(ScatterParams.from_q(0.7))
        for n, s in enumerate(trajectory(psi_start(0), op, 30)):
            assert len(s) <= n + 1


class TestDecayEntropy:
    def test_examples(self):
        assert ent0_closed(0, 0.3) == 0.0
        assert ent0_closed(1, 0.5) == pytest.approx(1.0)
        assert ent0_closed(1, 0.9) == pytest.approx(0.46900, abs=1e-4)

    def test_density_matrix(self):
        op = basic_evolver(ScatterParams.from_q(0.8))
        for n, s in enumerate(trajectory(psi_start(0), op, 30)):
            rho = partial_trace(s, INTERNAL)
            assert np.allclose(rho.matrix, rho0_closed(n, 0.8).matrix, atol=1e-14)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(0.05, 0.99), st.floats(-3, 3))
    def test_brute_force(self, q, ph):
        op = basic_evolver(ScatterParams.from_q(q, ph))
        for n, s in enumerate(trajectory(psi_start(0), op, 25)):
            assert abs(internal_entropy(s) - ent0_closed(n, q)) < 1e-10

    def test_purity_restoration(self):
        assert ent0_closed(400, 0.9) < 1e-15


class TestContinuum:
    def test_examples(self):
        assert cent_continuum(0.0) == 0.0
        assert cent_continuum(1.0) == pytest.approx(1.0, abs=1e-12)

    def test_decreases_after_peak(self):
        vals = [cent_continuum(t) for t in np.arange(1.0, 40.0, 0.25)]
        assert all(a > b for a, b in zip(vals, vals[1:]))
        assert vals[-1] < 1e-9

    def test_negative_time(self):
        with pytest.raises(ValueError):
            cent_continuum(-0.5)


class TestShadow:
    def test_first_point(self):
        rho = rho_minus1_closed(1, 0.95)
        assert rho.population((E,)) == pytest.approx(0.05)
        assert rho.entropy() == pytest.approx(0.28640, abs=1e-4)

    def test_late_time(self):
        rho = rho_minus1_closed(2000, 0.95)
        assert rho.population((G,)) == pytest.approx(1.0, abs=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            rho_minus1_closed(0, 0.9)

    def test_brute_force(self):
        op = basic_evolver(ScatterParams.from_q(0.95))
        for n, s in enumerate(trajectory(psi_start(1), op, 200)):
            if n == 0:
                continue
            rho = partial_trace(s, INTERNAL)
            assert np.max(np.abs(rho.matrix - rho_minus1_closed(n, 0.95).matrix)) <= 1e-12
            assert abs(rho.entropy() - shadow_entropy_closed(n, 0.95)) <= 1e-10


class TestLimitingRadiation:
    def test_overlap(self):
        p = ScatterParams.from_q(0.9, 0.4)
        for m in (1, 3, 10, 25):
            rad = radiation_part(evolve(psi_start(0), basic_evolver(p), m))
            lim = limiting_radiation_state(m, p)
            assert inner_product(lim, rad) == pytest.approx(1 - 0.9 ** m, abs=1e-14)

    def test_norm(self):
        lim = limiting_radiation_state(10, ScatterParams.from_q(0.9))
        assert lim.norm_squared() == pytest.approx(1 - 0.9 ** 10)
        assert lim.norm_squared() == pytest.approx(0.65132, abs=1e-5)

    def test_front_only(self):
        p = ScatterParams.from_q(0.3)
        lim = limiting_radiation_state(1, p)
        assert dict(lim.items()) == {BasisLabel((line(1),), (G,)): p.beta}


class TestResidual:
    def test_examples(self):
        assert rho_tilde_closed(0, 0.4).population((E,)) == 1.0
        two = rho_tilde_closed(2, 0.5)
        assert two.population((E,)) == pytest.approx(0.75)
        assert two.population((G,)) == pytest.approx(0.25)
        lim = rho_tilde_limit(0.9)
        assert lim.population((E,)) == pytest.approx(0.52632, abs=1e-5)
        assert lim.entropy() == pytest.approx(0.99800, abs=1e-4)

    def test_first_step(self):
        # one step of the moved model leaves alpha|0,g> + beta|1,e>
        assert rho_tilde_closed(1, 0.9).population((E,)) == pytest.approx(0.1)

    @pytest.mark.parametrize("q", [0.5, 0.9])
    def test_brute_force(self, q):
        op = moved_evolver(ScatterParams.from_q(q))
        for n, s in enumerate(trajectory(psi_start(0), op, 300)):
            rho = partial_trace(s, INTERNAL)
            assert np.max(np.abs(rho.matrix - rho_tilde_closed(n, q).matrix)) <= 1e-10

    def test_subsequences_converge(self):
        lim = rho_tilde_limit(0.7).entropy()
        even = [rho_tilde_closed(n, 0.7).entropy() for n in range(0, 200, 2)]
        odd = [rho_tilde_closed(n, 0.7).entropy() for n in range(1, 200, 2)]
        assert abs(even[-1] - lim) < 1e-12 and abs(odd[-1] - lim) < 1e-12
        assert lim > 0

    def test_parity_sectors_decouple(self):
        op = moved_evolver(ScatterParams.from_q(0.8))
        for n, s in enumerate(trajectory(psi_start(0), op, 50)):
            assert parity_coherence_norm(s, n) <= 1e-14

    def test_plain_detector_is_coherent(self):
        s = evolve(psi_start(0), basic_evolver(ScatterParams.from_q(0.5)), 3)
        assert parity_coherence_norm(s, 3) > 0.1

    def test_basis_state_has_no_coherence(self):
        assert parity_coherence_norm(basis_state([line(2)], [E]), 0) == 0.0


class TestAsymptotic:
    @pytest.mark.parametrize("moved", [False, True])
    def test_profile(self, moved):
        p = ScatterParams.from_q(0.9, 0.6)
        op = moved_evolver(p) if moved else basic_evolver(p)
        prof = asymptotic_profile(op, psi_start(0), 45, 30)
        for xi in range(31):
            ref = asymptotic_closed(xi, p, moved)
            assert set(prof[xi]) == set(ref)
            for k, v in ref.items():
                assert abs(prof[xi][k] - v) < 1e-14

    def test_stationary(self):
        op = basic_evolver(ScatterParams.from_q(0.8, 0.2))
        a = asymptotic_profile(op, psi_start(0), 40, 30)
        b = asymptotic_profile(op, psi_start(0), 47, 30)
        for xi in a:
            for k in a[xi]:
                assert abs(a[xi][k] - b[xi][k]) < 1e-14

    def test_window(self):
        with pytest.raises(WindowError):
            asymptotic_profile(basic_evolver(ScatterParams.from_q(0.8)), psi_start(0), 10, 10)

    def test_moved_levels_alternate(self):
        p = ScatterParams.from_q(0.5)
        assert [next(iter(asymptotic_closed(xi, p, True))) for xi in range(4)] == [(E,), (G,), (E,), (G,)]
        assert math.isclose(abs(asymptotic_closed(3, p)[(G,)]), math.sqrt(0.5) ** 4)

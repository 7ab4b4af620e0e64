import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from eitchain import AtomParams, ChainConfig, InvalidRegime, PoleAtDressedState, WaveguideParams
from eitchain.bands import (
    cell_matrix,
    cos_KL_general,
    cos_KL_symmetric,
    cos_KL_transfer,
    dispersion_point,
    scan_bands,
)
from eitchain.bidirectional import chain_scatter

SYM = WaveguideParams(1.0, 1.0)


def _sym_atom(rabi=0.2, gamma=0.1):
    return AtomParams(1.0, rabi=rabi, gamma_r=gamma, gamma_l=gamma)


def test_dispersion_point_branches():
    p = dispersion_point(1.0, 0.5, 0.5)
    assert p.allowed and p.K_imag == 0 and p.K_real == pytest.approx(math.acos(0.5) / 0.5)
    q = dispersion_point(1.0, -2.0, 0.5)
    assert not q.allowed and q.K_real == pytest.approx(2 * math.pi) and q.K_imag == pytest.approx(math.acosh(2) / 0.5)
    assert dispersion_point(1.0, 3.0, 0.5).K_real == 0.0


def test_eit_point_is_free_propagation():
    # at two-photon resonance the emitter is invisible
    for L in (0.3, 0.5, 1.7):
        c = cos_KL_symmetric(1.0, _sym_atom(), SYM, L)
        assert c == pytest.approx(math.cos(2 * math.pi * L), abs=1e-15)


def test_pole_raises():
    with pytest.raises(PoleAtDressedState):
        cos_KL_symmetric(1.1, _sym_atom(), SYM, 0.5)


def test_lossy_or_detuned_rejected():
    with pytest.raises(InvalidRegime):
        cos_KL_symmetric(1.0, AtomParams(1.0, rabi=0.2, gamma2=0.1, gamma_r=0.1, gamma_l=0.1), SYM, 0.5)
    with pytest.raises(InvalidRegime):
        cos_KL_symmetric(1.0, AtomParams(1.0, omega3=1.01, rabi=0.2, gamma_r=0.1, gamma_l=0.1), SYM, 0.5)
    with pytest.raises(InvalidRegime):
        cos_KL_symmetric(1.0, AtomParams(1.0, rabi=0.2, gamma_r=0.1, gamma_l=0.05), SYM, 0.5)


def test_symmetric_matches_eigen_half_trace(rng):
    worst = 0.0
    for _ in range(1000):
        atom = _sym_atom(rng.uniform(0.0, 0.5), rng.uniform(0.01, 0.5))
        w = rng.uniform(0.5, 1.5)
        L = rng.uniform(0.05, 2.0)
        try:
            c = cos_KL_symmetric(w, atom, SYM, L)
        except PoleAtDressedState:
            continue
        eig = np.linalg.eigvals(cell_matrix(w, atom, SYM, L))
        worst = max(worst, abs(c - 0.5 * eig.sum().real) / max(1.0, abs(c)))
        assert abs(c - cos_KL_transfer(w, atom, SYM, L)) <= 1e-9 * max(1.0, abs(c))
    assert worst < 1e-9


def test_general_reduces_to_symmetric(rng):
    for _ in range(200):
        atom = _sym_atom(rng.uniform(0.05, 0.5), rng.uniform(0.01, 0.5))
        w = rng.uniform(0.5, 1.5)
        L = rng.uniform(0.05, 2.0)
        try:
            a = cos_KL_symmetric(w, atom, SYM, L)
        except PoleAtDressedState:
            continue
        assert cos_KL_general(w, atom, SYM, L) == pytest.approx(a, rel=1e-12, abs=1e-12)


@pytest.mark.parametrize("ratio", [1.0, 0.1])
def test_gaps_colocate_with_opaque_chains(ratio):
    atom = AtomParams(1.0, rabi=0.2, gamma_r=0.1, gamma_l=0.1 * ratio)
    grid = np.linspace(0.8, 1.2, 801)
    scan = scan_bands(grid, atom, SYM, 0.5, ratio == 1.0, relation="transfer")
    chain = ChainConfig.periodic(atom, 100, 0.5)
    assert scan.gaps
    for p in scan.points:
        T = chain_scatter(p.omega, chain, SYM).T
        if not p.allowed and math.acosh(abs(p.cos_KL)) * 100 > 20:
            assert T < 1e-3
        if p.allowed and abs(p.cos_KL) < 0.9:
            assert T > 1e-3


def test_symmetric_gaps_wider_than_small_backreflection():
    grid = np.linspace(0.8, 1.2, 2001)
    sym = scan_bands(grid, AtomParams(1.0, rabi=0.2, gamma_r=0.1, gamma_l=0.1), SYM, 0.5, True)
    sbr = scan_bands(grid, AtomParams(1.0, rabi=0.2, gamma_r=0.1, gamma_l=0.01), SYM, 0.5, False, "transfer")
    width = lambda s: sum(b - a for a, b in s.gaps)
    assert width(sym) > 2 * width(sbr) > 0


def test_two_level_gap_contains_resonance():
    atom = AtomParams(1.0, rabi=0.0, gamma_r=0.1, gamma_l=0.1)
    scan = scan_bands(np.linspace(0.5, 1.5, 1001), atom, SYM, 0.1, True)
    assert any(a < 1.0 < b for a, b in scan.gaps)
    assert scan.poles == [1.0]


def test_poles_listed_and_skipped():
    grid = np.linspace(0.8, 1.2, 401)  # hits omega2 +- rabi/2 exactly
    scan = scan_bands(grid, _sym_atom(), SYM, 0.5, True)
    assert scan.poles == pytest.approx([0.9, 1.1])
    assert len(scan.skipped) == 2
    assert len(scan) == 399


def test_invalid_grid():
    with pytest.raises(ValueError):
        scan_bands([1.0, 0.9], _sym_atom(), SYM, 0.5, True)
    with pytest.raises(ValueError):
        scan_bands([1.0], _sym_atom(), SYM, 0.5, True, relation="nope")


@given(st.floats(0.5, 1.5), st.floats(0.0, 0.5), st.floats(0.01, 0.5), st.floats(0.05, 2.0))
def test_bloch_wavenumber_invariants(w, rabi, gamma, L):
    try:
        c = cos_KL_symmetric(w, _sym_atom(rabi, gamma), SYM, L)
    except PoleAtDressedState:
        return
    p = dispersion_point(w, c, L)
    assert p.K_imag >= 0 and 0 <= p.K_real * L <= math.pi + 1e-12
    assert p.allowed == (p.K_imag == 0)
    if p.allowed:
        assert math.cos(p.K_real * L) == pytest.approx(c, abs=1e-9)

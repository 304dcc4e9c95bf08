import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gkfp.basis import HermiteBasis, PGrid, op_number
from gkfp.geometry import flat_metric, sin1d_metric
from gkfp.operators import (GkfpParams, QGrid, assemble_euclid_fiber, assemble_scaled, assemble_vertical, commutator,
                            fiber_spectrum, fourier_block, harmonic_oscillator_identity_defect, interior_mask,
                            positive_operator_identity_defect, quasimode, rotate_fiber, scalar_perturbation,
                            scaling_reduce, shifted, triangle_mask)


def test_params_validation_and_h_from_ell():
    assert GkfpParams.from_ell(2.0, 1).h == pytest.approx(1 / 8)
    with pytest.raises(ValueError):
        GkfpParams(0.0)
    with pytest.raises(ValueError):
        GkfpParams(1.0, kappa=-1)


@given(st.floats(0.5, 2), st.floats(0.5, 2))
@settings(max_examples=25, deadline=None)
def test_euclid_fiber_at_zero_xi_is_scaled_oscillator(b, h):
    # −½h²∂² + p²/(2b²) has spectrum (h/b)(n + ½)
    basis = HermiteBasis(1, 96)
    ev = np.sort(np.linalg.eigvals(assemble_euclid_fiber(GkfpParams(b, h=h), [0.0], basis).matrix).real)[:5]
    assert np.allclose(ev, h / b * (np.arange(5) + 0.5), rtol=1e-6)


def test_scaling_certificate_maps_eigenvalues():
    basis = HermiteBasis(1, 80)
    b, h, xi = 4.0, 0.25, 0.5
    cert = scaling_reduce(b, h)
    ev = np.sort_complex(np.linalg.eigvals(assemble_euclid_fiber(GkfpParams(b, h=h), [xi], basis).matrix))[:6]
    ref = np.sort_complex(np.linalg.eigvals(assemble_euclid_fiber(GkfpParams(1.0, h=1.0), [xi * cert.xi_factor],
                                                                  basis).matrix))[:6]
    assert np.allclose(ev, cert.factor * ref, atol=1e-8)
    assert scaling_reduce(1.0, 1.0).is_identity


def test_fiber_spectrum_shift_oracle():
    # 𝒪 + ipξ = shifted oscillator: eigenvalues n + ½ + ξ²/2 (converged at small ξ)
    ev = fiber_spectrum(0.5, HermiteBasis(1, 64))[:10]
    assert np.allclose(ev, np.arange(10) + 0.5 + 0.125, atol=1e-10)


def test_identity_defects_small():
    basis = HermiteBasis(2, 16)
    assert harmonic_oscillator_identity_defect(basis) < 1e-10
    assert positive_operator_identity_defect(basis, 1.5, -0.5) < 1e-10


def test_vertical_operator_from_metric():
    basis = HermiteBasis(1, 30)
    h = assemble_vertical(basis, sin1d_metric(0.3), np.array([0.4])).matrix
    m = interior_mask(basis)
    # ½(−g∂² + g⁻¹p²) is unitarily an oscillator: spectrum n + ½ independent of g
    ev = np.linalg.eigvalsh(h[np.ix_(m, m)])[:5]
    assert np.allclose(ev, np.arange(5) + 0.5, atol=1e-6)


def test_masks():
    basis = HermiteBasis(2, 6)
    assert triangle_mask(basis).sum() == 21
    assert interior_mask(HermiteBasis(1, 10)).sum() == 8


def test_shift_and_perturbation():
    basis = HermiteBasis(1, 8)
    op = shifted(op_number(basis), 2 - 1j)
    assert np.allclose(np.diag(op.matrix), np.arange(8) + 2.5 - 1j)
    assert np.allclose(scalar_perturbation(basis, 2.0).matrix, 2 * basis.word([("p", 0)]))


@given(st.lists(st.floats(-5, 5), min_size=2, max_size=3))
def test_rotation_is_orthogonal_and_aligns(xi):
    xi = np.array(xi)
    r = rotate_fiber(xi)
    assert np.allclose(r.T @ r, np.eye(len(xi)), atol=1e-12)
    assert np.allclose(r.T @ xi, np.r_[np.linalg.norm(xi), np.zeros(len(xi) - 1)], atol=1e-10)


def _scaled(metric, m=32, nf=12):
    return assemble_scaled(GkfpParams(1.5), 1, metric, QGrid(m), PGrid(4.0, nf))


def test_grid_operator_apply_matches_matrix():
    P = _scaled(sin1d_metric(0.3))
    u = np.random.default_rng(0).normal(size=P.dim) + 0j
    assert np.allclose(P.matrix() @ u, P.apply(u))


def test_transport_part_is_skew():
    # the Hermitian part of P_{b,ℓ} is the block-diagonal 𝒪_ℓ/b² alone
    from scipy.linalg import block_diag
    P = _scaled(sin1d_metric(0.3))
    mat = P.matrix()
    herm = 0.5 * (mat + mat.conj().T)
    c0_herm = block_diag(*[0.5 * (c + c.conj().T) for c in P.c0])
    assert np.abs(herm - c0_herm).max() < 1e-10
    assert np.linalg.eigvalsh(herm)[0] > 0


def test_flat_operator_is_translation_invariant():
    P = assemble_scaled(GkfpParams(1.0), 0, flat_metric(1), QGrid(16, 6.0), PGrid(3.0, 8))
    mat = P.matrix()
    blocks = [fourier_block(mat, P.qgrid, 8, k) for k in range(3)]
    m = 16
    for k, blk in enumerate(blocks):
        phase = np.exp(2j * np.pi * k * np.arange(m) / m) / np.sqrt(m)
        v = np.kron(phase[:, None], np.eye(8))
        assert np.allclose(mat @ v, v @ blk, atol=1e-10)


def test_leibniz_commutator_matches_matrix_commutator_on_resolved_states():
    fib = PGrid(3.0, 8)
    rng = np.random.default_rng(2)
    errs = []
    for m in (64, 256):
        qg = QGrid(m, 2 * np.pi)
        P = assemble_scaled(GkfpParams(1.0), 0, sin1d_metric(0.2), qg, fib)
        psi, dpsi = np.cos(qg.nodes), -np.sin(qg.nodes)
        u = rng.normal(size=(m, 8))
        u = np.fft.ifft(np.fft.fft(u, axis=0) * (np.abs(np.fft.fftfreq(m, 1 / m)) < 6)[:, None], axis=0).reshape(-1)
        exact = commutator(P.matrix(), np.kron(psi, np.ones(8))) @ u
        lei = P.commutator_q(dpsi).apply(u)
        errs.append(np.abs(exact - lei).max() / np.abs(lei).max())
    assert max(errs) < 1e-8


def test_commutator_shape_check():
    with pytest.raises(ValueError):
        commutator(np.eye(3), np.ones(4))


def test_quasimode_flat_is_annihilated_by_transport():
    phi = lambda x: np.where((x > 0.25) & (x < 4), np.exp(-1 / np.clip((x - 0.25) * (4 - x), 1e-300, None)), 0.0)
    r = quasimode(flat_metric(1), phi, 2.0)
    assert r["Y_norm"] < 1e-10 * r["O_norm"]
    assert np.isclose(r["u_norm"], 1.0)
    assert np.isclose(r["scaled_P_plus"], r["O_norm"])

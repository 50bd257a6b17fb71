//! Dissipative superoperator blocks, all built in an eigenbasis.
//!
//! Redfield blocks use Λ_ab = S_ab Γ(E_b − E_a) with Γ = γ/2 and
//! D[ρ] = Λρ S + S ρ Λ† − S Λ ρ − ρ Λ† S. Heat-engine channels are Lindblad terms.

use faer::Mat;
use num_complex::Complex64 as C64;

use crate::environment::{optical_rate, phonon_rate, OpticalBath, PhononBath};
use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::hamiltonian::{Eigenbasis, Target};
use crate::operators::{sigma_x, sigma_z, ZERO};
use crate::superop::SuperOp;

/// Transition frequencies below this magnitude (eV) are treated as exactly zero.
pub const FREQUENCY_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockLabel {
    Optical,
    Vibrational(usize),
    Trap,
    Extraction,
    Reinit,
}

#[derive(Debug, Clone)]
pub struct DissipatorBlock {
    pub label: BlockLabel,
    pub op: SuperOp,
}

/// Emission frequency E_b − E_a of the element |a⟩⟨b|, snapped to zero below the floor.
fn element_frequency(energies: &[f64], a: usize, b: usize) -> f64 {
    let w = energies[b] - energies[a];
    if w.abs() < FREQUENCY_FLOOR {
        0.0
    } else {
        w
    }
}

/// Redfield block for coupling operator `s` (eigenbasis) and rate function γ(ω); the rate
/// function receives exactly 0.0 for sub-floor frequencies.
pub fn redfield(s: &Mat<C64>, energies: &[f64], rate: impl Fn(f64) -> Result<f64>) -> Result<SuperOp> {
    let d = s.nrows();
    let mut lam = Mat::<C64>::zeros(d, d);
    for b in 0..d {
        for a in 0..d {
            if s[(a, b)] != ZERO {
                let g = 0.5 * rate(element_frequency(energies, a, b))?;
                lam[(a, b)] = s[(a, b)] * g;
            }
        }
    }
    let lam_dag = lam.adjoint().to_owned();
    let one = C64::new(1.0, 0.0);
    let mut op = SuperOp::zero(d);
    op.add_sandwich(&lam, s, one);
    op.add_sandwich(s, &lam_dag, one);
    op.add_left(&(s * &lam), -one);
    op.add_right(&(&lam_dag * s), -one);
    Ok(op)
}

fn nbits(basis: &Eigenbasis) -> usize {
    basis.dim().trailing_zeros() as usize
}

/// Non-secular optical Bloch-Redfield tensor for the collective coupling Σ_i d_i·σ_i^x.
/// `dipoles` are in reference units and address ring bits 0..N of `basis`.
pub fn optical_tensor(basis: &Eigenbasis, dipoles: &[Vec3], bath: &OpticalBath) -> Result<DissipatorBlock> {
    let bits = nbits(basis);
    let d = basis.dim();
    let sx: Vec<Mat<C64>> = (0..dipoles.len()).map(|i| sigma_x(i, bits)).collect();
    let mut op = SuperOp::zero(d);
    for x in 0..3 {
        let mut s_site = Mat::<C64>::zeros(d, d);
        for (i, dip) in dipoles.iter().enumerate() {
            if dip[x] != 0.0 {
                s_site += Mat::from_fn(d, d, |r, c| sx[i][(r, c)] * dip[x]);
            }
        }
        let s = basis.to_eigen(&s_site);
        let block = redfield(&s, &basis.energies, |w| if w == 0.0 { Ok(0.0) } else { optical_rate(w, bath) })?;
        op.extend(&block, 1.0);
    }
    Ok(DissipatorBlock { label: BlockLabel::Optical, op })
}

/// One Redfield block per site for independent phonon baths coupled through σ_i^z.
pub fn vibrational_tensor(basis: &Eigenbasis, n_sites: usize, bath: &PhononBath) -> Result<Vec<DissipatorBlock>> {
    bath.validate()?;
    let bits = nbits(basis);
    (0..n_sites)
        .map(|i| {
            let s = basis.to_eigen(&sigma_z(i, bits));
            let op = redfield(&s, &basis.energies, |w| {
                if w == 0.0 {
                    Ok(bath.zero_frequency_rate())
                } else {
                    phonon_rate(w, bath)
                }
            })?;
            Ok(DissipatorBlock { label: BlockLabel::Vibrational(i), op })
        })
        .collect()
}

/// γ·D_L[M_σ] where M_σ keeps the elements |a⟩⟨b| of `m` with σ(E_b − E_a) ≥ 0:
/// σ = +1 keeps decay, σ = −1 keeps excitation.
pub fn directional_dissipator(m: &Mat<C64>, gamma: f64, sigma: i8, energies: &[f64], label: BlockLabel) -> Result<DissipatorBlock> {
    let d = m.nrows();
    let mut op = SuperOp::zero(d);
    if gamma == 0.0 {
        return Ok(DissipatorBlock { label, op });
    }
    let s = f64::from(sigma.signum());
    let filtered = Mat::from_fn(d, d, |a, b| {
        if s * element_frequency(energies, a, b) >= 0.0 {
            m[(a, b)]
        } else {
            ZERO
        }
    });
    if (0..d).all(|b| (0..d).all(|a| filtered[(a, b)].norm() < 1e-14)) {
        return Err(Error::ZeroTransition);
    }
    op.add_lindblad(&filtered, gamma);
    Ok(DissipatorBlock { label, op })
}

/// Trap decay σ_t^x with σ = +1; the trap is the highest bit of `basis`.
pub fn trap_decay(basis: &Eigenbasis, gamma_t: f64) -> Result<DissipatorBlock> {
    let bits = nbits(basis);
    let m = basis.to_eigen(&sigma_x(bits - 1, bits));
    directional_dissipator(&m, gamma_t, 1, &basis.energies, BlockLabel::Trap)
}

fn ket_bra(dim: usize, a: usize, b: usize) -> Mat<C64> {
    let mut m = Mat::zeros(dim, dim);
    m[(a, b)] = C64::new(1.0, 0.0);
    m
}

/// Incoherent extraction |BTTS⟩⟨TTTS| ⊗ σ_t⁺ in the ring ⊗ trap product eigenbasis
/// (state `a + D·t`, D = ring dimension).
pub fn extraction_incoherent(ring_dim: usize, target: &Target, gamma_x: f64) -> DissipatorBlock {
    let d = 2 * ring_dim;
    let mut op = SuperOp::zero(d);
    op.add_lindblad(&ket_bra(d, target.btts + ring_dim, target.ttts), gamma_x);
    DissipatorBlock { label: BlockLabel::Extraction, op }
}

/// Ladder pump operators |BTTS⟩⟨ladder_n| (⊗ 1 on the trap) for every rung below the BTTS.
pub fn ladder_pump_operators(ring_dim: usize, ladder: &[usize], target: &Target, with_trap: bool) -> Vec<Mat<C64>> {
    let copies = if with_trap { 2 } else { 1 };
    let d = copies * ring_dim;
    (0..target.rung)
        .map(|n| {
            let mut l = Mat::<C64>::zeros(d, d);
            for t in 0..copies {
                l[(target.btts + t * ring_dim, ladder[n] + t * ring_dim)] = C64::new(1.0, 0.0);
            }
            l
        })
        .collect()
}

/// Incoherent ladder reinitialisation: one Lindblad pump per rung below the BTTS.
pub fn reinit_ladder(ring_dim: usize, ladder: &[usize], target: &Target, gamma_r: f64, with_trap: bool) -> DissipatorBlock {
    let ops = ladder_pump_operators(ring_dim, ladder, target, with_trap);
    let mut op = SuperOp::zero(if with_trap { 2 * ring_dim } else { ring_dim });
    for l in &ops {
        op.add_lindblad(l, gamma_r);
    }
    DissipatorBlock { label: BlockLabel::Reinit, op }
}

/// Site-based reinitialisation: σ_i^x on every ring site through the excitation-only
/// directional dissipator.
pub fn reinit_site(basis: &Eigenbasis, n_sites: usize, gamma_r: f64) -> Result<DissipatorBlock> {
    let bits = nbits(basis);
    let mut op = SuperOp::zero(basis.dim());
    for i in 0..n_sites {
        let m = basis.to_eigen(&sigma_x(i, bits));
        op.extend(&directional_dissipator(&m, gamma_r, -1, &basis.energies, BlockLabel::Reinit)?.op, 1.0);
    }
    Ok(DissipatorBlock { label: BlockLabel::Reinit, op })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{kappa_vib_for, PhononModel};
    use crate::geometry::{coupling, normalized_dipoles, CouplingMatrix, RingSpec, SiteParams};
    use crate::hamiltonian::{build_hamiltonian, diagonalize, identify_ladder, target_transition, Convention};
    use crate::operators::{max_abs, sigma_minus, sigma_plus};
    use crate::superop::vec_index;
    use std::f64::consts::FRAC_PI_4;

    fn basis(n: usize, tz: f64) -> (RingSpec, Eigenbasis) {
        let s = RingSpec::regular(n, &SiteParams { theta_zen: tz, ..SiteParams::default() }).unwrap();
        let j = coupling(&s).unwrap();
        let mut b = diagonalize(&build_hamiltonian(&s, &j, None).unwrap()).unwrap();
        identify_ladder(&mut b, Convention::detect(&j));
        (s, b)
    }

    fn bath(t: f64) -> OpticalBath {
        OpticalBath::calibrated(t, 1.8, 2.5e-9)
    }

    #[test]
    fn single_two_level_reduces_to_lindblad_pair() {
        let (s, b) = basis(1, FRAC_PI_4);
        let dip = normalized_dipoles(&s).unwrap();
        let ob = bath(5800.0);
        let blk = optical_tensor(&b, &dip, &ob).unwrap().op.to_sparse_full();
        let down = optical_rate(1.8, &ob).unwrap();
        let up = optical_rate(-1.8, &ob).unwrap();
        let mut lind = SuperOp::zero(2);
        lind.add_lindblad(&sigma_minus(0, 1), down);
        lind.add_lindblad(&sigma_plus(0, 1), up);
        let want = lind.to_sparse_full();
        // populations and the coherence decay rate agree; the non-secular terms only couple
        // ρ_eg to ρ_ge
        for (r, c) in [(0, 0), (0, 3), (3, 0), (3, 3), (1, 1), (2, 2)] {
            assert!((blk.get(r, c) - want.get(r, c)).norm() < 1e-12 * down, "{r},{c}");
        }
    }

    #[test]
    fn orthogonal_dipoles_have_no_cross_terms() {
        let s = RingSpec::regular(2, &SiteParams::default()).unwrap();
        let b = diagonalize(&build_hamiltonian(&s, &CouplingMatrix::zeros(2), None).unwrap()).unwrap();
        let ob = bath(0.0);
        let full = optical_tensor(&b, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], &ob).unwrap().op.to_sparse_full();
        let mut sum = optical_tensor(&b, &[[1.0, 0.0, 0.0], [0.0, 0.0, 0.0]], &ob).unwrap().op;
        sum.extend(&optical_tensor(&b, &[[0.0, 0.0, 0.0], [0.0, 1.0, 0.0]], &ob).unwrap().op, 1.0);
        let diff = full.add_scaled(&sum.to_sparse_full(), -1.0);
        assert!(diff.max_abs() < 1e-20);
    }

    #[test]
    fn blocks_are_trace_annihilating() {
        let (s, b) = basis(3, FRAC_PI_4);
        let dip = normalized_dipoles(&s).unwrap();
        let t = target_transition(&b).unwrap();
        let pb = PhononBath { model: PhononModel::Ohmic { kappa: kappa_vib_for(&b, 2.5e-9, 1e3).unwrap() }, temperature: 300.0 };
        let mut blocks = vec![optical_tensor(&b, &dip, &bath(5800.0)).unwrap()];
        blocks.extend(vibrational_tensor(&b, 3, &pb).unwrap());
        blocks.push(reinit_site(&b, 3, 0.01).unwrap());
        blocks.push(reinit_ladder(8, &b.ladder_indices(), &t, 0.01, false));
        let with_trap = b.with_trap(t.omega_good);
        blocks.push(trap_decay(&with_trap, 1e-3).unwrap());
        blocks.push(extraction_incoherent(8, &t, 0.01));
        for blk in blocks {
            let sp = blk.op.to_sparse_full();
            let d = blk.op.dim();
            let scale = sp.max_abs().max(1e-300);
            assert!(sp.trace_leak(d) <= 1e-10 * scale, "{:?}", blk.label);
        }
    }

    #[test]
    fn uncoupled_ring_has_pure_dephasing_only() {
        let s = RingSpec::regular(3, &SiteParams::default()).unwrap();
        let b = diagonalize(&build_hamiltonian(&s, &CouplingMatrix::zeros(3), None).unwrap()).unwrap();
        let pb = PhononBath { model: PhononModel::Ohmic { kappa: 1.0 }, temperature: 300.0 };
        for blk in vibrational_tensor(&b, 3, &pb).unwrap() {
            let sp = blk.op.to_sparse_full();
            for a in 0..8 {
                for c in 0..8 {
                    assert!(sp.get(vec_index(a, a, 8), vec_index(c, c, 8)).norm() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn vibrational_block_conserves_manifold_populations() {
        let (_, b) = basis(4, FRAC_PI_4);
        let pb = PhononBath { model: PhononModel::Ohmic { kappa: kappa_vib_for(&b, 2.5e-9, 1e3).unwrap() }, temperature: 300.0 };
        let d = b.dim();
        let rho = Mat::from_fn(d, d, |a, c| {
            let v = 1.0 / (1.0 + a as f64 + 2.0 * c as f64);
            C64::new(v + if a == c { 1.0 } else { 0.0 }, if a < c { 0.1 * v } else { -0.1 * v })
        });
        let hermitian = Mat::from_fn(d, d, |a, c| 0.5 * (rho[(a, c)] + rho[(c, a)].conj()));
        for blk in vibrational_tensor(&b, 4, &pb).unwrap() {
            let drho = blk.op.apply(&hermitian);
            for m in 0..=4 {
                let flow: f64 = b.states_in(m).iter().map(|&a| drho[(a, a)].re).sum();
                assert!(flow.abs() < 1e-12 * max_abs(&drho).max(1e-300), "m={m} {flow}");
            }
        }
    }

    #[test]
    fn vibrational_detailed_balance_in_dimer_manifold() {
        let s = RingSpec::regular(2, &SiteParams::default()).unwrap();
        let mut j = CouplingMatrix::zeros(2);
        j.set(0, 1, 0.02);
        let b = diagonalize(&build_hamiltonian(&s, &j, None).unwrap()).unwrap();
        let pb = PhononBath { model: PhononModel::Ohmic { kappa: 1e-3 }, temperature: 300.0 };
        let one = b.states_in(1);
        let (lo, hi) = (one[0], one[1]);
        let boltz = (-(b.energies[hi] - b.energies[lo]) / (crate::constants::K_B * 300.0)).exp();
        let mut rho = Mat::<C64>::zeros(4, 4);
        rho[(lo, lo)] = C64::new(1.0 / (1.0 + boltz), 0.0);
        rho[(hi, hi)] = C64::new(boltz / (1.0 + boltz), 0.0);
        let mut total = Mat::<C64>::zeros(4, 4);
        for blk in vibrational_tensor(&b, 2, &pb).unwrap() {
            total += blk.op.apply(&rho);
        }
        assert!(total[(lo, lo)].norm() < 1e-15 && total[(hi, hi)].norm() < 1e-15);
    }

    #[test]
    fn directional_mirror_and_zero_rate() {
        let energies = [-0.5, 0.5];
        let m = sigma_x(0, 1);
        let decay = directional_dissipator(&m, 0.2, 1, &energies, BlockLabel::Trap).unwrap().op.to_sparse_full();
        let mut plain = SuperOp::zero(2);
        plain.add_lindblad(&sigma_minus(0, 1), 0.2);
        assert!(decay.add_scaled(&plain.to_sparse_full(), -1.0).max_abs() < 1e-16);
        let pump = directional_dissipator(&m, 0.2, -1, &energies, BlockLabel::Trap).unwrap().op.to_sparse_full();
        let mut plain = SuperOp::zero(2);
        plain.add_lindblad(&sigma_plus(0, 1), 0.2);
        assert!(pump.add_scaled(&plain.to_sparse_full(), -1.0).max_abs() < 1e-16);
        let zero = directional_dissipator(&m, 0.0, 1, &energies, BlockLabel::Trap).unwrap();
        assert_eq!(zero.op.to_sparse_full().nnz(), 0);
        let empty = Mat::<C64>::zeros(2, 2);
        assert!(matches!(directional_dissipator(&empty, 1.0, 1, &energies, BlockLabel::Trap), Err(Error::ZeroTransition)));
    }

    #[test]
    fn extraction_moves_ttts_beta_to_btts_alpha() {
        let (_, b) = basis(4, FRAC_PI_4);
        let t = target_transition(&b).unwrap();
        let d = 32;
        let blk = extraction_incoherent(16, &t, 0.01);
        let mut rho = Mat::<C64>::zeros(d, d);
        rho[(t.ttts, t.ttts)] = C64::new(1.0, 0.0);
        let drho = blk.op.apply(&rho);
        assert!((drho[(t.btts + 16, t.btts + 16)].re - 0.01).abs() < 1e-15);
        assert!((drho[(t.ttts, t.ttts)].re + 0.01).abs() < 1e-15);
        let mut empty = Mat::<C64>::zeros(d, d);
        empty[(0, 0)] = C64::new(1.0, 0.0);
        assert!(max_abs(&blk.op.apply(&empty)) == 0.0);
        // linear in γ_x
        let doubled = extraction_incoherent(16, &t, 0.02).op.to_sparse_full();
        assert!((doubled.frobenius_norm() / blk.op.to_sparse_full().frobenius_norm() - 2.0).abs() < 1e-14);
    }

    #[test]
    fn ladder_pump_counts() {
        for (n, pumps) in [(2usize, 0usize), (4, 1), (5, 2)] {
            let (_, b) = basis(n, FRAC_PI_4);
            let t = target_transition(&b).unwrap();
            assert_eq!(ladder_pump_operators(1 << n, &b.ladder_indices(), &t, false).len(), pumps);
        }
        let (_, b) = basis(5, FRAC_PI_4);
        let t = target_transition(&b).unwrap();
        let zero = reinit_ladder(32, &b.ladder_indices(), &t, 0.0, true);
        assert_eq!(zero.op.to_sparse_full().nnz(), 0);
    }

    #[test]
    fn site_pump_single_site_is_plain_pump() {
        let (_, b) = basis(1, FRAC_PI_4);
        let blk = reinit_site(&b, 1, 0.05).unwrap().op.to_sparse_full();
        let mut plain = SuperOp::zero(2);
        plain.add_lindblad(&sigma_plus(0, 1), 0.05);
        assert!(blk.add_scaled(&plain.to_sparse_full(), -1.0).max_abs() < 1e-16);
    }

    #[test]
    fn secular_limit_matches_lindblad_form() {
        // Non-degenerate single excitations: keeping only frequency-matched elements of the
        // Redfield tensor reproduces Σ_ω γ(ω) D_L[A_ω].
        let (s, b) = basis(3, 0.3);
        let dip = normalized_dipoles(&s).unwrap();
        let ob = bath(5800.0);
        let d = b.dim();
        let red = optical_tensor(&b, &dip, &ob).unwrap().op.to_sparse_full();
        let bits = 3;
        let mut lind = SuperOp::zero(d);
        for x in 0..3 {
            let mut site = Mat::<C64>::zeros(d, d);
            for (i, dv) in dip.iter().enumerate() {
                site += Mat::from_fn(d, d, |r, c| sigma_x(i, bits)[(r, c)] * dv[x]);
            }
            let sop = b.to_eigen(&site);
            for a in 0..d {
                for c in 0..d {
                    let w = b.energies[c] - b.energies[a];
                    if sop[(a, c)].norm() > 1e-14 && w.abs() > 1e-9 {
                        // group all elements sharing this frequency
                        let mut op = Mat::<C64>::zeros(d, d);
                        for a2 in 0..d {
                            for c2 in 0..d {
                                if ((b.energies[c2] - b.energies[a2]) - w).abs() < 1e-9 {
                                    op[(a2, c2)] = sop[(a2, c2)];
                                }
                            }
                        }
                        // each frequency group is visited once per member element
                        let members = (0..d * d)
                            .filter(|k| ((b.energies[k / d] - b.energies[k % d]) - w).abs() < 1e-9 && sop[(k % d, k / d)].norm() > 1e-14)
                            .count();
                        lind.add_lindblad(&op, optical_rate(w, &ob).unwrap() / members as f64);
                    }
                }
            }
        }
        let lind = lind.to_sparse_full();
        let freq = |k: usize| b.energies[k % d] - b.energies[k / d];
        let mut worst = 0.0f64;
        for r in 0..d * d {
            for c in 0..d * d {
                if (freq(r) - freq(c)).abs() < 1e-9 {
                    worst = worst.max((red.get(r, c) - lind.get(r, c)).norm());
                }
            }
        }
        assert!(worst < 1e-12 * red.max_abs(), "{worst:e}");
    }
}

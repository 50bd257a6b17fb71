//! Ring (and ring + trap) Hamiltonian, excitation-manifold diagonalization, ladder
//! states and optical transition tables.

use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CouplingMatrix, RingSpec, TrapMode, Vec3};
use crate::operators::{hermiticity_deviation, max_abs, popcount, ZERO};

/// Largest Hilbert-space dimension accepted by default.
pub const DEFAULT_DIM_CAP: usize = 1 << 11;
const LADDER_TIE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    GuideSlide,
    Parallel,
}

impl Convention {
    /// Positive nearest-neighbour coupling pushes ladder states to the top of each manifold.
    pub fn detect(j: &CouplingMatrix) -> Self {
        if j.nearest_neighbour() > 0.0 {
            Convention::Parallel
        } else {
            Convention::GuideSlide
        }
    }
}

/// Ring Hamiltonian on N sites, optionally extended by a trap two-level system on bit N
/// with splitting `trap_omega`.
pub fn build_hamiltonian(spec: &RingSpec, j: &CouplingMatrix, trap_omega: Option<f64>) -> Result<Mat<C64>> {
    build_hamiltonian_capped(spec, j, trap_omega, DEFAULT_DIM_CAP)
}

pub fn build_hamiltonian_capped(
    spec: &RingSpec,
    j: &CouplingMatrix,
    trap_omega: Option<f64>,
    cap: usize,
) -> Result<Mat<C64>> {
    let n = spec.n_sites;
    if j.n_sites() != n {
        return Err(Error::DimensionMismatch { expected: n, got: j.n_sites() });
    }
    let nbits = n + trap_omega.is_some() as usize;
    let dim = 1usize.checked_shl(nbits as u32).unwrap_or(usize::MAX);
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    let c_x = match (&spec.trap, trap_omega) {
        (Some(t), Some(_)) if t.mode == TrapMode::Coherent => t.c_x,
        _ => 0.0,
    };
    let mut h = Mat::<C64>::zeros(dim, dim);
    for s in 0..dim {
        let mut diag = 0.0;
        for i in 0..n {
            let sign = if s & (1 << i) != 0 { 1.0 } else { -1.0 };
            diag += 0.5 * spec.omega_a[i] * sign;
        }
        if let Some(wt) = trap_omega {
            let sign = if s & (1 << n) != 0 { 1.0 } else { -1.0 };
            diag += 0.5 * wt * sign;
        }
        h[(s, s)] = C64::new(diag, 0.0);
        // flip-flop terms: move an excitation from site k to site i
        for i in 0..n {
            for k in 0..n {
                if i == k || s & (1 << k) == 0 || s & (1 << i) != 0 {
                    continue;
                }
                let t = s ^ (1 << k) ^ (1 << i);
                h[(t, s)] += C64::new(j.get(i, k), 0.0);
            }
            if c_x != 0.0 {
                let trap = 1 << n;
                if s & trap != 0 && s & (1 << i) == 0 {
                    let t = s ^ trap ^ (1 << i);
                    h[(t, s)] += C64::new(c_x, 0.0);
                    h[(s, t)] += C64::new(c_x, 0.0);
                }
            }
        }
    }
    Ok(h)
}

/// Basis indices and eigenstate indices sharing one total excitation number.
#[derive(Debug, Clone, PartialEq)]
pub struct ManifoldBlock {
    pub excitation: usize,
    pub basis: Vec<usize>,
    pub states: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Eigenbasis {
    pub energies: Vec<f64>,
    pub manifold: Vec<usize>,
    pub ladder_flag: Vec<bool>,
    /// Columns are eigenstates expressed in the site basis.
    pub transform: Mat<C64>,
    pub blocks: Vec<ManifoldBlock>,
}

/// Diagonalizes an excitation-conserving Hermitian matrix block by block. Eigenstates are
/// ordered by manifold, then by ascending energy within the manifold.
pub fn diagonalize(h: &Mat<C64>) -> Result<Eigenbasis> {
    let dim = h.nrows();
    if h.ncols() != dim || !dim.is_power_of_two() {
        return Err(Error::DimensionMismatch { expected: dim.next_power_of_two(), got: h.ncols() });
    }
    let scale = max_abs(h).max(1.0);
    let dev = hermiticity_deviation(h);
    if dev > 1e-12 * scale {
        return Err(Error::NotHermitian(dev));
    }
    let nbits = dim.trailing_zeros() as usize;
    let mut leak = 0.0f64;
    for b in 0..dim {
        for a in 0..dim {
            if popcount(a) != popcount(b) {
                leak = leak.max(h[(a, b)].norm());
            }
        }
    }
    if leak > 1e-10 * scale {
        return Err(Error::Eigen(format!("matrix mixes excitation manifolds (|h| = {leak:e})")));
    }
    let mut energies = Vec::with_capacity(dim);
    let mut manifold = Vec::with_capacity(dim);
    let mut transform = Mat::<C64>::zeros(dim, dim);
    let mut blocks = Vec::with_capacity(nbits + 1);
    for m in 0..=nbits {
        let basis: Vec<usize> = (0..dim).filter(|&s| popcount(s) == m).collect();
        let nb = basis.len();
        let sub = Mat::<C64>::from_fn(nb, nb, |i, k| h[(basis[i], basis[k])]);
        let eig = sub.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let s = eig.S();
        let u = eig.U();
        let mut order: Vec<usize> = (0..nb).collect();
        order.sort_by(|&a, &b| s[a].re.total_cmp(&s[b].re).then(a.cmp(&b)));
        let start = energies.len();
        for (col, &src) in order.iter().enumerate() {
            energies.push(s[src].re);
            manifold.push(m);
            for (row, &site_idx) in basis.iter().enumerate() {
                transform[(site_idx, start + col)] = u[(row, src)];
            }
        }
        blocks.push(ManifoldBlock { excitation: m, basis, states: (start..start + nb).collect() });
    }
    Ok(Eigenbasis { ladder_flag: vec![false; dim], energies, manifold, transform, blocks })
}

impl Eigenbasis {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn n_manifolds(&self) -> usize {
        self.blocks.len()
    }

    pub fn states_in(&self, m: usize) -> &[usize] {
        &self.blocks[m].states
    }

    pub fn ladder(&self, m: usize) -> Option<usize> {
        self.blocks.get(m)?.states.iter().copied().find(|&a| self.ladder_flag[a])
    }

    pub fn ladder_indices(&self) -> Vec<usize> {
        (0..self.n_manifolds()).filter_map(|m| self.ladder(m)).collect()
    }

    /// Expresses a site-basis operator in the eigenbasis.
    pub fn to_eigen(&self, op: &Mat<C64>) -> Mat<C64> {
        self.transform.adjoint() * op * &self.transform
    }

    /// Tensor product with an uncoupled trap on the highest bit. Eigenstate `a + D·t` is
    /// ring eigenstate `a` with the trap in level `t`, at energy E_a + (t − ½)ω_t.
    pub fn with_trap(&self, omega_t: f64) -> Eigenbasis {
        let d = self.dim();
        let dim = 2 * d;
        let mut energies = Vec::with_capacity(dim);
        let mut manifold = Vec::with_capacity(dim);
        for t in 0..2 {
            let shift = (t as f64 - 0.5) * omega_t;
            energies.extend(self.energies.iter().map(|e| e + shift));
            manifold.extend(self.manifold.iter().map(|m| m + t));
        }
        let transform = Mat::from_fn(dim, dim, |r, c| {
            if r / d == c / d {
                self.transform[(r % d, c % d)]
            } else {
                ZERO
            }
        });
        let blocks = (0..=self.n_manifolds())
            .map(|m| {
                let basis = (0..dim).filter(|&s| popcount(s) == m).collect();
                let states = (0..dim).filter(|&a| manifold[a] == m).collect();
                ManifoldBlock { excitation: m, basis, states }
            })
            .collect();
        Eigenbasis { energies, manifold, ladder_flag: vec![false; dim], transform, blocks }
    }
}

/// Flags one ladder state per manifold: the lowest energy for guide-slide rings, the
/// highest for parallel rings. Ties within 1e-12 eV resolve to the first index.
pub fn identify_ladder(basis: &mut Eigenbasis, convention: Convention) -> Vec<usize> {
    basis.ladder_flag.iter_mut().for_each(|f| *f = false);
    let mut picks = Vec::with_capacity(basis.n_manifolds());
    for block in &basis.blocks {
        let mut best = block.states[0];
        for &a in &block.states[1..] {
            let better = match convention {
                Convention::GuideSlide => basis.energies[a] < basis.energies[best] - LADDER_TIE_TOL,
                Convention::Parallel => basis.energies[a] > basis.energies[best] + LADDER_TIE_TOL,
            };
            if better {
                best = a;
            }
        }
        picks.push(best);
    }
    for &p in &picks {
        basis.ladder_flag[p] = true;
    }
    picks
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Target {
    /// Manifold index of the bottom target-transition state.
    pub rung: usize,
    pub btts: usize,
    pub ttts: usize,
    pub omega_good: f64,
    pub omega_bad: Option<f64>,
}

/// Target transition between ladder rungs ⌊(N−1)/2⌋ and ⌊(N−1)/2⌋ + 1.
pub fn target_transition(basis: &Eigenbasis) -> Result<Target> {
    let n_sites = basis.n_manifolds().saturating_sub(1);
    if n_sites == 0 {
        return Err(Error::InvalidParameter("target transition needs at least one site".into()));
    }
    let rung = (n_sites - 1) / 2;
    let missing = || Error::InvalidParameter("ladder states not identified".into());
    let btts = basis.ladder(rung).ok_or_else(missing)?;
    let ttts = basis.ladder(rung + 1).ok_or_else(missing)?;
    let omega_good = basis.energies[ttts] - basis.energies[btts];
    let omega_bad = if rung == 0 {
        None
    } else {
        let below = basis.ladder(rung - 1).ok_or_else(missing)?;
        Some(basis.energies[btts] - basis.energies[below])
    };
    Ok(Target { rung, btts, ttts, omega_good, omega_bad })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub upper: usize,
    pub lower: usize,
    /// Emission frequency E_upper − E_lower (eV).
    pub omega: f64,
    /// Σ_i d̃_i ⟨lower|σ_i^x|upper⟩ in units of the reference dipole.
    pub dvec: [C64; 3],
    /// |dvec|²: oscillator strength in units of a single reference dipole.
    pub strength: f64,
    /// |dvec|²(ω/ω_ref)³: zero-temperature emission rate in units of ħ/τ_ref.
    pub rate_weight: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TransitionTable {
    pub entries: Vec<Transition>,
}

impl TransitionTable {
    pub fn upward_from(&self, lower: usize) -> impl Iterator<Item = &Transition> {
        self.entries.iter().filter(move |t| t.lower == lower)
    }

    pub fn strongest(&self) -> Option<&Transition> {
        self.entries.iter().fold(None, |best: Option<&Transition>, t| match best {
            Some(b) if b.strength >= t.strength => Some(b),
            _ => Some(t),
        })
    }

    pub fn find(&self, lower: usize, upper: usize) -> Option<&Transition> {
        self.entries.iter().find(|t| t.lower == lower && t.upper == upper)
    }
}

/// Site-to-site lowering operator Σ_i c_i σ_i⁻ restricted to (manifold m+1 → manifold m),
/// rows indexed by `lower.basis`, columns by `upper.basis`.
fn lowering_block(lower: &ManifoldBlock, upper: &ManifoldBlock, coeff: &[f64]) -> Mat<C64> {
    let mut pos = std::collections::HashMap::with_capacity(lower.basis.len());
    for (r, &s) in lower.basis.iter().enumerate() {
        pos.insert(s, r);
    }
    let mut m = Mat::<C64>::zeros(lower.basis.len(), upper.basis.len());
    for (c, &s) in upper.basis.iter().enumerate() {
        for (i, &ci) in coeff.iter().enumerate() {
            if ci != 0.0 && s & (1 << i) != 0 {
                m[(pos[&(s ^ (1 << i))], c)] += C64::new(ci, 0.0);
            }
        }
    }
    m
}

fn block_columns(basis: &Eigenbasis, block: &ManifoldBlock) -> Mat<C64> {
    Mat::from_fn(block.basis.len(), block.states.len(), |r, c| basis.transform[(block.basis[r], block.states[c])])
}

/// Optical transitions between adjacent manifolds of a ring eigenbasis. `dipoles` are the
/// per-site dipoles in reference units; `omega_ref` converts frequencies to rate weights.
pub fn transition_table(basis: &Eigenbasis, dipoles: &[Vec3], omega_ref: f64) -> TransitionTable {
    let mut entries = Vec::new();
    for m in 0..basis.n_manifolds().saturating_sub(1) {
        let (lo, up) = (&basis.blocks[m], &basis.blocks[m + 1]);
        let (ul, uu) = (block_columns(basis, lo), block_columns(basis, up));
        let comps: Vec<Mat<C64>> = (0..3)
            .map(|x| {
                let coeff: Vec<f64> = dipoles.iter().map(|d| d[x]).collect();
                ul.adjoint() * lowering_block(lo, up, &coeff) * &uu
            })
            .collect();
        for (c, &upper) in up.states.iter().enumerate() {
            for (r, &lower) in lo.states.iter().enumerate() {
                let dvec = [comps[0][(r, c)], comps[1][(r, c)], comps[2][(r, c)]];
                let strength: f64 = dvec.iter().map(|z| z.norm_sqr()).sum();
                let omega = basis.energies[upper] - basis.energies[lower];
                entries.push(Transition {
                    upper,
                    lower,
                    omega,
                    dvec,
                    strength,
                    rate_weight: strength * (omega / omega_ref).powi(3),
                });
            }
        }
    }
    let max = entries.iter().map(|t| t.strength).fold(0.0f64, f64::max);
    let floor = (1e-14 * max.sqrt()).powi(2);
    entries.retain(|t| t.strength > floor);
    TransitionTable { entries }
}

/// Summed oscillator strength from the BTTS to every state of the manifold above.
pub fn target_strength(basis: &Eigenbasis, table: &TransitionTable, target: &Target) -> f64 {
    table
        .upward_from(target.btts)
        .filter(|t| basis.manifold[t.upper] == target.rung + 1)
        .map(|t| t.strength)
        .sum()
}

/// Upward strength Σ_β |⟨β|Σ_i d_i σ_i⁺|ψ⟩|² from a site-basis state ψ lying in manifold m
/// to all eigenstates β of manifold m + 1.
pub fn upward_strength_from_state(basis: &Eigenbasis, dipoles: &[Vec3], psi: &[C64], m: usize) -> f64 {
    let (lo, up) = (&basis.blocks[m], &basis.blocks[m + 1]);
    let uu = block_columns(basis, up);
    let psi_block = Mat::from_fn(lo.basis.len(), 1, |r, _| psi[lo.basis[r]]);
    (0..3)
        .map(|x| {
            let coeff: Vec<f64> = dipoles.iter().map(|d| d[x]).collect();
            let raise = lowering_block(lo, up, &coeff).adjoint().to_owned();
            let amp = uu.adjoint() * (&raise * &psi_block);
            (0..amp.nrows()).map(|i| amp[(i, 0)].norm_sqr()).sum::<f64>()
        })
        .sum()
}

/// Normalized symmetric (Dicke) state with `m` excitations on `n` sites, in the site basis.
pub fn dicke_state(n: usize, m: usize) -> Vec<C64> {
    let dim = 1usize << n;
    let count = (0..dim).filter(|&s| popcount(s) == m).count() as f64;
    let amp = C64::new(1.0 / count.sqrt(), 0.0);
    (0..dim).map(|s| if popcount(s) == m { amp } else { ZERO }).collect()
}

/// Closed-form Dicke upward strength (m+1)(N−m) in single-dipole units.
pub fn dicke_strength(n: usize, m: usize) -> f64 {
    ((m + 1) * (n - m)) as f64
}

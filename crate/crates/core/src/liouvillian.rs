//! Liouvillian assembly and steady-state solution.
//!
//! Vectorization is column stacking, `vec(ρ)[a + d·b] = ρ_ab`.

use faer::prelude::*;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use num_complex::Complex64 as C64;
use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;
use petgraph::unionfind::UnionFind;
use serde::{Deserialize, Serialize};

use crate::dissipators::{BlockLabel, DissipatorBlock};
use crate::error::{Error, Result};
use crate::operators::{hermiticity_deviation, trace, ONE, ZERO};
use crate::superop::{unvectorize, vec_index, SparseMatrix, SuperOp};

pub const TRACE_TOL: f64 = 1e-10;
pub const HERMITICITY_TOL: f64 = 1e-10;
pub const NEGATIVITY_TOL: f64 = 1e-8;
pub const RESIDUAL_TOL: f64 = 1e-8;

/// Entries below this fraction of max |L| are ignored when building the coupling graphs.
const GRAPH_CUTOFF: f64 = 1e-14;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// |Tr ρ − 1| before Hermitization.
    pub trace_dev: f64,
    /// max |ρ − ρ†| before Hermitization.
    pub herm_dev: f64,
    /// Smallest eigenvalue of the Hermitized state.
    pub min_eig: f64,
    /// ‖L vec ρ‖ / ‖L‖_F.
    pub residual: f64,
    pub kernel_dim: usize,
}

impl Diagnostics {
    pub fn passes(&self) -> bool {
        self.trace_dev <= TRACE_TOL && self.herm_dev <= HERMITICITY_TOL && self.min_eig >= -NEGATIVITY_TOL
    }

    /// Componentwise worst case, used to summarise many solves.
    pub fn worst(self, other: Diagnostics) -> Diagnostics {
        Diagnostics {
            trace_dev: self.trace_dev.max(other.trace_dev),
            herm_dev: self.herm_dev.max(other.herm_dev),
            min_eig: self.min_eig.min(other.min_eig),
            residual: self.residual.max(other.residual),
            kernel_dim: self.kernel_dim.max(other.kernel_dim),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Liouvillian {
    pub dim: usize,
    pub matrix: SparseMatrix,
    pub labels: Vec<BlockLabel>,
    /// Index of the lowest diagonal entry of H, the default initial state.
    pub ground: usize,
}

/// −i[H, ρ] plus every dissipator block.
pub fn assemble(h: &Mat<C64>, blocks: &[DissipatorBlock]) -> Result<Liouvillian> {
    let d = h.nrows();
    if h.ncols() != d {
        return Err(Error::DimensionMismatch { expected: d, got: h.ncols() });
    }
    let mut op = SuperOp::zero(d);
    op.add_left(h, C64::new(0.0, -1.0));
    op.add_right(h, C64::new(0.0, 1.0));
    for b in blocks {
        if b.op.dim() != d {
            return Err(Error::DimensionMismatch { expected: d, got: b.op.dim() });
        }
        op.extend(&b.op, 1.0);
    }
    let mut ground = 0;
    for a in 1..d {
        if h[(a, a)].re < h[(ground, ground)].re - 1e-12 {
            ground = a;
        }
    }
    Ok(Liouvillian { dim: d, matrix: op.to_sparse_full(), labels: blocks.iter().map(|b| b.label).collect(), ground })
}

impl Liouvillian {
    /// L + s·extra, keeping labels and ground state of `self`.
    pub fn plus_scaled(&self, extra: &SparseMatrix, s: f64) -> Liouvillian {
        Liouvillian { dim: self.dim, matrix: self.matrix.add_scaled(extra, s), labels: self.labels.clone(), ground: self.ground }
    }

    pub fn density(&self) -> f64 {
        self.matrix.nnz() as f64 / (self.matrix.n as f64).powi(2)
    }

    /// Largest |Tr(L ρ)| response, i.e. max over columns of |Σ_a L[(a,a), c]|.
    pub fn trace_leak(&self) -> f64 {
        self.matrix.trace_leak(self.dim)
    }

    /// Drops couplings between Liouville-space elements whose Bohr frequencies
    /// E_a − E_b differ by more than `tol`.
    pub fn secular(&self, energies: &[f64], tol: f64) -> Liouvillian {
        let d = self.dim;
        let freq = |k: usize| energies[k % d] - energies[k / d];
        let m = &self.matrix;
        let mut row_ptr = vec![0];
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        for r in 0..m.n {
            for (c, v) in m.row(r) {
                if (freq(r) - freq(c)).abs() <= tol {
                    col_idx.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Liouvillian { matrix: SparseMatrix { n: m.n, row_ptr, col_idx, vals }, ..self.clone() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Bordered direct solve, with the degenerate-kernel path when needed.
    #[default]
    Direct,
    /// Shifted inverse power iteration on L; unique kernels only.
    InversePower,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub strategy: Strategy,
    /// Largest restricted system factorized densely; larger ones use sparse LU.
    pub dense_limit: usize,
    /// Relative singular-value threshold for kernel vectors.
    pub kernel_tol: f64,
    /// Shifted inverse-iteration steps used to polish the kernel bases.
    pub refine_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { strategy: Strategy::Direct, dense_limit: 2048, kernel_tol: 1e-12, refine_steps: 4 }
    }
}

/// Largest restricted system handed to the dense SVD of the degenerate path.
pub const DEGENERATE_CAP: usize = 4096;

#[derive(Debug, Clone)]
pub struct SteadyState {
    pub rho: Mat<C64>,
    pub diagnostics: Diagnostics,
}

impl SteadyState {
    pub fn population(&self, a: usize) -> f64 {
        self.rho[(a, a)].re
    }

    /// Tr(P ρ) for an operator in the same basis.
    pub fn expectation(&self, p: &Mat<C64>) -> f64 {
        trace(&(p * &self.rho)).re
    }
}

/// Reports (|Tr ρ − 1|, max|ρ − ρ†|, λ_min of the Hermitian part).
pub fn validate(rho: &Mat<C64>) -> Result<Diagnostics> {
    let d = rho.nrows();
    let herm = Mat::from_fn(d, d, |a, b| 0.5 * (rho[(a, b)] + rho[(b, a)].conj()));
    let eig = herm.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::Eigen(format!("{e:?}")))?;
    Ok(Diagnostics {
        trace_dev: (trace(rho) - ONE).norm(),
        herm_dev: hermiticity_deviation(rho),
        min_eig: eig.first().copied().unwrap_or(0.0),
        residual: 0.0,
        kernel_dim: 0,
    })
}

pub fn steady_state(l: &Liouvillian, initial: Option<&Mat<C64>>) -> Result<SteadyState> {
    steady_state_with(l, initial, &SolverOptions::default())
}

pub fn steady_state_with(l: &Liouvillian, initial: Option<&Mat<C64>>, opts: &SolverOptions) -> Result<SteadyState> {
    let d = l.dim;
    if let Some(r) = initial {
        if r.nrows() != d || r.ncols() != d {
            return Err(Error::DimensionMismatch { expected: d, got: r.nrows() });
        }
    }
    let restricted = Restricted::new(l);
    let classes = restricted.closed_classes(l);
    let r0: Vec<C64> = match initial {
        Some(r) => restricted.idx.iter().map(|&k| r[(k % d, k / d)]).collect(),
        None => restricted.idx.iter().map(|&k| if k == vec_index(l.ground, l.ground, d) { ONE } else { ZERO }).collect(),
    };

    let mut solved = None;
    if classes <= 1 {
        let attempt = match opts.strategy {
            Strategy::Direct => restricted.bordered(opts.dense_limit),
            Strategy::InversePower => restricted.inverse_power(),
        };
        if let Ok(x) = attempt {
            if restricted.relative_residual(&x) <= RESIDUAL_TOL {
                solved = Some((x, 1));
            }
        }
    }
    let (x, kernel_dim) = match solved {
        Some(s) => s,
        None => restricted.degenerate(&r0, classes, opts)?,
    };
    finish(l, &restricted, &x, kernel_dim)
}

fn finish(l: &Liouvillian, restricted: &Restricted, x: &[C64], kernel_dim: usize) -> Result<SteadyState> {
    let d = l.dim;
    let mut full = vec![ZERO; d * d];
    for (&k, &v) in restricted.idx.iter().zip(x) {
        full[k] = v;
    }
    let raw = unvectorize(&full, d);
    let mut diag = validate(&raw)?;
    let rho = Mat::from_fn(d, d, |a, b| 0.5 * (raw[(a, b)] + raw[(b, a)].conj()));
    let lnorm = l.matrix.frobenius_norm();
    let res = norm(&l.matrix.mul_vec(&crate::superop::vectorize(&rho)));
    diag.residual = if lnorm > 0.0 { res / lnorm } else { res };
    diag.kernel_dim = kernel_dim;
    if diag.residual > RESIDUAL_TOL {
        return Err(Error::SolverFailure { residual: res, norm: lnorm });
    }
    if !diag.passes() {
        return Err(Error::Validation(diag));
    }
    Ok(SteadyState { rho, diagnostics: diag })
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// L restricted to the connected components of its sparsity graph that contain populations.
struct Restricted {
    idx: Vec<usize>,
    /// Positions of the populations (a,a) inside `idx`.
    pops: Vec<usize>,
    triplets: Vec<(usize, usize, C64)>,
    lnorm: f64,
}

impl Restricted {
    fn new(l: &Liouvillian) -> Self {
        let m = &l.matrix;
        let n = m.n;
        let d = l.dim;
        let cutoff = GRAPH_CUTOFF * m.max_abs();
        let mut uf = UnionFind::<usize>::new(n);
        for r in 0..n {
            for (c, v) in m.row(r) {
                if v.norm() > cutoff {
                    uf.union(r, c);
                }
            }
        }
        let mut keep = vec![false; n];
        for a in 0..d {
            keep[uf.find(vec_index(a, a, d))] = true;
        }
        let idx: Vec<usize> = (0..n).filter(|&k| keep[uf.find(k)]).collect();
        let mut pos = vec![None; n];
        for (p, &k) in idx.iter().enumerate() {
            pos[k] = Some(p);
        }
        let mut triplets = Vec::new();
        for &r in &idx {
            for (c, v) in m.row(r) {
                if let Some(pc) = pos[c] {
                    triplets.push((pos[r].unwrap_or(0), pc, v));
                }
            }
        }
        let pops = (0..d).filter_map(|a| pos[vec_index(a, a, d)]).collect();
        Restricted { idx, pops, triplets, lnorm: m.frobenius_norm() }
    }

    fn n(&self) -> usize {
        self.idx.len()
    }

    /// Number of closed communicating classes of the population transfer graph.
    fn closed_classes(&self, l: &Liouvillian) -> usize {
        let d = l.dim;
        let m = &l.matrix;
        let cutoff = GRAPH_CUTOFF * m.max_abs();
        let mut g = DiGraph::<(), ()>::with_capacity(d, 0);
        let nodes: Vec<_> = (0..d).map(|_| g.add_node(())).collect();
        for a in 0..d {
            for (c, v) in m.row(vec_index(a, a, d)) {
                let b = c % d;
                if c == vec_index(b, b, d) && b != a && v.re > cutoff {
                    g.add_edge(nodes[b], nodes[a], ());
                }
            }
        }
        let sccs = tarjan_scc(&g);
        let mut comp = vec![0; d];
        for (i, scc) in sccs.iter().enumerate() {
            for n in scc {
                comp[n.index()] = i;
            }
        }
        let mut open = vec![false; sccs.len()];
        for e in g.raw_edges() {
            let (s, t) = (comp[e.source().index()], comp[e.target().index()]);
            if s != t {
                open[s] = true;
            }
        }
        open.iter().filter(|o| !**o).count()
    }

    fn dense(&self, shift: C64) -> Mat<C64> {
        let n = self.n();
        let mut a = Mat::<C64>::zeros(n, n);
        for &(r, c, v) in &self.triplets {
            a[(r, c)] += v;
        }
        for i in 0..n {
            a[(i, i)] -= shift;
        }
        a
    }

    fn sparse(&self, shift: C64, border: bool) -> Result<SparseColMat<usize, C64>> {
        let n = self.n();
        let mut t: Vec<Triplet<usize, usize, C64>> = self.triplets.iter().map(|&(r, c, v)| Triplet::new(r, c, v)).collect();
        if shift != ZERO {
            t.extend((0..n).map(|i| Triplet::new(i, i, -shift)));
        }
        let size = if border {
            for &p in &self.pops {
                t.push(Triplet::new(p, n, ONE));
                t.push(Triplet::new(n, p, ONE));
            }
            n + 1
        } else {
            n
        };
        SparseColMat::try_new_from_triplets(size, size, &t).map_err(|e| Error::Eigen(format!("{e:?}")))
    }

    fn relative_residual(&self, x: &[C64]) -> f64 {
        let mut y = vec![ZERO; self.n()];
        for &(r, c, v) in &self.triplets {
            y[r] += v * x[c];
        }
        let tr: C64 = self.pops.iter().map(|&p| x[p]).sum();
        if !tr.re.is_finite() || tr.norm() < 1e-300 {
            return f64::INFINITY;
        }
        norm(&y) / tr.norm() / self.lnorm.max(1e-300)
    }

    /// Solves [[L, t], [tᵀ, 0]] [x; μ] = [0; 1] with t the trace functional.
    fn bordered(&self, dense_limit: usize) -> Result<Vec<C64>> {
        let n = self.n();
        let mut rhs = Mat::<C64>::zeros(n + 1, 1);
        rhs[(n, 0)] = ONE;
        let sol = if n <= dense_limit {
            let mut a = Mat::<C64>::zeros(n + 1, n + 1);
            a.as_mut().submatrix_mut(0, 0, n, n).copy_from(self.dense(ZERO));
            for &p in &self.pops {
                a[(p, n)] = ONE;
                a[(n, p)] = ONE;
            }
            a.partial_piv_lu().solve(&rhs)
        } else {
            let lu = self.sparse(ZERO, true)?.sp_lu().map_err(|e| Error::Eigen(format!("{e:?}")))?;
            lu.solve(&rhs)
        };
        let x: Vec<C64> = (0..n).map(|i| sol[(i, 0)]).collect();
        if x.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::SolverFailure { residual: f64::INFINITY, norm: self.lnorm });
        }
        Ok(x)
    }

    /// Shifted inverse power iteration x ← (L − s)⁻¹ x normalised to unit trace.
    fn inverse_power(&self) -> Result<Vec<C64>> {
        let n = self.n();
        let shift = C64::new(1e-10 * self.lnorm, 0.0);
        let lu = self.sparse(shift, false)?.sp_lu().map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let mut x = Mat::<C64>::zeros(n, 1);
        for &p in &self.pops {
            x[(p, 0)] = C64::new(1.0 / self.pops.len() as f64, 0.0);
        }
        for _ in 0..100 {
            let mut y = lu.solve(&x);
            let tr: C64 = self.pops.iter().map(|&p| y[(p, 0)]).sum();
            if tr.norm() < 1e-300 {
                return Err(Error::SolverFailure { residual: f64::INFINITY, norm: self.lnorm });
            }
            y = y * faer::Scale(tr.inv());
            let change = (0..n).map(|i| (y[(i, 0)] - x[(i, 0)]).norm()).fold(0.0, f64::max);
            x = y;
            if change < 1e-14 {
                break;
            }
        }
        Ok((0..n).map(|i| x[(i, 0)]).collect())
    }

    /// Projects `r0` onto the kernel along the left kernel (conserved quantities).
    fn degenerate(&self, r0: &[C64], classes: usize, opts: &SolverOptions) -> Result<(Vec<C64>, usize)> {
        let n = self.n();
        if n > DEGENERATE_CAP {
            return Err(Error::DimensionCap { dim: n, cap: DEGENERATE_CAP });
        }
        let a = self.dense(ZERO);
        let svd = a.svd().map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let s = svd.S().column_vector();
        let smax = if n > 0 { s[0].re } else { 0.0 };
        let count = if smax == 0.0 {
            n
        } else {
            (0..n).filter(|&i| s[i].re < opts.kernel_tol * smax).count().max(classes).min(n)
        };
        let mut v = svd.V().subcols(n - count, count).to_owned();
        let mut w = svd.U().subcols(n - count, count).to_owned();
        if smax > 0.0 && opts.refine_steps > 0 {
            let shift = C64::new(1e-14 * smax, 0.0);
            let lu = self.dense(shift).partial_piv_lu();
            let ah = self.dense(ZERO).adjoint().to_owned();
            let luh = Mat::from_fn(n, n, |i, j| ah[(i, j)] - if i == j { shift } else { ZERO }).partial_piv_lu();
            for _ in 0..opts.refine_steps {
                v = lu.solve(&v).qr().compute_thin_Q();
                w = luh.solve(&w).qr().compute_thin_Q();
            }
        }
        let g = w.adjoint() * &v;
        let gs = g.singular_values().map_err(|e| Error::Eigen(format!("{e:?}")))?;
        let cond = gs.last().copied().unwrap_or(0.0) / gs.first().copied().unwrap_or(1.0).max(1e-300);
        if !(cond >= 1e-10) {
            return Err(Error::Biorthogonalization(cond));
        }
        let r = Mat::from_fn(n, 1, |i, _| r0[i]);
        let coeff = g.partial_piv_lu().solve(w.adjoint() * &r);
        let x = &v * coeff;
        Ok(((0..n).map(|i| x[(i, 0)]).collect(), count))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dissipators::optical_tensor;
    use crate::environment::{bose_einstein, OpticalBath};
    use crate::geometry::{normalized_dipoles, RingSpec, SiteParams};
    use crate::hamiltonian::{build_hamiltonian, diagonalize};
    use crate::geometry::CouplingMatrix;
    use crate::operators::identity;

    fn two_level(t: f64) -> (Liouvillian, Mat<C64>) {
        let s = RingSpec::regular(1, &SiteParams::default()).unwrap();
        let b = diagonalize(&build_hamiltonian(&s, &CouplingMatrix::zeros(1), None).unwrap()).unwrap();
        let h = Mat::from_fn(2, 2, |i, j| if i == j { C64::new(b.energies[i], 0.0) } else { ZERO });
        let blk = optical_tensor(&b, &normalized_dipoles(&s).unwrap(), &OpticalBath::calibrated(t, 1.8, 2.5e-9)).unwrap();
        (assemble(&h, &[blk]).unwrap(), h)
    }

    #[test]
    fn two_level_reaches_thermal_populations() {
        let (l, _) = two_level(5800.0);
        let ss = steady_state(&l, None).unwrap();
        let n = bose_einstein(1.8, 5800.0).unwrap();
        assert!((ss.population(1) - n / (1.0 + 2.0 * n)).abs() < 1e-12);
        assert!((ss.population(0) - (1.0 + n) / (1.0 + 2.0 * n)).abs() < 1e-12);
        assert_eq!(ss.diagnostics.kernel_dim, 1);
        let ip = steady_state_with(&l, None, &SolverOptions { strategy: Strategy::InversePower, ..Default::default() }).unwrap();
        assert!((ip.population(1) - ss.population(1)).abs() < 1e-12);
    }

    #[test]
    fn pure_hamiltonian_returns_initial_diagonal() {
        let (_, h) = two_level(0.0);
        let l = assemble(&h, &[]).unwrap();
        let mut rho0 = Mat::<C64>::zeros(2, 2);
        rho0[(0, 0)] = C64::new(0.3, 0.0);
        rho0[(1, 1)] = C64::new(0.7, 0.0);
        rho0[(0, 1)] = C64::new(0.2, 0.1);
        rho0[(1, 0)] = C64::new(0.2, -0.1);
        let ss = steady_state(&l, Some(&rho0)).unwrap();
        assert!((ss.population(0) - 0.3).abs() < 1e-14 && (ss.population(1) - 0.7).abs() < 1e-14);
        assert!(ss.rho[(0, 1)].norm() < 1e-14);
        assert_eq!(ss.diagnostics.kernel_dim, 2);
        let default = steady_state(&l, None).unwrap();
        assert!((default.population(0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn hamiltonian_part_is_anti_hermitian() {
        let (_, h) = two_level(0.0);
        let l = assemble(&h, &[]).unwrap().matrix.to_dense();
        let n = l.nrows();
        for i in 0..n {
            for j in 0..n {
                assert!((l[(i, j)] + l[(j, i)].conj()).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn validate_examples() {
        let mixed = identity(4) * faer::Scale(C64::new(0.25, 0.0));
        let d = validate(&mixed).unwrap();
        assert!(d.trace_dev < 1e-15 && d.herm_dev == 0.0 && (d.min_eig - 0.25).abs() < 1e-15 && d.passes());
        let mut bad = mixed.clone();
        bad[(0, 1)] = C64::new(1e-6, 0.0);
        let d = validate(&bad).unwrap();
        assert!((d.herm_dev - 1e-6).abs() < 1e-12 && !d.passes());
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let h = Mat::<C64>::zeros(2, 2);
        let blk = DissipatorBlock { label: BlockLabel::Trap, op: SuperOp::zero(4) };
        assert!(matches!(assemble(&h, &[blk]), Err(Error::DimensionMismatch { .. })));
    }
}

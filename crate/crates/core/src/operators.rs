//! Dense site-basis operators on `nbits` two-level systems. Bit `i` of a basis index set
//! means site `i` is excited.

use faer::Mat;
use num_complex::Complex64 as C64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn identity(dim: usize) -> Mat<C64> {
    Mat::from_fn(dim, dim, |i, j| if i == j { ONE } else { ZERO })
}

/// σ_i⁺ = |e⟩⟨g| on bit `i`.
pub fn sigma_plus(i: usize, nbits: usize) -> Mat<C64> {
    let dim = 1usize << nbits;
    let mut m = Mat::zeros(dim, dim);
    for s in 0..dim {
        if s & (1 << i) == 0 {
            m[(s | (1 << i), s)] = ONE;
        }
    }
    m
}

pub fn sigma_minus(i: usize, nbits: usize) -> Mat<C64> {
    sigma_plus(i, nbits).transpose().to_owned()
}

pub fn sigma_x(i: usize, nbits: usize) -> Mat<C64> {
    let dim = 1usize << nbits;
    Mat::from_fn(dim, dim, |a, b| if a ^ b == 1 << i { ONE } else { ZERO })
}

pub fn sigma_z(i: usize, nbits: usize) -> Mat<C64> {
    let dim = 1usize << nbits;
    Mat::from_fn(dim, dim, |a, b| {
        if a != b {
            ZERO
        } else if a & (1 << i) != 0 {
            ONE
        } else {
            -ONE
        }
    })
}

/// Projector onto bit `i` excited.
pub fn excited_projector(i: usize, nbits: usize) -> Mat<C64> {
    let dim = 1usize << nbits;
    Mat::from_fn(dim, dim, |a, b| if a == b && a & (1 << i) != 0 { ONE } else { ZERO })
}

pub fn popcount(s: usize) -> usize {
    s.count_ones() as usize
}

/// U† A U.
pub fn conjugate_by(u: &Mat<C64>, a: &Mat<C64>) -> Mat<C64> {
    u.adjoint() * a * u
}

pub fn max_abs(m: &Mat<C64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            best = best.max(m[(i, j)].norm());
        }
    }
    best
}

pub fn hermiticity_deviation(m: &Mat<C64>) -> f64 {
    let mut best = 0.0f64;
    for j in 0..m.ncols() {
        for i in 0..=j.min(m.nrows().saturating_sub(1)) {
            best = best.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    best
}

pub fn trace(m: &Mat<C64>) -> C64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_algebra() {
        let n = 3;
        for i in 0..n {
            let sp = sigma_plus(i, n);
            let sm = sigma_minus(i, n);
            let sx = sigma_x(i, n);
            let sz = sigma_z(i, n);
            let comm = &sp * &sm - &sm * &sp;
            assert!(max_abs(&(comm - &sz)) < 1e-15);
            assert!(max_abs(&(&sp + &sm - &sx)) < 1e-15);
            let pe = excited_projector(i, n);
            assert!(max_abs(&(&sp * &sm - pe)) < 1e-15);
        }
    }

    #[test]
    fn conjugation_preserves_trace() {
        let u = sigma_x(0, 2);
        let a = sigma_z(1, 2) + sigma_plus(0, 2);
        assert!((trace(&conjugate_by(&u, &a)) - trace(&a)).norm() < 1e-15);
    }
}

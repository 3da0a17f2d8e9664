//! Rank reduction of a PSD matrix that keeps a set of linear functionals
//! `tr(A_i F)` fixed.
//!
//! With three functionals (trace, SINR form, sensing form) any factor pair
//! `w0, w1` of `F = Σ w_k w_k^H` admits a nonzero Hermitian 2×2 `Δ` with
//! `tr(B_i Δ) = 0`, `B_i = [w0 w1]^H A_i [w0 w1]`. Moving along `−Δ` until a
//! zero eigenvalue appears merges the two factors into one. Repeating this
//! ends at rank one with every functional unchanged.

use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64;

use crate::numerics::{dot_h, herm_eig, norm_sqr, CMatrix, CVector, Result};

/// Eigenvalues below this fraction of the largest are treated as zero.
const RANK_TOL: f64 = 1e-9;

/// Rank-one factor `f` with `f f^H` matching `F` on every functional.
///
/// Returns `None` for the zero matrix.
pub(crate) fn reduce_to_rank_one(f: &CMatrix, functionals: &[&CMatrix]) -> Result<Option<CVector>> {
    debug_assert!(functionals.len() <= 3);
    let eig = herm_eig(f)?;
    let top = eig.eigenvalues.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return Ok(None);
    }
    let mut factors: Vec<CVector> = eig
        .eigenvalues
        .iter()
        .zip(&eig.eigenvectors)
        .take_while(|(l, _)| **l > RANK_TOL * top)
        .map(|(l, v)| v.iter().map(|z| z * l.sqrt()).collect())
        .collect();

    while factors.len() > 1 {
        let w1 = factors.pop().expect("at least two factors");
        let w0 = factors.pop().expect("at least two factors");
        // The null vector is found on unit factors, where the equations are
        // well scaled even if one factor is tiny, then mapped back.
        let (n0, n1) = (norm_sqr(&w0).sqrt(), norm_sqr(&w1).sqrt());
        let u0: CVector = w0.iter().map(|z| z / n0).collect();
        let u1: CVector = w1.iter().map(|z| z / n1).collect();
        let mut m = Matrix4::<f64>::zeros();
        for (row, a) in functionals.iter().enumerate() {
            let au0 = a.mul_vec(&u0);
            let au1 = a.mul_vec(&u1);
            let b00 = dot_h(&u0, &au0).re;
            let b11 = dot_h(&u1, &au1).re;
            let b01 = dot_h(&u0, &au1);
            let mut r = [b00, b11, 2.0 * b01.re, 2.0 * b01.im];
            let norm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 0.0 {
                r.iter_mut().for_each(|x| *x /= norm);
            }
            for (col, v) in r.iter().enumerate() {
                m[(row, col)] = *v;
            }
        }
        let gram = m.transpose() * m;
        let eig = SymmetricEigen::new(gram);
        let k = eig.eigenvalues.imin();
        let nv = eig.eigenvectors.column(k);
        let (a, b) = (nv[0] / (n0 * n0), nv[1] / (n1 * n1));
        let beta = Complex64::new(nv[2], nv[3]) / (n0 * n1);

        // Δ = [[a, β], [β*, b]] in the (w0, w1) coordinates, β = c + i d, so
        // tr(B Δ) = B00 a + B11 b + 2 c Re B01 + 2 d Im B01.
        let half_sum = 0.5 * (a + b);
        let rad = (0.25 * (a - b) * (a - b) + beta.norm_sqr()).sqrt();
        let (lmax, lmin) = (half_sum + rad, half_sum - rad);
        // Orient so the positive extreme eigenvalue is hit first.
        let (a, b, beta, lmax, lmin) = if lmax > 0.0 {
            (a, b, beta, lmax, lmin)
        } else {
            (-a, -b, -beta, -lmin, -lmax)
        };
        let delta = 1.0 / lmax;
        // I − δΔ has eigenvalues 0 and 1 − δ·lmin along the lmin eigenvector.
        // Two equivalent forms of the lmin eigenvector; the longer one avoids
        // cancellation when Δ is nearly diagonal.
        let x = [beta, Complex64::new(lmin - a, 0.0)];
        let y = [Complex64::new(lmin - b, 0.0), beta.conj()];
        let norm = |v: &[Complex64; 2]| (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
        let (v, n) = if norm(&x) >= norm(&y) {
            (x, norm(&x))
        } else {
            (y, norm(&y))
        };
        let e = if n > 0.0 {
            [v[0] / n, v[1] / n]
        } else {
            [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]
        };
        let keep = (1.0 - delta * lmin).max(0.0).sqrt();
        let merged: CVector = w0
            .iter()
            .zip(&w1)
            .map(|(x0, x1)| (x0 * e[0] + x1 * e[1]) * keep)
            .collect();
        factors.push(merged);
    }
    Ok(factors.pop())
}

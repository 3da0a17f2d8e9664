//! Hermitian eigendecomposition by cyclic complex Jacobi rotations.

use num_complex::Complex64;

use super::{CMatrix, CVector, NumericsError, Result};

const MAX_SWEEPS: usize = 100;
const HERMITIAN_TOL: f64 = 1e-12;
const PSD_TOL: f64 = 1e-9;

/// Eigenvalues sorted descending with matching unit-norm eigenvectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EigDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Vec<CVector>,
}

impl EigDecomposition {
    /// `V Λ V^H`.
    pub fn reconstruct(&self) -> CMatrix {
        let n = self.eigenvalues.len();
        let mut out = CMatrix::zeros(n, n);
        for (lambda, v) in self.eigenvalues.iter().zip(&self.eigenvectors) {
            for i in 0..n {
                let vi = v[i] * *lambda;
                for j in 0..n {
                    out[(i, j)] += vi * v[j].conj();
                }
            }
        }
        out
    }
}

/// Full spectral decomposition of a Hermitian matrix.
///
/// Every eigenvector is rotated so its first significant entry is real and
/// nonnegative, which makes the output a pure function of the input.
pub fn herm_eig(a: &CMatrix) -> Result<EigDecomposition> {
    a.check_hermitian(HERMITIAN_TOL)?;
    let n = a.rows();
    let mut m = a.hermitian_part();
    let mut v = CMatrix::identity(n);
    let scale = m.frobenius_norm();

    if scale > 0.0 {
        let mut converged = false;
        for _ in 0..MAX_SWEEPS {
            if off_diagonal_norm(&m) <= 1e-15 * scale {
                converged = true;
                break;
            }
            for p in 0..n {
                for q in (p + 1)..n {
                    rotate(&mut m, &mut v, p, q);
                }
            }
        }
        if !converged {
            let off = off_diagonal_norm(&m);
            if off > 1e-12 * scale {
                return Err(NumericsError::NoConvergence {
                    sweeps: MAX_SWEEPS,
                    off,
                });
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(j, j)].re.total_cmp(&m[(i, i)].re).then(i.cmp(&j)));

    let eigenvalues = order.iter().map(|&i| m[(i, i)].re).collect();
    let eigenvectors = order
        .iter()
        .map(|&j| {
            let mut col = v.column(j);
            let norm = super::norm_sqr(&col).sqrt();
            for z in &mut col {
                *z /= norm;
            }
            fix_phase(&mut col);
            col
        })
        .collect();

    Ok(EigDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

/// Largest eigenpair of a Hermitian PSD matrix.
///
/// Eigenvalues below `-1e-9 · ‖A‖_F` are rejected as not PSD.
pub fn rank1_top(a: &CMatrix) -> Result<(f64, CVector)> {
    let eig = herm_eig(a)?;
    let tolerance = -PSD_TOL * a.frobenius_norm();
    if let Some(&min) = eig.eigenvalues.last() {
        if min < tolerance {
            return Err(NumericsError::NotPsd {
                eigenvalue: min,
                tolerance,
            });
        }
    }
    let lambda = eig.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    let vector = eig.eigenvectors.into_iter().next().unwrap_or_default();
    Ok((lambda, vector))
}

fn off_diagonal_norm(m: &CMatrix) -> f64 {
    let n = m.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += m[(i, j)].norm_sqr();
            }
        }
    }
    s.sqrt()
}

/// One unitary rotation `M ← U^H M U`, `V ← V U` annihilating `M[p,q]`.
///
/// `U = diag(1, e^{-iφ}) · R(c, s)` on the (p, q) plane, where `φ = arg M[p,q]`
/// makes the pivot real and `R` is the classical symmetric Jacobi rotation.
fn rotate(m: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = m[(p, q)];
    let r = apq.norm();
    if r == 0.0 || r < 1e-300 {
        return;
    }
    let phase = apq / r;
    let app = m[(p, p)].re;
    let aqq = m[(q, q)].re;
    let theta = (aqq - app) / (2.0 * r);
    let t = if theta.abs() > 1e150 {
        0.5 / theta
    } else {
        theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt())
    };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    let ph_c = phase.conj();
    let n = m.rows();

    for k in 0..n {
        let akp = m[(k, p)];
        let akq = m[(k, q)];
        m[(k, p)] = akp * c - akq * ph_c * s;
        m[(k, q)] = akp * s + akq * ph_c * c;
    }
    for k in 0..n {
        let apk = m[(p, k)];
        let aqk = m[(q, k)];
        m[(p, k)] = apk * c - aqk * phase * s;
        m[(q, k)] = apk * s + aqk * phase * c;
    }
    m[(p, q)] = Complex64::new(0.0, 0.0);
    m[(q, p)] = Complex64::new(0.0, 0.0);
    m[(p, p)].im = 0.0;
    m[(q, q)].im = 0.0;

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = vkp * c - vkq * ph_c * s;
        v[(k, q)] = vkp * s + vkq * ph_c * c;
    }
}

/// Rotates `v` so its first entry above `1e-10 · max|v_i|` is real and nonnegative.
pub(crate) fn fix_phase(v: &mut [Complex64]) {
    let max = v.iter().map(|z| z.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    if let Some(lead) = v.iter().find(|z| z.norm() > 1e-10 * max).copied() {
        let rot = lead.conj() / lead.norm();
        for z in v.iter_mut() {
            *z *= rot;
        }
        // Remove rounding residue on the pivot itself.
        if let Some(z) = v.iter_mut().find(|z| z.norm() > 1e-10 * max) {
            *z = Complex64::new(z.norm(), 0.0);
        }
    }
}

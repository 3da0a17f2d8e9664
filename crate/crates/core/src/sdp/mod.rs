//! Semidefinite relaxation of the joint communication/sensing beam design.
//!
//! ```text
//! maximize    tr(Q_t F_u) + tr(Q_t F_t)
//! subject to  tr(Q_u F_u)/γ − tr(Q_u F_t) ≥ σ_u²
//!             tr(F_u) + tr(F_t) ≤ P
//!             F_u, F_t ⪰ 0
//! ```
//!
//! The complex problem is mapped to a real one through
//! `X ↦ [[Re X, −Im X], [Im X, Re X]]`, which doubles traces, and solved with
//! the interior point method in [`ipm`]. Before solving, `Q_t` is scaled to
//! unit Frobenius norm and the SINR row to unit `λ_max(Q_u)`, so solver
//! tolerances do not depend on path-loss magnitudes.

mod ipm;
mod oracle;
mod purify;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use thiserror::Error;

use crate::numerics::{herm_eig, CMatrix, CVector, NumericsError};

pub use oracle::{brute_force_oracle, OracleOptions, OracleResult, ORACLE_MAX_DIM};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("brute-force oracle supports at most {ORACLE_MAX_DIM} antennas, got {0}")]
    OracleTooLarge(usize),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T, E = SdpError> = std::result::Result<T, E>;

/// Inputs of the relaxed problem.
#[derive(Debug, Clone, PartialEq)]
pub struct IsacSdpProblem {
    pub q_t: CMatrix,
    pub q_u: CMatrix,
    pub gamma_u: f64,
    pub sigma_u2: f64,
    pub power_budget: f64,
}

impl IsacSdpProblem {
    /// Builds `Q_u = h h^H` from the user channel.
    pub fn from_channel(
        q_t: CMatrix,
        h_u: &[Complex64],
        gamma_u: f64,
        sigma_u2: f64,
        power_budget: f64,
    ) -> Self {
        Self {
            q_t,
            q_u: CMatrix::outer_h(h_u),
            gamma_u,
            sigma_u2,
            power_budget,
        }
    }

    pub fn n(&self) -> usize {
        self.q_t.rows()
    }

    /// Checks shapes, Hermitian symmetry, PSD-ness of `Q_t` and rank one of `Q_u`.
    pub fn validate(&self) -> Result<()> {
        let n = self.q_t.rows();
        if n == 0 || !self.q_t.is_square() || self.q_u.rows() != n || self.q_u.cols() != n {
            return Err(SdpError::InvalidProblem(format!(
                "Q_t is {}x{}, Q_u is {}x{}",
                self.q_t.rows(),
                self.q_t.cols(),
                self.q_u.rows(),
                self.q_u.cols()
            )));
        }
        for (name, v) in [
            ("gamma_u", self.gamma_u),
            ("sigma_u2", self.sigma_u2),
            ("power_budget", self.power_budget),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(SdpError::InvalidProblem(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        self.q_t.check_hermitian(1e-12)?;
        self.q_u.check_hermitian(1e-12)?;
        let et = herm_eig(&self.q_t)?;
        let scale = self.q_t.frobenius_norm();
        if et.eigenvalues.last().is_some_and(|&l| l < -1e-9 * scale) {
            return Err(SdpError::InvalidProblem("Q_t is not PSD".into()));
        }
        let eu = herm_eig(&self.q_u)?;
        let top = eu.eigenvalues[0];
        let rest = eu.eigenvalues[1..]
            .iter()
            .fold(0.0f64, |m, l| m.max(l.abs()));
        if top < 0.0 || rest > 1e-9 * top.max(f64::MIN_POSITIVE) {
            return Err(SdpError::InvalidProblem("Q_u is not rank one PSD".into()));
        }
        Ok(())
    }

    /// `γ σ² / (P λ_max(Q_u))`: the fraction of the budget that maximum-ratio
    /// transmission needs to meet the SINR target. Above one the problem is
    /// infeasible.
    pub fn mrt_power_fraction(&self) -> f64 {
        let lmax = self.q_u.trace().re;
        if lmax <= 0.0 {
            f64::INFINITY
        } else {
            self.gamma_u * self.sigma_u2 / (self.power_budget * lmax)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpOptions {
    /// Interior point stopping tolerance on relative residuals and gap.
    pub tol: f64,
    pub max_iter: usize,
    /// Residual level below which a run that hit `max_iter` still counts as optimal.
    pub accept_tol: f64,
    /// Replace each solution matrix by a rank-one matrix with equal trace,
    /// SINR form and objective. Off leaves the interior point output as is.
    pub rank_reduction: bool,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_iter: 100,
            accept_tol: 1e-6,
            rank_reduction: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    MaxIter,
}

impl SdpStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SdpStatus::Optimal => "optimal",
            SdpStatus::Infeasible => "infeasible",
            SdpStatus::MaxIter => "max_iter",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SdpSolution {
    pub f_u: CMatrix,
    pub f_t: CMatrix,
    pub status: SdpStatus,
    /// `tr(Q_t F_u) + tr(Q_t F_t)` of the returned matrices.
    pub objective: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
    pub iterations: usize,
    /// `λ1 / tr` of the interior point output before any rank reduction.
    pub rank1_ratio_u: f64,
    pub rank1_ratio_t: f64,
    /// For infeasible problems, the MRT power fraction (> 1).
    pub infeasibility_certificate: Option<f64>,
}

impl SdpSolution {
    fn infeasible(n: usize, certificate: f64) -> Self {
        Self {
            f_u: CMatrix::zeros(n, n),
            f_t: CMatrix::zeros(n, n),
            status: SdpStatus::Infeasible,
            objective: 0.0,
            primal_residual: f64::NAN,
            dual_residual: f64::NAN,
            gap: f64::NAN,
            iterations: 0,
            rank1_ratio_u: 0.0,
            rank1_ratio_t: 0.0,
            infeasibility_certificate: Some(certificate),
        }
    }
}

fn embed(q: &CMatrix) -> DMatrix<f64> {
    let n = q.rows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = q[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

fn unembed(x: &DMatrix<f64>) -> CMatrix {
    let n = x.nrows() / 2;
    let m = CMatrix::from_fn(n, n, |i, j| {
        Complex64::new(
            0.5 * (x[(i, j)] + x[(i + n, j + n)]),
            0.5 * (x[(i + n, j)] - x[(i, j + n)]),
        )
    });
    m.hermitian_part()
}

/// Projection onto the PSD cone plus the top-eigenvalue share `λ1 / tr`
/// (1 for the zero matrix).
fn psd_clip(f: &CMatrix) -> Result<(CMatrix, f64)> {
    let mut eig = herm_eig(f)?;
    eig.eigenvalues.iter_mut().for_each(|l| *l = l.max(0.0));
    let tr: f64 = eig.eigenvalues.iter().sum();
    let ratio = if tr > 0.0 {
        eig.eigenvalues[0] / tr
    } else {
        1.0
    };
    Ok((eig.reconstruct().hermitian_part(), ratio))
}

fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    // tr(AB) = Σ_ij A_ij B_ji
    let n = a.rows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

/// Solves the relaxed problem. Infeasibility is decided up front from the
/// maximum-ratio bound; everything else goes to the interior point method.
pub fn solve_isac_sdp(p: &IsacSdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    p.validate()?;
    let n = p.n();
    let kappa = p.mrt_power_fraction();
    if !(kappa <= 1.0 + 1e-9) {
        return Ok(SdpSolution::infeasible(n, kappa));
    }

    let qt_norm = p.q_t.frobenius_norm();
    let qt_n = if qt_norm > 0.0 {
        p.q_t.scale(1.0 / qt_norm)
    } else {
        p.q_t.clone()
    };
    let qu_n = p.q_u.scale(1.0 / p.q_u.trace().re);
    let et = embed(&qt_n);
    let eu = embed(&qu_n);
    let id = DMatrix::<f64>::identity(2 * n, 2 * n);

    let sf = ipm::StandardForm {
        c: vec![&et * -0.5, &et * -0.5],
        c_lp: DVector::zeros(2),
        a: vec![
            vec![&id * 0.5, &id * 0.5],
            vec![&eu * 0.5, &eu * (-0.5 * p.gamma_u)],
        ],
        a_lp: vec![
            DVector::from_vec(vec![1.0, 0.0]),
            DVector::from_vec(vec![0.0, -1.0]),
        ],
        b: DVector::from_vec(vec![1.0, kappa]),
    };
    let r = ipm::solve(
        &sf,
        &ipm::IpmOptions {
            tol: opts.tol,
            max_iter: opts.max_iter,
            step_fraction: 0.98,
        },
    );

    let (gu, ratio_u) = psd_clip(&unembed(&r.x[0]))?;
    let (mut gt, ratio_t) = psd_clip(&unembed(&r.x[1]))?;
    // Sensing-only power at the solver's noise floor is not a decision, just
    // interior point residue; removing it only lowers interference.
    if gt.trace().re <= 10.0 * opts.tol {
        gt = CMatrix::zeros(n, n);
    }
    let (gu, gt) = if opts.rank_reduction {
        let ident = CMatrix::identity(n);
        let fs = [&ident, &qu_n, &qt_n];
        let one = |g: &CMatrix| -> Result<CMatrix> {
            Ok(purify::reduce_to_rank_one(g, &fs)?
                .map(|v| CMatrix::outer_h(&v))
                .unwrap_or_else(|| CMatrix::zeros(n, n)))
        };
        (one(&gu)?, one(&gt)?)
    } else {
        (gu, gt)
    };
    let f_u = gu.scale(p.power_budget);
    let f_t = gt.scale(p.power_budget);
    let objective = trace_product(&p.q_t, &f_u) + trace_product(&p.q_t, &f_t);
    let worst = r.primal_residual.max(r.dual_residual).max(r.gap);
    let status = if worst <= opts.accept_tol {
        SdpStatus::Optimal
    } else {
        SdpStatus::MaxIter
    };
    Ok(SdpSolution {
        f_u,
        f_t,
        status,
        objective,
        primal_residual: r.primal_residual,
        dual_residual: r.dual_residual,
        gap: r.gap,
        iterations: r.iterations,
        rank1_ratio_u: ratio_u,
        rank1_ratio_t: ratio_t,
        infeasibility_certificate: None,
    })
}

/// `tr(Q_u F_u)/γ − tr(Q_u F_t) − σ²`, nonnegative when the SINR target holds.
pub fn sinr_margin(p: &IsacSdpProblem, f_u: &CMatrix, f_t: &CMatrix) -> f64 {
    trace_product(&p.q_u, f_u) / p.gamma_u - trace_product(&p.q_u, f_t) - p.sigma_u2
}

/// `tr(Q_t F_u) + tr(Q_t F_t)`.
pub fn sdp_objective(q_t: &CMatrix, f_u: &CMatrix, f_t: &CMatrix) -> f64 {
    trace_product(q_t, f_u) + trace_product(q_t, f_t)
}

/// Top eigenvector scaled by `sqrt(λ1)`, zero vector for a zero matrix.
pub fn principal_beam(f: &CMatrix) -> Result<CVector> {
    let eig = herm_eig(f)?;
    let l = eig.eigenvalues.first().copied().unwrap_or(0.0).max(0.0);
    Ok(eig
        .eigenvectors
        .into_iter()
        .next()
        .map(|v| v.iter().map(|z| z * l.sqrt()).collect())
        .unwrap_or_else(|| vec![Complex64::new(0.0, 0.0); f.rows()]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{norm_sqr, quad_form};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn problem(q_t: CMatrix, h: &[Complex64], gamma: f64, sigma: f64) -> IsacSdpProblem {
        IsacSdpProblem::from_channel(q_t, h, gamma, sigma, 1.0)
    }

    fn check_invariants(p: &IsacSdpProblem, s: &SdpSolution) {
        assert_eq!(s.status, SdpStatus::Optimal);
        for f in [&s.f_u, &s.f_t] {
            let e = herm_eig(f).unwrap();
            assert!(*e.eigenvalues.last().unwrap() >= -1e-7);
        }
        let power = s.f_u.trace().re + s.f_t.trace().re;
        assert!(power <= p.power_budget + 1e-7, "power {power}");
        assert!(sinr_margin(p, &s.f_u, &s.f_t) >= -1e-7);
    }

    #[test]
    fn orthogonal_example_objective_half() {
        let p = problem(
            CMatrix::from_diag(&[0.0, 1.0]),
            &[c(1.0, 0.0), c(0.0, 0.0)],
            10.0,
            0.05,
        );
        let s = solve_isac_sdp(&p, &SdpOptions::default()).unwrap();
        check_invariants(&p, &s);
        assert!(
            (s.objective - 0.5).abs() < 1e-6,
            "objective {}",
            s.objective
        );
    }

    #[test]
    fn shared_direction_objective_one() {
        let qu = CMatrix::from_diag(&[1.0, 0.0]);
        let p = problem(qu, &[c(1.0, 0.0), c(0.0, 0.0)], 1.0, 0.1);
        let s = solve_isac_sdp(&p, &SdpOptions::default()).unwrap();
        check_invariants(&p, &s);
        assert!(
            (s.objective - 1.0).abs() < 1e-6,
            "objective {}",
            s.objective
        );
    }

    #[test]
    fn infeasible_by_mrt_bound() {
        let p = problem(CMatrix::identity(2), &[c(1.0, 0.0), c(0.0, 0.0)], 2.0, 1.0);
        let s = solve_isac_sdp(&p, &SdpOptions::default()).unwrap();
        assert_eq!(s.status, SdpStatus::Infeasible);
        assert_eq!(s.infeasibility_certificate, Some(2.0));
    }

    #[test]
    fn rejects_bad_inputs() {
        let h = [c(1.0, 0.0), c(0.0, 0.0)];
        let mut p = problem(CMatrix::identity(2), &h, 1.0, 0.1);
        p.q_u = CMatrix::identity(2);
        assert!(matches!(
            solve_isac_sdp(&p, &SdpOptions::default()),
            Err(SdpError::InvalidProblem(_))
        ));
        let p = problem(CMatrix::from_diag(&[1.0, -1.0]), &h, 1.0, 0.1);
        assert!(solve_isac_sdp(&p, &SdpOptions::default()).is_err());
        let p = problem(CMatrix::identity(2), &h, 0.0, 0.1);
        assert!(solve_isac_sdp(&p, &SdpOptions::default()).is_err());
    }

    #[test]
    fn zero_sensing_form() {
        let p = problem(
            CMatrix::zeros(3, 3),
            &[c(1.0, 0.0), c(0.5, 0.5), c(0.0, 1.0)],
            2.0,
            0.1,
        );
        let s = solve_isac_sdp(&p, &SdpOptions::default()).unwrap();
        check_invariants(&p, &s);
        assert!(s.objective.abs() < 1e-12);
    }

    fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> IsacSdpProblem {
        let h: CVector = (0..n)
            .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let rank = rng.random_range(1..=n);
        let g = CMatrix::from_fn(rank, n, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let qt = &g.adjoint() * &g;
        let gamma = rng.random_range(0.5..20.0);
        let sigma = rng.random_range(0.01..0.5) * norm_sqr(&h) / gamma;
        problem(qt, &h, gamma, sigma)
    }

    #[test]
    fn random_instances_rank_one_and_optimal() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let n = rng.random_range(2..=6);
            let p = random_problem(&mut rng, n);
            let s = solve_isac_sdp(&p, &SdpOptions::default()).unwrap();
            check_invariants(&p, &s);
            let fu = principal_beam(&s.f_u).unwrap();
            let ft = principal_beam(&s.f_t).unwrap();
            let obj = quad_form(&p.q_t, &fu).unwrap() + quad_form(&p.q_t, &ft).unwrap();
            assert!((obj - s.objective).abs() <= 1e-9 * s.objective.max(1e-12));
            // Upper bound: λmax(Q_t) · P.
            let lmax = herm_eig(&p.q_t).unwrap().eigenvalues[0];
            assert!(s.objective <= lmax + 1e-7);
        }
    }

    #[test]
    fn relaxing_gamma_never_hurts() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10 {
            let p = random_problem(&mut rng, 3);
            let mut relaxed = p.clone();
            relaxed.gamma_u *= 0.5;
            let a = solve_isac_sdp(&p, &SdpOptions::default()).unwrap();
            let b = solve_isac_sdp(&relaxed, &SdpOptions::default()).unwrap();
            assert!(b.objective >= a.objective - 1e-7 * a.objective.max(1.0));
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn sensing_scale_does_not_move_solution(seed in 0u64..1000, scale in 1e-6f64..1e6) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let p = random_problem(&mut rng, 3);
            let mut q = p.clone();
            q.q_t = p.q_t.scale(scale);
            // Compared before rank reduction, which is only continuous up to
            // a square root of the eigenvalue cutoff.
            let raw = SdpOptions { rank_reduction: false, ..Default::default() };
            let a = solve_isac_sdp(&p, &raw).unwrap();
            let b = solve_isac_sdp(&q, &raw).unwrap();
            let du = (&a.f_u - &b.f_u).frobenius_norm();
            let dt = (&a.f_t - &b.f_t).frobenius_norm();
            prop_assert!(du < 1e-7 && dt < 1e-7, "du {du:e} dt {dt:e}");
            prop_assert!((b.objective - scale * a.objective).abs() <= 1e-9 * b.objective.abs().max(1e-300));
        }
    }
}

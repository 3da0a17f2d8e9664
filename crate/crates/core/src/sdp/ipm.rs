//! Infeasible-start primal-dual interior point method for small dense
//! block SDPs in standard form:
//!
//! ```text
//! min ⟨C, X⟩  s.t.  ⟨A_i, X⟩ = b_i,  X ⪰ 0
//! max b^T y   s.t.  Z = C − Σ y_i A_i ⪰ 0
//! ```
//!
//! `X` is block diagonal with dense symmetric blocks plus a nonnegative
//! vector block. Search directions are HKM with a Mehrotra predictor-corrector.

use nalgebra::{Cholesky, DMatrix, DVector};

#[derive(Debug, Clone)]
pub(crate) struct StandardForm {
    pub c: Vec<DMatrix<f64>>,
    pub c_lp: DVector<f64>,
    /// `a[i][k]` is constraint `i` restricted to SDP block `k`.
    pub a: Vec<Vec<DMatrix<f64>>>,
    pub a_lp: Vec<DVector<f64>>,
    pub b: DVector<f64>,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub step_fraction: f64,
}

#[derive(Debug, Clone)]
pub(crate) struct IpmResult {
    pub x: Vec<DMatrix<f64>>,
    #[allow(dead_code)]
    pub x_lp: DVector<f64>,
    #[allow(dead_code)]
    pub y: DVector<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub gap: f64,
}

struct Point {
    x: Vec<DMatrix<f64>>,
    x_lp: DVector<f64>,
    y: DVector<f64>,
    z: Vec<DMatrix<f64>>,
    z_lp: DVector<f64>,
}

struct Direction {
    dx: Vec<DMatrix<f64>>,
    dx_lp: DVector<f64>,
    dy: DVector<f64>,
    dz: Vec<DMatrix<f64>>,
    dz_lp: DVector<f64>,
}

fn sym(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

impl StandardForm {
    fn m(&self) -> usize {
        self.b.len()
    }

    fn n_total(&self) -> usize {
        self.c.iter().map(|c| c.nrows()).sum::<usize>() + self.c_lp.len()
    }

    fn a_op(&self, x: &[DMatrix<f64>], x_lp: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.m(), |i, _| {
            self.a[i].iter().zip(x).map(|(a, x)| a.dot(x)).sum::<f64>() + self.a_lp[i].dot(x_lp)
        })
    }

    /// `C − Z − Σ y_i A_i`, block and vector part.
    fn dual_residual(&self, p: &Point) -> (Vec<DMatrix<f64>>, DVector<f64>) {
        let mut rd: Vec<_> = self.c.iter().zip(&p.z).map(|(c, z)| c - z).collect();
        let mut rd_lp = &self.c_lp - &p.z_lp;
        for (i, yi) in p.y.iter().enumerate() {
            for (r, a) in rd.iter_mut().zip(&self.a[i]) {
                *r -= a * *yi;
            }
            rd_lp -= &self.a_lp[i] * *yi;
        }
        (rd, rd_lp)
    }
}

/// Largest `α` keeping `X + α dX ⪰ 0`, `f64::INFINITY` if unbounded.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Option<f64> {
    let l = Cholesky::new(x.clone())?.unpack();
    let left = l.solve_lower_triangular(dx)?;
    let s = l.solve_lower_triangular(&left.transpose())?;
    let min = sym(&s).symmetric_eigenvalues().min();
    Some(if min < 0.0 { -1.0 / min } else { f64::INFINITY })
}

fn max_step_lp(x: &DVector<f64>, dx: &DVector<f64>) -> f64 {
    x.iter()
        .zip(dx.iter())
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

fn step_lengths(p: &Point, d: &Direction) -> Option<(f64, f64)> {
    let mut ap = max_step_lp(&p.x_lp, &d.dx_lp);
    let mut ad = max_step_lp(&p.z_lp, &d.dz_lp);
    for (x, dx) in p.x.iter().zip(&d.dx) {
        ap = ap.min(max_step(x, dx)?);
    }
    for (z, dz) in p.z.iter().zip(&d.dz) {
        ad = ad.min(max_step(z, dz)?);
    }
    Some((ap, ad))
}

fn complementarity(
    x: &[DMatrix<f64>],
    x_lp: &DVector<f64>,
    z: &[DMatrix<f64>],
    z_lp: &DVector<f64>,
) -> f64 {
    x.iter().zip(z).map(|(x, z)| x.dot(z)).sum::<f64>() + x_lp.dot(z_lp)
}

pub(crate) fn solve(sf: &StandardForm, opts: &IpmOptions) -> IpmResult {
    let m = sf.m();
    let n_total = sf.n_total() as f64;
    let norm_b = sf.b.norm();
    let norm_c =
        (sf.c.iter().map(|c| c.norm_squared()).sum::<f64>() + sf.c_lp.norm_squared()).sqrt();

    let mut p = Point {
        x: sf
            .c
            .iter()
            .map(|c| DMatrix::identity(c.nrows(), c.nrows()))
            .collect(),
        x_lp: DVector::from_element(sf.c_lp.len(), 1.0),
        y: DVector::zeros(m),
        z: sf
            .c
            .iter()
            .map(|c| DMatrix::identity(c.nrows(), c.nrows()))
            .collect(),
        z_lp: DVector::from_element(sf.c_lp.len(), 1.0),
    };

    let mut iterations = 0;
    let (mut relp, mut reld, mut relgap);
    loop {
        let rp = &sf.b - sf.a_op(&p.x, &p.x_lp);
        let (rd, rd_lp) = sf.dual_residual(&p);
        let xz = complementarity(&p.x, &p.x_lp, &p.z, &p.z_lp);
        let mu = xz / n_total;
        let pobj: f64 =
            sf.c.iter().zip(&p.x).map(|(c, x)| c.dot(x)).sum::<f64>() + sf.c_lp.dot(&p.x_lp);
        let dobj = sf.b.dot(&p.y);
        relp = rp.norm() / (1.0 + norm_b);
        reld = (rd.iter().map(|r| r.norm_squared()).sum::<f64>() + rd_lp.norm_squared()).sqrt()
            / (1.0 + norm_c);
        relgap = xz.max((pobj - dobj).abs()) / (1.0 + pobj.abs() + dobj.abs());
        if (relp <= opts.tol && reld <= opts.tol && relgap <= opts.tol)
            || iterations >= opts.max_iter
        {
            break;
        }

        // Schur complement and the parts of the direction shared by both steps.
        let mut zinv = Vec::with_capacity(p.z.len());
        for z in &p.z {
            match Cholesky::new(z.clone()) {
                Some(ch) => zinv.push(sym(&ch.inverse())),
                None => return finish(p, iterations, relp, reld, relgap),
            }
        }
        let g: Vec<Vec<DMatrix<f64>>> = (0..m)
            .map(|j| {
                p.x.iter()
                    .zip(&sf.a[j])
                    .zip(&zinv)
                    .map(|((x, a), zi)| x * a * zi)
                    .collect()
            })
            .collect();
        let g_lp: Vec<DVector<f64>> = (0..m)
            .map(|j| sf.a_lp[j].component_mul(&p.x_lp).component_div(&p.z_lp))
            .collect();
        let schur = DMatrix::from_fn(m, m, |i, j| {
            sf.a[i]
                .iter()
                .zip(&g[j])
                .map(|(a, g)| a.dot(g))
                .sum::<f64>()
                + sf.a_lp[i].dot(&g_lp[j])
        });
        let Some(schur) = Cholesky::new(sym(&schur)) else {
            return finish(p, iterations, relp, reld, relgap);
        };
        let w: Vec<DMatrix<f64>> =
            p.x.iter()
                .zip(&rd)
                .zip(&zinv)
                .map(|((x, r), zi)| x * r * zi)
                .collect();
        let w_lp = rd_lp.component_mul(&p.x_lp).component_div(&p.z_lp);
        let base_rhs = &rp + sf.a_op(&w, &w_lp);
        let w_sym: Vec<_> = w.iter().map(sym).collect();

        let direction = |t: Vec<DMatrix<f64>>, t_lp: DVector<f64>| -> Direction {
            let dy = schur.solve(&(&base_rhs - sf.a_op(&t, &t_lp)));
            let mut dz = rd.clone();
            let mut dz_lp = rd_lp.clone();
            let mut dx: Vec<DMatrix<f64>> = t.into_iter().zip(&w_sym).map(|(t, w)| t - w).collect();
            let mut dx_lp = t_lp - &w_lp;
            for j in 0..m {
                for k in 0..dz.len() {
                    dz[k] -= &sf.a[j][k] * dy[j];
                    dx[k] += sym(&g[j][k]) * dy[j];
                }
                dz_lp -= &sf.a_lp[j] * dy[j];
                dx_lp += &g_lp[j] * dy[j];
            }
            Direction {
                dx,
                dx_lp,
                dy,
                dz,
                dz_lp,
            }
        };

        // Predictor.
        let aff = direction(p.x.iter().map(|x| -x).collect(), -&p.x_lp);
        let Some((ap, ad)) = step_lengths(&p, &aff) else {
            return finish(p, iterations, relp, reld, relgap);
        };
        let (ap, ad) = (ap.min(1.0), ad.min(1.0));
        let x_aff: Vec<_> = p.x.iter().zip(&aff.dx).map(|(x, d)| x + d * ap).collect();
        let z_aff: Vec<_> = p.z.iter().zip(&aff.dz).map(|(z, d)| z + d * ad).collect();
        let mu_aff = complementarity(
            &x_aff,
            &(&p.x_lp + &aff.dx_lp * ap),
            &z_aff,
            &(&p.z_lp + &aff.dz_lp * ad),
        ) / n_total;
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Corrector.
        let t: Vec<DMatrix<f64>> = (0..p.x.len())
            .map(|k| {
                -&p.x[k] + &zinv[k] * (sigma * mu) - sym(&(&aff.dx[k] * &aff.dz[k] * &zinv[k]))
            })
            .collect();
        let t_lp = DVector::from_fn(p.x_lp.len(), |i, _| {
            -p.x_lp[i] + (sigma * mu - aff.dx_lp[i] * aff.dz_lp[i]) / p.z_lp[i]
        });
        let d = direction(t, t_lp);
        let Some((ap, ad)) = step_lengths(&p, &d) else {
            return finish(p, iterations, relp, reld, relgap);
        };
        let ap = (opts.step_fraction * ap).min(1.0);
        let ad = (opts.step_fraction * ad).min(1.0);
        if ap < 1e-12 && ad < 1e-12 {
            break;
        }

        for (x, dx) in p.x.iter_mut().zip(&d.dx) {
            *x += dx * ap;
        }
        p.x_lp += &d.dx_lp * ap;
        p.y += &d.dy * ad;
        for (z, dz) in p.z.iter_mut().zip(&d.dz) {
            *z += dz * ad;
        }
        p.z_lp += &d.dz_lp * ad;
        iterations += 1;
    }
    finish(p, iterations, relp, reld, relgap)
}

fn finish(p: Point, iterations: usize, relp: f64, reld: f64, gap: f64) -> IpmResult {
    IpmResult {
        x: p.x,
        x_lp: p.x_lp,
        y: p.y,
        iterations,
        primal_residual: relp,
        dual_residual: reld,
        gap,
    }
}

//! Direct search over rank-one beam pairs, used to check the relaxation.
//!
//! For fixed unit directions `(u_u, u_t)` the best powers come from a
//! two-variable linear program whose optimum sits at one of two vertices:
//! all power on `u_u`, or the point where the SINR constraint and the power
//! budget are both tight. Directions are searched by evaluating every pair
//! from a candidate pool and then refining the best pairs with a random
//! local search.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{IsacSdpProblem, Result, SdpError};
use crate::numerics::{herm_eig, norm_sqr, quad_form, CVector};

pub const ORACLE_MAX_DIM: usize = 4;

#[derive(Debug, Clone, PartialEq)]
pub struct OracleOptions {
    /// Random unit directions added to the candidate pool.
    pub random_samples: usize,
    /// Number of best candidate pairs refined by local search.
    pub restarts: usize,
    /// Local search steps per restart.
    pub refine_iters: usize,
    pub seed: u64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        Self {
            random_samples: 200,
            restarts: 4,
            refine_iters: 3000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleResult {
    pub f_u: CVector,
    pub f_t: CVector,
    pub objective: f64,
}

#[derive(Clone)]
struct Dir {
    u: CVector,
    /// `u^H Q_u u`
    g: f64,
    /// `u^H Q_t u`
    q: f64,
}

struct Evaluator<'a> {
    p: &'a IsacSdpProblem,
}

impl Evaluator<'_> {
    fn dir(&self, mut u: CVector) -> Result<Dir> {
        let n = norm_sqr(&u).sqrt();
        u.iter_mut().for_each(|z| *z /= n);
        Ok(Dir {
            g: quad_form(&self.p.q_u, &u)?,
            q: quad_form(&self.p.q_t, &u)?,
            u,
        })
    }

    /// Best `(p_u, p_t, value)` for fixed directions, `None` if infeasible.
    fn powers(&self, du: &Dir, dt: Option<&Dir>) -> Option<(f64, f64, f64)> {
        let (gamma, sigma, budget) = (self.p.gamma_u, self.p.sigma_u2, self.p.power_budget);
        if du.g <= 0.0 || budget * du.g / gamma < sigma {
            return None;
        }
        let mut best = (budget, 0.0, budget * du.q);
        if let Some(dt) = dt {
            // Both constraints tight: p_u g_u / γ − p_t g_t = σ², p_u + p_t = P.
            let p_t = (budget - gamma * sigma / du.g) / (1.0 + gamma * dt.g / du.g);
            if p_t > 0.0 {
                let p_u = budget - p_t;
                let value = p_u * du.q + p_t * dt.q;
                if value > best.2 {
                    best = (p_u, p_t, value);
                }
            }
        }
        Some(best)
    }

    fn value(&self, du: &Dir, dt: Option<&Dir>) -> f64 {
        self.powers(du, dt).map_or(f64::NEG_INFINITY, |x| x.2)
    }
}

fn random_dir(rng: &mut ChaCha8Rng, n: usize) -> CVector {
    loop {
        let v: CVector = (0..n)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        if norm_sqr(&v) > 1e-6 {
            return v;
        }
    }
}

fn perturb(rng: &mut ChaCha8Rng, u: &[Complex64], step: f64) -> CVector {
    u.iter()
        .map(|z| z + Complex64::new(rng.random_range(-step..step), rng.random_range(-step..step)))
        .collect()
}

/// Best rank-one beam pair found by direct search; `None` when no sampled
/// direction can meet the SINR target.
pub fn brute_force_oracle(
    p: &IsacSdpProblem,
    opts: &OracleOptions,
) -> Result<Option<OracleResult>> {
    p.validate()?;
    let n = p.n();
    if n > ORACLE_MAX_DIM {
        return Err(SdpError::OracleTooLarge(n));
    }
    let ev = Evaluator { p };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);

    // Candidate pool: eigenvectors of both forms, the sensing eigenvectors
    // with the user component removed and kept alone, and random directions.
    let et = herm_eig(&p.q_t)?;
    let eu = herm_eig(&p.q_u)?;
    let h_dir = eu.eigenvectors[0].clone();
    let mut raw: Vec<CVector> = et.eigenvectors.clone();
    raw.extend(eu.eigenvectors.iter().cloned());
    for v in &et.eigenvectors {
        let c: Complex64 = h_dir.iter().zip(v).map(|(h, x)| h.conj() * x).sum();
        let orth: CVector = v.iter().zip(&h_dir).map(|(x, h)| x - h * c).collect();
        let par: CVector = h_dir.iter().map(|h| h * c).collect();
        raw.push(orth);
        raw.push(par);
        for k in 1..10 {
            let t = k as f64 / 10.0;
            raw.push(
                v.iter()
                    .zip(&h_dir)
                    .map(|(x, h)| x * (1.0 - t) + h * t)
                    .collect(),
            );
        }
    }
    for _ in 0..opts.random_samples {
        raw.push(random_dir(&mut rng, n));
    }
    let pool: Vec<Dir> = raw
        .into_iter()
        .filter(|u| norm_sqr(u) > 1e-20)
        .map(|u| ev.dir(u))
        .collect::<Result<_>>()?;

    // Exhaustive pair scan; index `pool.len()` stands for "no sensing beam".
    let mut scored: Vec<(f64, usize, usize)> = Vec::new();
    for (i, du) in pool.iter().enumerate() {
        for j in 0..=pool.len() {
            let v = ev.value(du, pool.get(j));
            if v.is_finite() {
                scored.push((v, i, j));
            }
        }
    }
    if scored.is_empty() {
        return Ok(None);
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut best: Option<(f64, Dir, Option<Dir>)> = None;
    for &(v0, i, j) in scored.iter().take(opts.restarts.max(1)) {
        let mut du = pool[i].clone();
        let mut dt = pool.get(j).cloned().unwrap_or_else(|| pool[0].clone());
        let mut value = v0;
        let mut step = 0.3;
        let mut fails = 0;
        for _ in 0..opts.refine_iters {
            let cu = ev.dir(perturb(&mut rng, &du.u, step))?;
            let ct = if rng.random_bool(0.5) {
                ev.dir(perturb(&mut rng, &dt.u, step))?
            } else {
                dt.clone()
            };
            let v = ev.value(&cu, Some(&ct));
            if v > value {
                value = v;
                du = cu;
                dt = ct;
                fails = 0;
            } else {
                fails += 1;
                if fails >= 30 {
                    step = (step * 0.5).max(1e-7);
                    fails = 0;
                }
            }
        }
        if best.as_ref().is_none_or(|b| value > b.0) {
            best = Some((value, du, Some(dt)));
        }
    }

    let (_, du, dt) = best.expect("at least one restart");
    let (p_u, p_t, objective) = ev
        .powers(&du, dt.as_ref())
        .expect("refined pair stays feasible");
    let f_u = du.u.iter().map(|z| z * p_u.sqrt()).collect();
    let f_t = match dt {
        Some(dt) if p_t > 0.0 => dt.u.iter().map(|z| z * p_t.sqrt()).collect(),
        _ => vec![Complex64::new(0.0, 0.0); n],
    };
    Ok(Some(OracleResult {
        f_u,
        f_t,
        objective,
    }))
}

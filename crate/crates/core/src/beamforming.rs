//! Beam design strategies built on the SDP relaxation.
//!
//! Every strategy shares the communication side (`Q_u = h_u h_u^H`) and
//! differs only in the sensing form `Q_t`:
//!
//! * [`Strategy::FullChannel`] uses the true `H_t^H H_t` (genie upper bound).
//! * [`Strategy::LosDirection`] steers at the geometric BS→target direction.
//! * [`Strategy::DtFixedReflector`] steers at the single bounce off a
//!   configured facet.
//! * [`Strategy::DtDominantPath`] steers along the strongest traced BS→target
//!   path of the digital twin.

use std::f64::consts::PI;
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::channel::{array_response, ArrayGeometry};
use crate::format::{db, sig9};
use crate::geometry::Vec3;
use crate::numerics::{dot_h, norm_sqr, quad_form, CMatrix, CVector, NumericsError};
use crate::raytracer::{mirror_point, PartialPath};
use crate::scene::Scene;
use crate::sdp::{principal_beam, solve_isac_sdp, IsacSdpProblem, SdpError, SdpOptions, SdpStatus};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BeamformingError {
    #[error("SINR target infeasible: maximum-ratio transmission needs {certificate:.6} of the power budget")]
    Infeasible { certificate: f64 },
    #[error("strategy {strategy} needs {input}")]
    MissingInput {
        strategy: Strategy,
        input: &'static str,
    },
    #[error("no propagation path to the target")]
    NoPath,
    #[error("base station and target coincide")]
    CoincidentPoints,
    #[error("beam pattern of a zero vector")]
    ZeroVector,
    #[error(transparent)]
    Sdp(#[from] SdpError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

pub type Result<T, E = BeamformingError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    FullChannel,
    LosDirection,
    DtFixedReflector,
    DtDominantPath,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [
        Strategy::FullChannel,
        Strategy::LosDirection,
        Strategy::DtFixedReflector,
        Strategy::DtDominantPath,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::FullChannel => "full-channel",
            Strategy::LosDirection => "los-direction",
            Strategy::DtFixedReflector => "dt-fixed-reflector",
            Strategy::DtDominantPath => "dt-dominant-path",
        }
    }

    /// Column-name friendly form (`full_channel`).
    pub fn ident(self) -> String {
        self.name().replace('-', "_")
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|k| k.name() == s || k.ident() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Strategy::ALL.iter().map(|k| k.name()).collect();
                format!(
                    "unknown strategy '{s}', expected one of {}",
                    names.join(", ")
                )
            })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamSolution {
    pub f_u: CVector,
    pub f_t: CVector,
    /// SDP objective `tr(Q_t F_u) + tr(Q_t F_t)` on the strategy's own `Q_t`.
    pub predicted_objective: f64,
    pub rank1_ratio_u: f64,
    pub rank1_ratio_t: f64,
    pub repaired: bool,
    pub status: SdpStatus,
    /// Steering direction `(az, el)` used for `Q_t`; `None` for full channel.
    pub direction: Option<(f64, f64)>,
    /// Dominant-path strategy fell back to the LoS direction.
    pub used_fallback: bool,
}

/// Geometric direction from `bs` to `target`; azimuth is 0 when vertical.
pub fn los_direction(bs: Vec3, target: Vec3) -> Result<(f64, f64)> {
    let d = target - bs;
    if d.norm() <= 1e-12 {
        return Err(BeamformingError::CoincidentPoints);
    }
    Ok(d.az_el())
}

/// AoD of the single bounce off the scene's fixed reflector, computed from
/// the mirror image of the target.
pub fn fixed_reflector_direction(scene: &Scene, target: Vec3) -> Result<(f64, f64)> {
    let idx = scene
        .fixed_reflector
        .ok_or(BeamformingError::MissingInput {
            strategy: Strategy::DtFixedReflector,
            input: "a fixed_reflector facet in the scene",
        })?;
    let facet = scene
        .facets
        .get(idx)
        .ok_or(BeamformingError::MissingInput {
            strategy: Strategy::DtFixedReflector,
            input: "a valid fixed_reflector facet index",
        })?;
    los_direction(scene.bs.position, mirror_point(target, facet))
}

/// `conj(a) a^T`: rank one, trace `N_t`.
pub fn build_q_direction(tx: &ArrayGeometry, az_rad: f64, el_rad: f64) -> CMatrix {
    let a = array_response(tx, az_rad, el_rad);
    let ac: CVector = a.iter().map(|z| z.conj()).collect();
    CMatrix::outer(&ac, &a)
}

/// `H_t^H H_t`.
pub fn build_q_full(h_t: &CMatrix) -> CMatrix {
    (&h_t.adjoint() * h_t).hermitian_part()
}

/// AoD and partial gain of the strongest path. Ties go to the shorter delay,
/// then the smaller azimuth.
pub fn dominant_partial_direction(paths: &[PartialPath]) -> Result<(f64, f64, Complex64)> {
    let best = paths
        .iter()
        .min_by(|a, b| {
            b.beta1
                .norm()
                .total_cmp(&a.beta1.norm())
                .then(a.delay_s.total_cmp(&b.delay_s))
                .then(a.aod_az_rad.total_cmp(&b.aod_az_rad))
        })
        .ok_or(BeamformingError::NoPath)?;
    Ok((best.aod_az_rad, best.aod_el_rad, best.beta1))
}

/// Per-strategy inputs. Only the field the chosen strategy reads must be set.
#[derive(Debug, Clone, Copy)]
pub struct DesignInputs<'a> {
    pub tx: &'a ArrayGeometry,
    pub h_u: &'a [Complex64],
    pub h_t: Option<&'a CMatrix>,
    pub los: Option<(f64, f64)>,
    pub fixed_reflector: Option<(f64, f64)>,
    pub partial_paths: Option<&'a [PartialPath]>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DesignParams {
    /// Linear SINR target.
    pub gamma_u: f64,
    pub sigma_u2: f64,
    pub power_budget: f64,
    pub sdp: SdpOptions,
}

/// Sensing form for a strategy and the steering direction behind it.
pub fn sensing_form(
    strategy: Strategy,
    inputs: &DesignInputs<'_>,
) -> Result<(CMatrix, Option<(f64, f64)>, bool)> {
    let missing = |input| BeamformingError::MissingInput { strategy, input };
    let steer = |(az, el): (f64, f64)| (build_q_direction(inputs.tx, az, el), Some((az, el)));
    Ok(match strategy {
        Strategy::FullChannel => {
            let h_t = inputs.h_t.ok_or(missing("the sensing channel"))?;
            (build_q_full(h_t), None, false)
        }
        Strategy::LosDirection => {
            let (q, d) = steer(inputs.los.ok_or(missing("the LoS direction"))?);
            (q, d, false)
        }
        Strategy::DtFixedReflector => {
            let (q, d) = steer(
                inputs
                    .fixed_reflector
                    .ok_or(missing("the reflector direction"))?,
            );
            (q, d, false)
        }
        Strategy::DtDominantPath => {
            let paths = inputs
                .partial_paths
                .ok_or(missing("traced partial paths"))?;
            match dominant_partial_direction(paths) {
                Ok((az, el, _)) => {
                    let (q, d) = steer((az, el));
                    (q, d, false)
                }
                Err(BeamformingError::NoPath) => {
                    let (q, d) = steer(
                        inputs
                            .los
                            .ok_or(missing("the LoS direction for fallback"))?,
                    );
                    (q, d, true)
                }
                Err(e) => return Err(e),
            }
        }
    })
}

pub fn design_beams(
    strategy: Strategy,
    inputs: &DesignInputs<'_>,
    params: &DesignParams,
) -> Result<BeamSolution> {
    let (q_t, direction, used_fallback) = sensing_form(strategy, inputs)?;
    let problem = IsacSdpProblem::from_channel(
        q_t,
        inputs.h_u,
        params.gamma_u,
        params.sigma_u2,
        params.power_budget,
    );
    let sol = solve_isac_sdp(&problem, &params.sdp)?;
    if sol.status == SdpStatus::Infeasible {
        return Err(BeamformingError::Infeasible {
            certificate: sol.infeasibility_certificate.unwrap_or(f64::INFINITY),
        });
    }
    let repair = rank1_and_repair(
        &sol.f_u,
        &sol.f_t,
        &problem.q_t,
        inputs.h_u,
        params.gamma_u,
        params.sigma_u2,
        params.power_budget,
    )?;
    Ok(BeamSolution {
        f_u: repair.f_u,
        f_t: repair.f_t,
        predicted_objective: sol.objective,
        rank1_ratio_u: sol.rank1_ratio_u,
        rank1_ratio_t: sol.rank1_ratio_t,
        repaired: repair.repaired,
        status: sol.status,
        direction,
        used_fallback,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Repaired {
    pub f_u: CVector,
    pub f_t: CVector,
    pub repaired: bool,
}

fn sinr(h: &[Complex64], f_u: &[Complex64], f_t: &[Complex64], sigma_u2: f64) -> f64 {
    dot_h(h, f_u).norm_sqr() / (dot_h(h, f_t).norm_sqr() + sigma_u2)
}

fn unit(v: &[Complex64]) -> Option<CVector> {
    let n = norm_sqr(v).sqrt();
    (n > 0.0).then(|| v.iter().map(|z| z / n).collect())
}

/// Best `(p_u, p_t)` for fixed unit directions by enumerating the vertices of
/// `{p ≥ 0, p_u + p_t ≤ P, p_u g_u/γ − p_t g_t ≥ σ²}`.
fn allocate_power(
    q: (f64, f64),
    g: (f64, f64),
    gamma: f64,
    sigma2: f64,
    budget: f64,
) -> Option<(f64, f64)> {
    let a = g.0 / gamma;
    let b = g.1;
    let mut candidates = vec![(0.0, 0.0), (budget, 0.0), (0.0, budget)];
    if a > 0.0 {
        candidates.push((sigma2 / a, 0.0));
        // SINR line meets the budget line.
        let p_t = (budget * a - sigma2) / (a + b);
        candidates.push((budget - p_t, p_t));
    }
    let feasible = |&(pu, pt): &(f64, f64)| {
        pu >= 0.0
            && pt >= 0.0
            && pu + pt <= budget * (1.0 + 1e-12)
            && a * pu - b * pt >= sigma2 * (1.0 - 1e-12)
    };
    candidates
        .into_iter()
        .filter(feasible)
        .map(|(pu, pt)| (pu, pt, pu * q.0 + pt * q.1))
        .fold(None, |best: Option<(f64, f64, f64)>, c| match best {
            Some(b) if b.2 >= c.2 => Some(b),
            _ => Some(c),
        })
        .map(|(pu, pt, _)| (pu, pt))
}

/// Powers along fixed unit directions, if they can meet the SINR target.
fn allocate_along(
    uu: &[Complex64],
    ut: Option<&[Complex64]>,
    q_t: &CMatrix,
    h_u: &[Complex64],
    gamma_u: f64,
    sigma_u2: f64,
    power_budget: f64,
) -> Result<Option<(CVector, CVector)>> {
    let gain = |u: &[Complex64]| dot_h(h_u, u).norm_sqr();
    let (q_tv, g_t) = match ut {
        Some(ut) => (quad_form(q_t, ut)?, gain(ut)),
        None => (0.0, 0.0),
    };
    let Some((pu, pt)) = allocate_power(
        (quad_form(q_t, uu)?, q_tv),
        (gain(uu), g_t),
        gamma_u,
        sigma_u2,
        power_budget,
    ) else {
        return Ok(None);
    };
    let excess = (pu + pt) / power_budget;
    let (pu, pt) = if excess > 1.0 {
        (pu / excess, pt / excess)
    } else {
        (pu, pt)
    };
    let fu: CVector = uu.iter().map(|z| z * pu.sqrt()).collect();
    let ft: CVector = match ut {
        Some(ut) => ut.iter().map(|z| z * pt.sqrt()).collect(),
        None => vec![Complex64::new(0.0, 0.0); uu.len()],
    };
    Ok((sinr(h_u, &fu, &ft, sigma_u2) >= gamma_u - 1e-9).then_some((fu, ft)))
}

/// Principal-eigenvector beams `sqrt(λ1) v1`, with the powers re-allocated
/// along the same directions if the SINR target is missed by more than 1e-9.
/// If no allocation works, the communication direction is rotated toward
/// `h_u` just far enough; maximum-ratio transmission is the last resort.
pub fn rank1_and_repair(
    f_u_mat: &CMatrix,
    f_t_mat: &CMatrix,
    q_t: &CMatrix,
    h_u: &[Complex64],
    gamma_u: f64,
    sigma_u2: f64,
    power_budget: f64,
) -> Result<Repaired> {
    let mut f_u = principal_beam(f_u_mat)?;
    let mut f_t = principal_beam(f_t_mat)?;
    let power = norm_sqr(&f_u) + norm_sqr(&f_t);
    if power > power_budget {
        let s = (power_budget / power).sqrt();
        f_u.iter_mut().chain(f_t.iter_mut()).for_each(|z| *z *= s);
    }
    if sinr(h_u, &f_u, &f_t, sigma_u2) >= gamma_u - 1e-9 {
        return Ok(Repaired {
            f_u,
            f_t,
            repaired: false,
        });
    }

    if let Some(uu) = unit(&f_u) {
        let ut = unit(&f_t);
        let h_unit = unit(h_u).ok_or(BeamformingError::Infeasible {
            certificate: f64::INFINITY,
        })?;
        let phase = dot_h(h_u, &uu);
        let phase = if phase.norm() > 0.0 {
            phase / phase.norm()
        } else {
            Complex64::new(1.0, 0.0)
        };
        let toward_h: CVector = h_unit.iter().map(|z| z * phase).collect();
        let tilt = |s: f64| -> Result<Option<(CVector, CVector)>> {
            let mixed: CVector = uu
                .iter()
                .zip(&toward_h)
                .map(|(a, b)| a * (1.0 - s) + b * s)
                .collect();
            let Some(u) = unit(&mixed) else {
                return Ok(None);
            };
            allocate_along(&u, ut.as_deref(), q_t, h_u, gamma_u, sigma_u2, power_budget)
        };
        if let Some((fu, ft)) = tilt(0.0)? {
            return Ok(Repaired {
                f_u: fu,
                f_t: ft,
                repaired: true,
            });
        }
        // Smallest rotation of the communication beam toward h_u that makes
        // the power allocation feasible.
        if let Some(mut best) = tilt(1.0)? {
            let (mut lo, mut hi) = (0.0, 1.0);
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                match tilt(mid)? {
                    Some(b) => {
                        best = b;
                        hi = mid;
                    }
                    None => lo = mid,
                }
            }
            return Ok(Repaired {
                f_u: best.0,
                f_t: best.1,
                repaired: true,
            });
        }
    }

    let h_unit = unit(h_u).ok_or(BeamformingError::Infeasible {
        certificate: f64::INFINITY,
    })?;
    let mrt: CVector = h_unit.iter().map(|z| z * power_budget.sqrt()).collect();
    let zero = vec![Complex64::new(0.0, 0.0); h_u.len()];
    let achieved = sinr(h_u, &mrt, &zero, sigma_u2);
    if achieved < gamma_u - 1e-9 {
        return Err(BeamformingError::Infeasible {
            certificate: gamma_u / achieved,
        });
    }
    Ok(Repaired {
        f_u: mrt,
        f_t: zero,
        repaired: true,
    })
}

/// Azimuth grid from −180° to 180° in 0.5° steps, in degrees.
pub fn default_az_grid_deg() -> Vec<f64> {
    (0..=720).map(|i| -180.0 + 0.5 * i as f64).collect()
}

/// `|a_tx(az, 0)^T f|²` over the azimuth grid (radians).
pub fn beam_pattern(f: &[Complex64], tx: &ArrayGeometry, az_grid_rad: &[f64]) -> Result<Vec<f64>> {
    if norm_sqr(f) == 0.0 {
        return Err(BeamformingError::ZeroVector);
    }
    Ok(az_grid_rad
        .iter()
        .map(|&az| {
            let a = array_response(tx, az, 0.0);
            a.iter()
                .zip(f)
                .map(|(x, y)| x * y)
                .sum::<Complex64>()
                .norm_sqr()
        })
        .collect())
}

/// `az_deg,gain_db` rows.
pub fn write_beam_pattern_csv(
    az_deg: &[f64],
    gains: &[f64],
    mut w: impl Write,
) -> std::io::Result<()> {
    writeln!(w, "az_deg,gain_db")?;
    for (az, g) in az_deg.iter().zip(gains) {
        writeln!(w, "{},{}", sig9(*az), sig9(db(*g)))?;
    }
    Ok(())
}

/// Degrees to radians for a whole grid.
pub fn deg_grid_to_rad(az_deg: &[f64]) -> Vec<f64> {
    az_deg.iter().map(|d| d * PI / 180.0).collect()
}

//! Array responses and channel synthesis from traced paths.
//!
//! Conventions: `h_u` is defined so that the UE receives `h_u^H x`, and the
//! sensing channel is `N_r × N_t` so the BS receives `H_t x`. With
//! `Q_t = H_t^H H_t` this gives `trace(Q_t f f^H) = ‖H_t f‖²` exactly.

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::geometry::Vec3;
use crate::numerics::{dot_h, norm_sqr, CMatrix, CVector};
use crate::raytracer::PropagationPath;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("transmit power {power:e} exceeds budget {budget:e}")]
    PowerBudget { power: f64, budget: f64 },
    #[error("noise power must be positive, got {0:e}")]
    NonPositiveNoise(f64),
    #[error("beam length {got} does not match {expected} transmit antennas")]
    DimensionMismatch { expected: usize, got: usize },
}

/// Element offsets, in wavelengths, from the array reference point.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry {
    element_positions: Vec<Vec3>,
}

impl ArrayGeometry {
    /// Uniform linear array with element `n` at `n · spacing · axis/|axis|`.
    pub fn ula(n_elements: usize, spacing_wavelengths: f64, axis: Vec3) -> Self {
        let axis = axis.normalized().unwrap_or(Vec3::new(0.0, 1.0, 0.0));
        Self {
            element_positions: (0..n_elements)
                .map(|n| axis * (n as f64 * spacing_wavelengths))
                .collect(),
        }
    }

    /// Half-wavelength ULA along the y axis.
    pub fn half_wave_ula_y(n_elements: usize) -> Self {
        Self::ula(n_elements, 0.5, Vec3::new(0.0, 1.0, 0.0))
    }

    pub fn from_positions(element_positions: Vec<Vec3>) -> Self {
        Self { element_positions }
    }

    pub fn n_elements(&self) -> usize {
        self.element_positions.len()
    }

    pub fn element_positions(&self) -> &[Vec3] {
        &self.element_positions
    }
}

/// Plane-wave response `exp(+j 2π k·d_n)` for unit direction `k(az, el)`.
pub fn array_response(g: &ArrayGeometry, az_rad: f64, el_rad: f64) -> CVector {
    let k = Vec3::from_az_el(az_rad, el_rad);
    g.element_positions
        .iter()
        .map(|d| Complex64::from_polar(1.0, 2.0 * PI * k.dot(*d)))
        .collect()
}

/// Communication channel and sensing channel of one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelSet {
    pub h_u: CVector,
    pub h_t: CMatrix,
}

/// `h_u = Σ_l conj(α_l) conj(a_tx(AoD_l))`.
pub fn comm_channel(paths: &[PropagationPath], tx: &ArrayGeometry) -> CVector {
    let mut h = vec![Complex64::new(0.0, 0.0); tx.n_elements()];
    for p in paths {
        let a = array_response(tx, p.aod_az_rad, p.aod_el_rad);
        let g = p.complex_gain.conj();
        for (hi, ai) in h.iter_mut().zip(&a) {
            *hi += g * ai.conj();
        }
    }
    h
}

/// `H_t = Σ_l α_l a_rx(AoA_l) a_tx(AoD_l)^T`, shape `N_r × N_t`.
pub fn sensing_channel(
    paths: &[PropagationPath],
    tx: &ArrayGeometry,
    rx: &ArrayGeometry,
) -> CMatrix {
    let (nr, nt) = (rx.n_elements(), tx.n_elements());
    let mut h = CMatrix::zeros(nr, nt);
    for p in paths {
        let at = array_response(tx, p.aod_az_rad, p.aod_el_rad);
        let ar = array_response(rx, p.aoa_az_rad, p.aoa_el_rad);
        for i in 0..nr {
            let left = p.complex_gain * ar[i];
            for j in 0..nt {
                h[(i, j)] += left * at[j];
            }
        }
    }
    h
}

/// Link quality of a beam pair on a given channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkMetrics {
    /// Linear SINR at the UE.
    pub sinr_u: f64,
    /// Linear sensing SNR at the BS.
    pub snr_t: f64,
}

/// SINR `|h^H f_u|² / (|h^H f_t|² + σ_u²)` and SNR `(‖H f_u‖² + ‖H f_t‖²) / σ_t²`.
pub fn evaluate_link(
    f_u: &[Complex64],
    f_t: &[Complex64],
    cs: &ChannelSet,
    sigma_u2: f64,
    sigma_t2: f64,
    power_budget: f64,
) -> Result<LinkMetrics, ChannelError> {
    let nt = cs.h_u.len();
    for f in [f_u, f_t] {
        if f.len() != nt {
            return Err(ChannelError::DimensionMismatch {
                expected: nt,
                got: f.len(),
            });
        }
    }
    for s in [sigma_u2, sigma_t2] {
        if !(s > 0.0) {
            return Err(ChannelError::NonPositiveNoise(s));
        }
    }
    let power = norm_sqr(f_u) + norm_sqr(f_t);
    if power > power_budget + 1e-9 {
        return Err(ChannelError::PowerBudget {
            power,
            budget: power_budget,
        });
    }
    let signal = dot_h(&cs.h_u, f_u).norm_sqr();
    let interference = dot_h(&cs.h_u, f_t).norm_sqr();
    let echo = norm_sqr(&cs.h_t.mul_vec(f_u)) + norm_sqr(&cs.h_t.mul_vec(f_t));
    Ok(LinkMetrics {
        sinr_u: signal / (interference + sigma_u2),
        snr_t: echo / sigma_t2,
    })
}

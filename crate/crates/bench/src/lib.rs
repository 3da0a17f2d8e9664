//! Deterministic fixtures shared by the criterion benches.

use isac_twin_core::numerics::{CMatrix, CVector};
use isac_twin_core::sdp::IsacSdpProblem;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn entry(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

pub fn random_hermitian(n: usize, seed: u64) -> CMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    CMatrix::from_fn(n, n, |_, _| entry(&mut rng)).hermitian_part()
}

/// Feasible instance with a rank-2 sensing form, SINR target 10 and the
/// noise set so that maximum-ratio transmission uses half the budget.
pub fn sdp_instance(n: usize, seed: u64) -> IsacSdpProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h: CVector = (0..n).map(|_| entry(&mut rng)).collect();
    let g = CMatrix::from_fn(2, n, |_, _| entry(&mut rng));
    let h2: f64 = h.iter().map(|z| z.norm_sqr()).sum();
    IsacSdpProblem::from_channel(&g.adjoint() * &g, &h, 10.0, 0.5 * h2 / 10.0, 1.0)
}

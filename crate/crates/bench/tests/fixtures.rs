use isac_twin_bench::{random_hermitian, sdp_instance};
use isac_twin_core::sdp::{solve_isac_sdp, SdpOptions, SdpStatus};

#[test]
fn fixtures_are_deterministic_and_solvable() {
    assert_eq!(random_hermitian(16, 1), random_hermitian(16, 1));
    assert_eq!(random_hermitian(16, 1).hermitian_deviation(), 0.0);
    let p = sdp_instance(16, 2);
    assert!((p.mrt_power_fraction() - 0.5).abs() < 1e-12);
    let s = solve_isac_sdp(&p, &SdpOptions::default()).unwrap();
    assert_eq!(s.status, SdpStatus::Optimal);
}

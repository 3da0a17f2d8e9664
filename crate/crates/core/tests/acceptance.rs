//! Acceptance criteria C1–C9. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use isac_twin_core::beamforming::{
    beam_pattern, default_az_grid_deg, deg_grid_to_rad, design_beams, rank1_and_repair,
    DesignInputs, DesignParams, Strategy,
};
use isac_twin_core::channel::{array_response, ArrayGeometry};
use isac_twin_core::numerics::{herm_eig, quad_form, CMatrix, CVector};
use isac_twin_core::raytracer::{
    mirror_point, trace_point_to_point, InteractionKind, PropagationPath,
};
use isac_twin_core::scene::{Facet, Scene};
use isac_twin_core::sdp::{
    brute_force_oracle, solve_isac_sdp, IsacSdpProblem, OracleOptions, SdpOptions, SdpStatus,
};
use isac_twin_core::sim::{
    run_montecarlo, write_outputs, AreaLabel, ExperimentConfig, MonteCarloOutput,
};
use isac_twin_core::{Vec3, SPEED_OF_LIGHT};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn db(x: f64) -> f64 {
    10.0 * x.log10()
}

fn repo_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

// C1 -----------------------------------------------------------------------

fn random_problem(rng: &mut ChaCha8Rng, n: usize) -> IsacSdpProblem {
    let h: CVector = (0..n)
        .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    let rank = rng.random_range(1..=n);
    let g = CMatrix::from_fn(rank, n, |_, _| {
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    });
    let q_t = &g.adjoint() * &g;
    let gamma = rng.random_range(0.5..20.0);
    let h2: f64 = h.iter().map(|z| z.norm_sqr()).sum();
    let sigma = rng.random_range(0.02..0.9) * h2 / gamma;
    IsacSdpProblem::from_channel(q_t, &h, gamma, sigma, 1.0)
}

fn c1_sdp_vs_oracle() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let (mut below_oracle, mut within, mut total) = (0, 0, 0);
    let mut worst_gap_db: f64 = 0.0;
    let mut offenders = Vec::new();
    for i in 0..100 {
        let n = [2, 3, 4][i % 3];
        let p = random_problem(&mut rng, n);
        let sol = solve_isac_sdp(&p, &SdpOptions::default()).expect("sdp solve");
        let oracle = brute_force_oracle(
            &p,
            &OracleOptions {
                seed: i as u64,
                ..OracleOptions::default()
            },
        )
        .expect("oracle")
        .expect("feasible instance");
        total += 1;
        if sol.status != SdpStatus::Optimal || sol.objective < oracle.objective - 1e-6 {
            below_oracle += 1;
            offenders.push(format!(
                "#{i} {} sdp {:.9} oracle {:.9}",
                sol.status.as_str(),
                sol.objective,
                oracle.objective
            ));
        }
        let r = rank1_and_repair(
            &sol.f_u,
            &sol.f_t,
            &p.q_t,
            &p_h(&p),
            p.gamma_u,
            p.sigma_u2,
            p.power_budget,
        )
        .expect("repair");
        let achieved = quad_form(&p.q_t, &r.f_u).unwrap() + quad_form(&p.q_t, &r.f_t).unwrap();
        let gap = db(oracle.objective) - db(achieved);
        worst_gap_db = worst_gap_db.max(gap);
        if gap <= 0.2 {
            within += 1;
        }
    }
    let elapsed = start.elapsed();
    let frac = within as f64 / total as f64;
    verdict(
        below_oracle == 0 && frac >= 0.95 && elapsed < Duration::from_secs(120),
        format!(
            "{total} instances, {below_oracle} below oracle {offenders:?}, {:.0}% within 0.2 dB (worst {worst_gap_db:.2e} dB), {:.1} s",
            100.0 * frac,
            elapsed.as_secs_f64()
        ),
    )
}

// The oracle problems are built from h, so Q_u = h h^H has h as its only
// eigenvector with a positive eigenvalue.
fn p_h(p: &IsacSdpProblem) -> CVector {
    let e = herm_eig(&p.q_u).unwrap();
    let s = e.eigenvalues[0].max(0.0).sqrt();
    e.eigenvectors[0].iter().map(|z| z * s).collect()
}

// C2/C3/C4/C8/C9 share one desk-scale run ----------------------------------

struct DeskRun {
    cfg: ExperimentConfig,
    out: MonteCarloOutput,
    elapsed: Duration,
}

fn desk_run() -> Result<DeskRun, String> {
    let cfg =
        ExperimentConfig::load(repo_root().join("configs/desk.json")).map_err(|e| e.to_string())?;
    let start = Instant::now();
    let out = run_montecarlo(&cfg, None).map_err(|e| e.to_string())?;
    Ok(DeskRun {
        cfg,
        out,
        elapsed: start.elapsed(),
    })
}

fn c2_feasibility(run: &DeskRun) -> Verdict {
    let gamma = run.cfg.gamma_linear();
    let (mut checked, mut violations) = (0, 0);
    let mut worst = f64::INFINITY;
    for t in &run.out.trials {
        for o in &t.outcomes {
            if !o.status.is_feasible() {
                continue;
            }
            checked += 1;
            worst = worst.min(o.sinr - gamma);
            if o.sinr < gamma - 1e-6 || o.power > run.cfg.power_budget + 1e-9 {
                violations += 1;
            }
        }
    }
    verdict(
        violations == 0 && checked > 0,
        format!(
            "{} trials, {checked} feasible outcomes, {violations} violations, min SINR margin {worst:.3e}",
            run.out.trials.len()
        ),
    )
}

fn medians(run: &DeskRun, area: AreaLabel) -> Option<[f64; 4]> {
    let m = |k| run.out.summary.median(k, area);
    Some([
        m(Strategy::FullChannel)?,
        m(Strategy::LosDirection)?,
        m(Strategy::DtFixedReflector)?,
        m(Strategy::DtDominantPath)?,
    ])
}

fn c3_ordering(run: &DeskRun) -> Verdict {
    let (Some(n), Some(l)) = (
        medians(run, AreaLabel::NlosDominant),
        medians(run, AreaLabel::LosDominant),
    ) else {
        return verdict(false, "an area has no feasible trials".into());
    };
    let [n_full, n_los, _, n_dom] = n;
    let [l_full, _, l_fix, l_dom] = l;
    let pass = n_full >= n_dom
        && n_dom >= n_los
        && l_full >= l_dom
        && l_dom >= l_fix
        && n_full - n_dom <= 3.0
        && l_full - l_dom <= 3.0;
    verdict(
        pass,
        format!(
            "nlos full {n_full:.2} >= dominant {n_dom:.2} >= los {n_los:.2}; los full {l_full:.2} >= dominant {l_dom:.2} >= fixed {l_fix:.2} dB"
        ),
    )
}

fn c4_gap(run: &DeskRun) -> Verdict {
    let Some([full, los, _, _]) = medians(run, AreaLabel::NlosDominant) else {
        return verdict(false, "no feasible nlos_dominant trials".into());
    };
    let gap = full - los;
    verdict(
        gap >= 5.0,
        format!("nlos_dominant full-channel minus los-direction median gap {gap:.2} dB"),
    )
}

fn write_bytes(out: &MonteCarloOutput) -> Vec<(String, Vec<u8>)> {
    let dir = tempfile::tempdir().unwrap();
    let mut files: Vec<(String, Vec<u8>)> = write_outputs(dir.path(), out)
        .unwrap()
        .into_iter()
        .map(|p| {
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                std::fs::read(&p).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}

fn c8_determinism(run: &DeskRun) -> Verdict {
    let default_threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    let other = if default_threads == 1 { 3 } else { 1 };
    let again = match run_montecarlo(&run.cfg, Some(other)) {
        Ok(o) => o,
        Err(e) => return verdict(false, e.to_string()),
    };
    let a = write_bytes(&run.out);
    let b = write_bytes(&again);
    let differing: Vec<&str> = a
        .iter()
        .zip(&b)
        .filter(|(x, y)| x != y)
        .map(|(x, _)| x.0.as_str())
        .collect();
    verdict(
        a.len() == b.len() && differing.is_empty(),
        format!(
            "{} files compared between default and {other}-thread runs, differing: {differing:?}",
            a.len()
        ),
    )
}

fn c9_runtime(run: &DeskRun) -> Verdict {
    let secs = run.elapsed.as_secs_f64();
    verdict(
        secs < 600.0 && run.out.trials.len() == 2000,
        format!(
            "{} trials x 4 strategies in {secs:.1} s",
            run.out.trials.len()
        ),
    )
}

// C5 -----------------------------------------------------------------------

fn c5_null_depth() -> Verdict {
    // User broadside, sensing direction at 30°: the 16-element half-wave
    // responses are exactly orthogonal.
    let tx = ArrayGeometry::half_wave_ula_y(16);
    let (az_u, az_t) = (0.0, 30f64.to_radians());
    let h: CVector = array_response(&tx, az_u, 0.0)
        .iter()
        .map(|z| z.conj() * 1e-4)
        .collect();
    let inputs = DesignInputs {
        tx: &tx,
        h_u: &h,
        h_t: None,
        los: Some((az_t, 0.0)),
        fixed_reflector: None,
        partial_paths: None,
    };
    let params = DesignParams {
        gamma_u: 10.0,
        sigma_u2: 1e-8,
        power_budget: 1.0,
        sdp: SdpOptions::default(),
    };
    let sol = match design_beams(Strategy::LosDirection, &inputs, &params) {
        Ok(s) => s,
        Err(e) => return verdict(false, e.to_string()),
    };
    let grid = deg_grid_to_rad(&default_az_grid_deg());
    let Ok(pattern) = beam_pattern(&sol.f_t, &tx, &grid) else {
        return verdict(false, "sensing beam is zero".into());
    };
    let peak = pattern.iter().copied().fold(0.0, f64::max);
    let at_user = beam_pattern(&sol.f_t, &tx, &[az_u]).unwrap()[0];
    let depth = db(peak) - db(at_user.max(f64::MIN_POSITIVE));
    verdict(
        depth >= 30.0,
        format!("sensing beam at user azimuth is {depth:.1} dB below its peak"),
    )
}

// C6 -----------------------------------------------------------------------

fn random_plate(rng: &mut ChaCha8Rng) -> Facet {
    let center = Vec3::new(
        rng.random_range(5.0..25.0),
        rng.random_range(5.0..35.0),
        0.0,
    );
    let yaw: f64 = rng.random_range(0.0..PI);
    let half = rng.random_range(3.0..8.0);
    let u = Vec3::new(yaw.cos(), yaw.sin(), 0.0) * half;
    let up = Vec3::new(0.0, 0.0, 3.0);
    Facet::new(
        [center - u, center + u, center + u + up, center - u + up],
        "concrete",
    )
}

fn random_point(rng: &mut ChaCha8Rng) -> Vec3 {
    Vec3::new(
        rng.random_range(0.5..29.5),
        rng.random_range(0.5..39.5),
        rng.random_range(0.5..2.5),
    )
}

fn angle_between(a: Vec3, b: Vec3) -> f64 {
    a.cross(b).norm().atan2(a.dot(b))
}

/// Worst specular-law angle error and image-length error of one path.
fn reflection_errors(scene: &Scene, tx: Vec3, rx: Vec3, p: &PropagationPath) -> (f64, f64) {
    let mut points = vec![tx];
    points.extend(p.interactions.iter().map(|i| i.point));
    points.push(rx);
    let mut angle_err: f64 = 0.0;
    let mut image = tx;
    for (k, inter) in p.interactions.iter().enumerate() {
        if inter.kind != InteractionKind::Reflection {
            continue;
        }
        let facet = &scene.facets[inter.facet.expect("reflection facet")];
        let n = facet.normal().unwrap();
        let d_in = (points[k + 1] - points[k]).normalized().unwrap();
        let d_out = (points[k + 2] - points[k + 1]).normalized().unwrap();
        let mirrored = d_in - n * (2.0 * d_in.dot(n));
        angle_err = angle_err.max(angle_between(mirrored, d_out));
        image = mirror_point(image, facet);
    }
    (angle_err, (image.distance(rx) - p.total_length_m).abs())
}

fn c6_ray_geometry() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC6);
    let (mut singles, mut doubles) = (0usize, 0usize);
    let (mut worst_angle, mut worst_len): (f64, f64) = (0.0, 0.0);
    let mut scenes = 0;
    while (singles < 500 || doubles < 500) && scenes < 20_000 {
        scenes += 1;
        let mut scene = Scene::free_space();
        scene.facets = vec![random_plate(&mut rng), random_plate(&mut rng)];
        let (tx, rx) = (random_point(&mut rng), random_point(&mut rng));
        let Ok(paths) = trace_point_to_point(&scene, tx, rx, 2) else {
            continue;
        };
        for p in paths.iter().filter(|p| p.n_reflections() > 0) {
            match p.n_reflections() {
                1 if singles < 500 => singles += 1,
                2 if doubles < 500 => doubles += 1,
                _ => continue,
            }
            let (a, l) = reflection_errors(&scene, tx, rx, p);
            worst_angle = worst_angle.max(a);
            worst_len = worst_len.max(l);
        }
    }

    let free = Scene::free_space();
    let lambda = SPEED_OF_LIGHT / free.carrier_frequency_hz;
    let mut worst_friis: f64 = 0.0;
    for _ in 0..1000 {
        let (tx, rx) = (random_point(&mut rng), random_point(&mut rng));
        let paths = trace_point_to_point(&free, tx, rx, 2).unwrap();
        let expect = lambda / (4.0 * PI * tx.distance(rx));
        worst_friis = worst_friis.max((paths[0].complex_gain.norm() - expect).abs() / expect);
    }
    let elapsed = start.elapsed();
    verdict(
        singles + doubles == 1000
            && worst_angle <= 1e-9
            && worst_len <= 1e-9
            && worst_friis <= 1e-12
            && elapsed < Duration::from_secs(30),
        format!(
            "{singles} single + {doubles} double reflections: specular {worst_angle:.1e} rad, length {worst_len:.1e} m; Friis rel err {worst_friis:.1e}; {:.1} s",
            elapsed.as_secs_f64()
        ),
    )
}

// C7 -----------------------------------------------------------------------

fn c7_eig_residuals() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC7);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let g = CMatrix::from_fn(16, 16, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let a = g.hermitian_part();
        let e = herm_eig(&a).unwrap();
        let scale = a.frobenius_norm();
        for (lam, v) in e.eigenvalues.iter().zip(&e.eigenvectors) {
            let av = a.mul_vec(v);
            let r: f64 = av
                .iter()
                .zip(v)
                .map(|(x, y)| (x - y * lam).norm_sqr())
                .sum::<f64>()
                .sqrt();
            worst = worst.max(r / scale);
        }
        let rec = e.reconstruct();
        let diff: f64 = a
            .as_slice()
            .iter()
            .zip(rec.as_slice())
            .map(|(x, y)| (x - y).norm_sqr())
            .sum::<f64>()
            .sqrt();
        worst = worst.max(diff / scale);
    }
    verdict(
        worst <= 1e-10,
        format!("1000 random 16x16 matrices, worst relative residual {worst:.2e}"),
    )
}

// ---------------------------------------------------------------------------

fn guarded(f: impl FnOnce() -> Verdict) -> Verdict {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(v) => v,
        Err(e) => {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            verdict(false, format!("panicked: {msg}"))
        }
    }
}

fn main() -> ExitCode {
    let mut results: Vec<(&str, &str, Verdict)> = Vec::new();
    let mut report = |id, name, v: Verdict| {
        println!(
            "{id} {} {name}: {}",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail
        );
        results.push((id, name, v));
    };

    report("C1", "sdp-vs-oracle", guarded(c1_sdp_vs_oracle));
    match catch_unwind(desk_run) {
        Ok(Ok(run)) => {
            report(
                "C2",
                "feasibility-invariant",
                guarded(|| c2_feasibility(&run)),
            );
            report("C3", "strategy-ordering", guarded(|| c3_ordering(&run)));
            report("C4", "nlos-gap", guarded(|| c4_gap(&run)));
            report("C5", "null-depth", guarded(c5_null_depth));
            report("C6", "ray-geometry", guarded(c6_ray_geometry));
            report("C7", "eig-residuals", guarded(c7_eig_residuals));
            report("C8", "determinism", guarded(|| c8_determinism(&run)));
            report("C9", "desk-runtime", guarded(|| c9_runtime(&run)));
        }
        failure => {
            let msg = match failure {
                Ok(Err(e)) => e,
                _ => "desk run panicked".into(),
            };
            for (id, name) in [
                ("C2", "feasibility-invariant"),
                ("C3", "strategy-ordering"),
                ("C4", "nlos-gap"),
            ] {
                report(id, name, verdict(false, msg.clone()));
            }
            report("C5", "null-depth", guarded(c5_null_depth));
            report("C6", "ray-geometry", guarded(c6_ray_geometry));
            report("C7", "eig-residuals", guarded(c7_eig_residuals));
            for (id, name) in [("C8", "determinism"), ("C9", "desk-runtime")] {
                report(id, name, verdict(false, msg.clone()));
            }
        }
    }

    let failed = results.iter().filter(|r| !r.2.pass).count();
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

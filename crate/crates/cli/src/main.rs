//! `isac-twin` command-line front end.
//!
//! Exit codes: 0 success, 1 usage error, 2 runtime failure (including an
//! infeasible SINR target or an invalid scene).

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;

use isac_twin_core::beamforming::{
    beam_pattern, default_az_grid_deg, deg_grid_to_rad, design_beams, write_beam_pattern_csv,
    BeamSolution, BeamformingError, DesignInputs, DesignParams, Strategy,
};
use isac_twin_core::channel::evaluate_link;
use isac_twin_core::format::{db, sig9};
use isac_twin_core::raytracer::{write_paths_csv, RayTracer};
use isac_twin_core::scene::{load_scene_file, SceneError};
use isac_twin_core::sdp::SdpOptions;
use isac_twin_core::sim::{
    read_trials_csv, run_montecarlo, write_outputs, AreaLabel, CdfTable, ExperimentConfig,
    TargetSample, UserSample, DEFAULT_SIGMA_T2, DEFAULT_SIGMA_U2,
};
use isac_twin_core::{ArrayGeometry, ChannelSet, Scene, Vec3};

#[derive(Debug, Parser)]
#[command(
    name = "isac-twin",
    version,
    about = "Digital-twin assisted sensing and communication beamforming"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Check a scene file and list every violation.
    SceneValidate {
        #[arg(long)]
        scene: PathBuf,
    },
    /// Trace all paths between two points and print them as CSV.
    Trace {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long, value_parser = parse_point)]
        from: Vec3,
        #[arg(long, value_parser = parse_point)]
        to: Vec3,
        #[arg(long, default_value_t = 2)]
        max_reflections: usize,
    },
    /// Design beams for one UE and target and report predicted and achieved metrics.
    Solve(LinkArgs),
    /// Run a Monte Carlo experiment and write trials, CDFs and a summary.
    Montecarlo {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Worker threads; defaults to ISAC_TWIN_THREADS or all cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Write the azimuth beam pattern of a designed beam pair as CSV.
    Beampattern {
        #[command(flatten)]
        link: LinkArgs,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum, default_value_t = Beam::Total)]
        beam: Beam,
    },
    /// Rebuild the per-strategy CDF files from a trials.csv.
    Cdf {
        #[arg(long)]
        trials: PathBuf,
        /// Output folder; defaults to the folder holding the trials file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct LinkArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long, value_parser = parse_point)]
    target: Vec3,
    #[arg(long, value_parser = parse_strategy)]
    strategy: Strategy,
    #[arg(long, default_value_t = 10.0)]
    gamma_db: f64,
    /// UE position; defaults to the centre of the scene's UE region.
    #[arg(long, value_parser = parse_point)]
    ue: Option<Vec3>,
    #[arg(long, default_value_t = DEFAULT_SIGMA_U2)]
    sigma_u2: f64,
    #[arg(long, default_value_t = DEFAULT_SIGMA_T2)]
    sigma_t2: f64,
    #[arg(long, default_value_t = 1.0)]
    power: f64,
    #[arg(long, default_value_t = 0.785)]
    rcs: f64,
    #[arg(long, default_value_t = 2)]
    max_reflections: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Beam {
    /// Sum of the communication and sensing beam patterns.
    Total,
    Communication,
    Sensing,
}

fn parse_point(s: &str) -> Result<Vec3, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected x,y,z, got {s:?}"));
    }
    let mut v = [0.0f64; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|_| format!("not a number: {p:?}"))?;
        if !slot.is_finite() {
            return Err(format!("not finite: {p:?}"));
        }
    }
    Ok(Vec3::new(v[0], v[1], v[2]))
}

fn parse_strategy(s: &str) -> Result<Strategy, String> {
    s.parse()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::SceneValidate { scene } => scene_validate(&scene),
        Command::Trace {
            scene,
            from,
            to,
            max_reflections,
        } => {
            let scene = load_scene_file(&scene)?;
            let paths = RayTracer::new(&scene).trace_point_to_point(from, to, max_reflections)?;
            write_paths_csv(&paths, io::stdout().lock())?;
            Ok(())
        }
        Command::Solve(link) => solve(&link),
        Command::Montecarlo {
            config,
            out,
            threads,
        } => montecarlo(&config, &out, threads),
        Command::Beampattern { link, out, beam } => beampattern(&link, &out, beam),
        Command::Cdf { trials, out } => cdf(&trials, out.as_deref()),
    }
}

fn scene_validate(path: &Path) -> Result<()> {
    match load_scene_file(path) {
        Ok(scene) => {
            println!(
                "0 violations ({} facets, {} materials, carrier {} Hz)",
                scene.facets.len(),
                scene.materials.len(),
                scene.carrier_frequency_hz
            );
            Ok(())
        }
        Err(SceneError::Invalid(report)) => {
            println!("{} violations", report.violations.len());
            for v in &report.violations {
                println!("{}: {}", v.location, v.message);
            }
            bail!("scene has {} violation(s)", report.violations.len())
        }
        Err(e) => Err(e.into()),
    }
}

struct Designed {
    tx: ArrayGeometry,
    scene_ue: Vec3,
    target: TargetSample,
    cs: ChannelSet,
    sol: BeamSolution,
}

fn design(link: &LinkArgs) -> Result<Designed> {
    let scene: Scene = load_scene_file(&link.scene)?;
    let ue = link.ue.unwrap_or_else(|| scene.ue_region.center());
    let tracer = RayTracer::new(&scene);
    let tx = scene.bs.tx_array.geometry();
    let rx = scene.bs.rx_array.geometry();
    let user = UserSample::trace(&tracer, &tx, ue, link.max_reflections)?;
    let target = TargetSample::trace(
        &tracer,
        &tx,
        &rx,
        link.target,
        link.rcs,
        link.max_reflections,
    )?;
    let inputs = DesignInputs {
        tx: &tx,
        h_u: &user.h_u,
        h_t: Some(&target.h_t),
        los: Some(target.los),
        fixed_reflector: target.fixed_reflector,
        partial_paths: Some(&target.partial_paths),
    };
    let params = DesignParams {
        gamma_u: 10f64.powf(link.gamma_db / 10.0),
        sigma_u2: link.sigma_u2,
        power_budget: link.power,
        sdp: SdpOptions::default(),
    };
    let sol = match design_beams(link.strategy, &inputs, &params) {
        Ok(sol) => sol,
        Err(BeamformingError::Infeasible { certificate }) => bail!(
            "infeasible: the SINR target of {} dB needs {:.3}x the power budget",
            link.gamma_db,
            certificate
        ),
        Err(e) => return Err(e.into()),
    };
    let cs = ChannelSet {
        h_u: user.h_u,
        h_t: target.h_t.clone(),
    };
    Ok(Designed {
        tx,
        scene_ue: ue,
        target,
        cs,
        sol,
    })
}

fn fmt_vec(v: &[Complex64]) -> String {
    v.iter()
        .map(|c| {
            let sign = if c.im.is_sign_negative() { "" } else { "+" };
            format!("{}{sign}{}j", sig9(c.re), sig9(c.im))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn solve(link: &LinkArgs) -> Result<()> {
    let d = design(link)?;
    let m = evaluate_link(
        &d.sol.f_u,
        &d.sol.f_t,
        &d.cs,
        link.sigma_u2,
        link.sigma_t2,
        link.power,
    )?;
    let power: f64 = d
        .sol
        .f_u
        .iter()
        .chain(&d.sol.f_t)
        .map(|c| c.norm_sqr())
        .sum();
    let mut out = io::stdout().lock();
    writeln!(out, "strategy: {}", link.strategy)?;
    writeln!(
        out,
        "ue: {},{},{}",
        d.scene_ue.x, d.scene_ue.y, d.scene_ue.z
    )?;
    writeln!(out, "area: {}", d.target.area.as_str())?;
    writeln!(out, "status: {}", d.sol.status.as_str())?;
    if let Some((az, el)) = d.sol.direction {
        writeln!(
            out,
            "direction_deg: {} {}",
            sig9(az.to_degrees()),
            sig9(el.to_degrees())
        )?;
    }
    writeln!(out, "used_fallback: {}", d.sol.used_fallback)?;
    writeln!(out, "repaired: {}", d.sol.repaired)?;
    writeln!(out, "rank1_ratio_u: {}", sig9(d.sol.rank1_ratio_u))?;
    writeln!(out, "rank1_ratio_t: {}", sig9(d.sol.rank1_ratio_t))?;
    writeln!(
        out,
        "predicted_objective: {}",
        sig9(d.sol.predicted_objective)
    )?;
    writeln!(
        out,
        "predicted_snr_db: {}",
        sig9(db(d.sol.predicted_objective / link.sigma_t2))
    )?;
    writeln!(out, "achieved_sinr_db: {}", sig9(db(m.sinr_u)))?;
    writeln!(out, "achieved_snr_db: {}", sig9(db(m.snr_t)))?;
    writeln!(out, "power: {}", sig9(power))?;
    writeln!(out, "f_u: {}", fmt_vec(&d.sol.f_u))?;
    writeln!(out, "f_t: {}", fmt_vec(&d.sol.f_t))?;
    Ok(())
}

fn beampattern(link: &LinkArgs, out: &Path, beam: Beam) -> Result<()> {
    let d = design(link)?;
    let az_deg = default_az_grid_deg();
    let az = deg_grid_to_rad(&az_deg);
    let pattern = |f: &[Complex64]| -> Result<Vec<f64>> {
        if f.iter().all(|c| c.norm_sqr() == 0.0) {
            Ok(vec![0.0; az.len()])
        } else {
            Ok(beam_pattern(f, &d.tx, &az)?)
        }
    };
    let gains = match beam {
        Beam::Communication => pattern(&d.sol.f_u)?,
        Beam::Sensing => pattern(&d.sol.f_t)?,
        Beam::Total => {
            let u = pattern(&d.sol.f_u)?;
            let t = pattern(&d.sol.f_t)?;
            u.iter().zip(&t).map(|(a, b)| a + b).collect()
        }
    };
    let mut buf = Vec::new();
    write_beam_pattern_csv(&az_deg, &gains, &mut buf)?;
    fs::write(out, buf).with_context(|| format!("cannot write {}", out.display()))?;
    println!("wrote {}", out.display());
    Ok(())
}

fn montecarlo(config: &Path, out: &Path, threads: Option<usize>) -> Result<()> {
    if threads == Some(0) {
        bail!("--threads must be at least 1");
    }
    let cfg = ExperimentConfig::load(config)?;
    let result = run_montecarlo(&cfg, threads)?;
    write_outputs(out, &result)?;
    let s = &result.summary;
    println!(
        "trials: {} (los_dominant {}, nlos_dominant {}, infeasible {})",
        s.n_trials, s.n_los_dominant, s.n_nlos_dominant, s.n_infeasible
    );
    println!("median sensing SNR [dB]:");
    println!(
        "{:<20} {:>14} {:>14}",
        "strategy", "los_dominant", "nlos_dominant"
    );
    for k in Strategy::ALL {
        let cell = |a| {
            s.median(k, a)
                .map_or_else(|| "n/a".to_string(), |v| format!("{v:.2}"))
        };
        println!(
            "{:<20} {:>14} {:>14}",
            k.name(),
            cell(AreaLabel::LosDominant),
            cell(AreaLabel::NlosDominant)
        );
    }
    println!("outputs in {}", out.display());
    Ok(())
}

fn cdf(trials: &Path, out: Option<&Path>) -> Result<()> {
    let text =
        fs::read_to_string(trials).with_context(|| format!("cannot read {}", trials.display()))?;
    let table = read_trials_csv(&text)?;
    let dir = match out {
        Some(d) => d.to_path_buf(),
        None => trials.parent().map(Path::to_path_buf).unwrap_or_default(),
    };
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;
    for p in CdfTable::from_table(&table).write_all(&dir)? {
        println!("{}", p.display());
    }
    Ok(())
}

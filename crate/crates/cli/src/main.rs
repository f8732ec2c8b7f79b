//! Command-line front end: deterministic scenario runs with CSV output,
//! tension-distribution queries and kinematics helpers.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hcdpr::dynamics::Wrench;
use hcdpr::kinematics::{
    cable_geometry, forward_kinematics, inverse_arm, inverse_platform, Elbow, GeneralizedState,
    PlatformBranch, Vec5,
};
use hcdpr::params::{self, RobotParams, ScenarioOverrides};
use hcdpr::sim::{self, builtin_scenarios, fmt_f64, run_scenario, summarize, ScenarioSpec};
use hcdpr::tension::{self, static_wrench, stiffness_matrices, unstretched_for_tension};
use hcdpr::Error;

#[derive(Parser)]
#[command(
    name = "hcdpr",
    version,
    about = "Planar cable-driven platform with onboard arm: simulation and analysis"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Parameter/scenario config file (JSON; omitted fields use defaults).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Machine-readable JSON output.
    #[arg(long, global = true, default_value_t = false)]
    json: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario (built-in name or a spec file) and write its time series.
    Run {
        /// Scenario name or path to a scenario JSON file.
        scenario: String,
        /// Output directory for the CSV and manifest.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the integration step [s].
        #[arg(long)]
        dt: Option<f64>,
        /// Override the run length [s].
        #[arg(long)]
        duration: Option<f64>,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Solve the stiffness-maximizing tension distribution at a pose.
    TensionQuery {
        #[arg(long, default_value_t = 0.0)]
        x_m: f64,
        #[arg(long, default_value_t = 0.0)]
        z_m: f64,
        #[arg(long, default_value_t = 0.0)]
        theta_m: f64,
        #[arg(long, default_value_t = 0.0)]
        theta_1: f64,
        #[arg(long, default_value_t = 0.0)]
        theta_2: f64,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Forward kinematics of a joint vector.
    Fk {
        /// Comma-separated `x_m,z_m,theta_m,theta_1,theta_2`.
        #[arg(long, allow_hyphen_values = true)]
        q: String,
        #[command(flatten)]
        common: CommonOpts,
    },
    /// Inverse kinematics toward a tip target; prints both elbow branches.
    Ik {
        #[arg(long, allow_hyphen_values = true)]
        x_e: f64,
        #[arg(long, allow_hyphen_values = true)]
        z_e: f64,
        /// Platform pose given directly...
        #[arg(long, allow_hyphen_values = true)]
        x_m: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        z_m: Option<f64>,
        #[arg(long, allow_hyphen_values = true, default_value_t = 0.0)]
        theta_m: f64,
        /// ...or recovered from the outer top cable lengths.
        #[arg(long)]
        l1: Option<f64>,
        #[arg(long)]
        l6: Option<f64>,
        /// Vertical branch when solving the platform from cable lengths.
        #[arg(long, default_value = "lower")]
        branch: String,
        #[command(flatten)]
        common: CommonOpts,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if let Error::InfeasibleTension { intervals, .. } = &e {
                eprintln!("per-cable feasible intervals for the free coefficient:");
                for (i, (lo, hi)) in intervals.iter().enumerate() {
                    eprintln!("  cable {i}: [{lo:.6}, {hi:.6}]");
                }
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn load_params(common: &CommonOpts) -> Result<(RobotParams, ScenarioOverrides), Error> {
    match &common.config {
        None => Ok((RobotParams::default(), ScenarioOverrides::default())),
        Some(path) => {
            let text = fs::read_to_string(path)?;
            let p = params::parse_config(&text).map_err(|e| match e {
                Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
                other => other,
            })?;
            let overrides = params::parse_scenario_overrides(&text)?;
            Ok((p, overrides))
        }
    }
}

fn dispatch(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            dt,
            duration,
            common,
        } => cmd_run(&scenario, &out, dt, duration, &common),
        Command::TensionQuery {
            x_m,
            z_m,
            theta_m,
            theta_1,
            theta_2,
            common,
        } => cmd_tension_query([x_m, z_m, theta_m, theta_1, theta_2], &common),
        Command::Fk { q, common } => cmd_fk(&q, &common),
        Command::Ik {
            x_e,
            z_e,
            x_m,
            z_m,
            theta_m,
            l1,
            l6,
            branch,
            common,
        } => cmd_ik(x_e, z_e, x_m, z_m, theta_m, l1, l6, &branch, &common),
    }
}

#[derive(Serialize)]
struct RunManifest<'a> {
    scenario: &'a str,
    config: Option<String>,
    out_dir: String,
    dt: f64,
    duration: f64,
    deterministic: bool,
    version: &'static str,
    spec: &'a ScenarioSpec,
}

fn resolve_scenario(name_or_path: &str) -> Result<ScenarioSpec, Error> {
    let catalog = builtin_scenarios();
    if let Some(spec) = catalog.get(name_or_path) {
        return Ok(spec.clone());
    }
    let path = Path::new(name_or_path);
    if path.exists() {
        let text = fs::read_to_string(path)?;
        return serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())));
    }
    let names: Vec<&str> = catalog.keys().map(String::as_str).collect();
    Err(Error::Config(format!(
        "unknown scenario `{name_or_path}`; built-in scenarios: {}",
        names.join(", ")
    )))
}

fn cmd_run(
    scenario: &str,
    out: &Path,
    dt: Option<f64>,
    duration: Option<f64>,
    common: &CommonOpts,
) -> Result<ExitCode, Error> {
    let (params, overrides) = load_params(common)?;
    let mut spec = resolve_scenario(scenario)?;
    if let Some(v) = overrides.dt {
        spec.dt = v;
    }
    if let Some(v) = overrides.duration {
        spec.duration = v;
    }
    if let Some(v) = dt {
        spec.dt = v;
    }
    if let Some(v) = duration {
        spec.duration = v;
    }
    spec.validate()?;

    fs::create_dir_all(out)?;
    let csv_path = out.join(format!("{}_timeseries.csv", spec.name));
    let manifest_path = out.join(format!("{}_manifest.json", spec.name));

    let run = run_scenario(&spec, &params);
    let file = fs::File::create(&csv_path)?;
    sim::write_timeseries(std::io::BufWriter::new(file), &run.records)?;
    let manifest = RunManifest {
        scenario: &spec.name,
        config: common.config.as_ref().map(|p| p.display().to_string()),
        out_dir: out.display().to_string(),
        dt: spec.dt,
        duration: spec.duration,
        deterministic: true,
        version: env!("CARGO_PKG_VERSION"),
        spec: &spec,
    };
    fs::write(
        &manifest_path,
        serde_json::to_string_pretty(&manifest).expect("manifest serialize"),
    )?;

    if !run.records.is_empty() {
        let summary = summarize(&run.records);
        println!(
            "scenario: {} (records={}, dt={} s, duration={} s)",
            spec.name,
            run.records.len(),
            spec.dt,
            spec.duration
        );
        match summary.settling_time {
            Some(t) => println!("settling_time_s: {t:.4}"),
            None => println!("settling_time_s: none"),
        }
        println!(
            "peak_error: [{}]",
            summary
                .peak_error
                .iter()
                .map(|v| format!("{v:.6e}"))
                .collect::<Vec<_>>()
                .join(", ")
        );
        println!(
            "final_tensions_N: [{}]",
            summary
                .final_tensions
                .iter()
                .map(|v| format!("{v:.3}"))
                .collect::<Vec<_>>()
                .join(", ")
        );
        println!(
            "oscillation: {}",
            if summary.sustained_oscillation {
                "sustained"
            } else {
                "damped"
            }
        );
    }
    println!("wrote: {}", csv_path.display());
    println!("wrote: {}", manifest_path.display());

    match run.failure {
        None => Ok(ExitCode::SUCCESS),
        Some(e) => {
            eprintln!("error: {e} (partial records retained)");
            Ok(ExitCode::from(e.exit_code() as u8))
        }
    }
}

fn cmd_tension_query(pose: [f64; 5], common: &CommonOpts) -> Result<ExitCode, Error> {
    let (params, _) = load_params(common)?;
    let q = Vec5::from_column_slice(&pose);
    let geometry = cable_geometry(&q, &params)?;
    let w_m = static_wrench(&q, &params, &Wrench::ZERO);
    let solution = tension::distribute(&geometry, &w_m, &params)?;
    let mut l0 = geometry.lengths;
    for i in [0usize, 1, 4, 5] {
        l0[i] = unstretched_for_tension(geometry.lengths[i], solution.t[i], &params);
    }
    let stiffness = stiffness_matrices(&geometry, &solution.t, &params, &l0)?;

    let a_rows: Vec<Vec<f64>> = (0..3)
        .map(|r| (0..6).map(|c| geometry.structure_matrix[(r, c)]).collect())
        .collect();
    let k_rows: Vec<Vec<f64>> = (0..6)
        .map(|r| (0..6).map(|c| stiffness.k[(r, c)]).collect())
        .collect();

    if common.json {
        let doc = serde_json::json!({
            "A": a_rows,
            "W_m": [w_m.x, w_m.y, w_m.z],
            "lambda3": solution.lambda.z,
            "T": solution.t.as_slice(),
            "K": k_rows,
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
        return Ok(ExitCode::SUCCESS);
    }

    println!("pose: q = {:?}", pose);
    println!("A (rows F_x, F_z, M):");
    for row in &a_rows {
        println!(
            "  [{}]",
            row.iter()
                .map(|v| format!("{v:10.6}"))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    println!(
        "W_m = [{:.6}, {:.6}, {:.6}]  (N, N, N*m)",
        w_m.x, w_m.y, w_m.z
    );
    println!("lambda3 = {:.6}", solution.lambda.z);
    println!(
        "T = [{}] N",
        solution
            .t
            .iter()
            .map(|v| format!("{v:.4}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    println!("K (translation x,y,z then rotation rx,ry,rz):");
    for row in &k_rows {
        println!(
            "  [{}]",
            row.iter()
                .map(|v| format!("{v:12.4}"))
                .collect::<Vec<_>>()
                .join(", ")
        );
    }
    Ok(ExitCode::SUCCESS)
}

fn parse_q(text: &str) -> Result<Vec5, Error> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 5 {
        return Err(Error::Config(format!(
            "--q expects 5 comma-separated values, got {}",
            parts.len()
        )));
    }
    let mut q = Vec5::zeros();
    for (i, part) in parts.iter().enumerate() {
        q[i] = part
            .trim()
            .parse()
            .map_err(|e| Error::Config(format!("--q component {i}: {e}")))?;
    }
    Ok(q)
}

fn cmd_fk(q_text: &str, common: &CommonOpts) -> Result<ExitCode, Error> {
    let (params, _) = load_params(common)?;
    let q = parse_q(q_text)?;
    let state = GeneralizedState::from_position(q);
    let (pose, links) = forward_kinematics(&state, &params);
    let geometry = cable_geometry(&q, &params)?;

    if common.json {
        let doc = serde_json::json!({
            "x_e": pose.x_e,
            "z_e": pose.z_e,
            "q_e": pose.q_e,
            "p1": [links.p1.x, links.p1.y],
            "p2": [links.p2.x, links.p2.y],
            "L": geometry.lengths.as_slice(),
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
        return Ok(ExitCode::SUCCESS);
    }
    println!("x_e = {}", fmt_f64(pose.x_e));
    println!("z_e = {}", fmt_f64(pose.z_e));
    println!("q_e = {}", fmt_f64(pose.q_e));
    println!(
        "L = [{}] m",
        geometry
            .lengths
            .iter()
            .map(|v| format!("{v:.9}"))
            .collect::<Vec<_>>()
            .join(", ")
    );
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_ik(
    x_e: f64,
    z_e: f64,
    x_m: Option<f64>,
    z_m: Option<f64>,
    theta_m: f64,
    l1: Option<f64>,
    l6: Option<f64>,
    branch: &str,
    common: &CommonOpts,
) -> Result<ExitCode, Error> {
    let (params, _) = load_params(common)?;
    let platform = match (l1, l6) {
        (Some(l1), Some(l6)) => {
            let branch = match branch {
                "lower" => PlatformBranch::Lower,
                "upper" => PlatformBranch::Upper,
                other => {
                    return Err(Error::Config(format!(
                        "--branch must be `lower` or `upper`, got `{other}`"
                    )))
                }
            };
            inverse_platform(l1, l6, &params, branch)?
        }
        (None, None) => (x_m.unwrap_or(0.0), z_m.unwrap_or(0.0), theta_m),
        _ => {
            return Err(Error::Config(
                "--l1 and --l6 must be given together".to_string(),
            ))
        }
    };

    let plus = inverse_arm((x_e, z_e), platform, &params, Elbow::Plus)?;
    let minus = inverse_arm((x_e, z_e), platform, &params, Elbow::Minus)?;

    if common.json {
        let doc = serde_json::json!({
            "platform": [platform.0, platform.1, platform.2],
            "elbow_plus": { "theta_1": plus.0, "theta_2": plus.1 },
            "elbow_minus": { "theta_1": minus.0, "theta_2": minus.1 },
        });
        println!("{}", serde_json::to_string_pretty(&doc).expect("json"));
        return Ok(ExitCode::SUCCESS);
    }
    println!(
        "platform: x_m = {}, z_m = {}, theta_m = {}",
        fmt_f64(platform.0),
        fmt_f64(platform.1),
        fmt_f64(platform.2)
    );
    println!(
        "elbow_plus:  theta_1 = {}, theta_2 = {}",
        fmt_f64(plus.0),
        fmt_f64(plus.1)
    );
    println!(
        "elbow_minus: theta_1 = {}, theta_2 = {}",
        fmt_f64(minus.0),
        fmt_f64(minus.1)
    );
    Ok(ExitCode::SUCCESS)
}

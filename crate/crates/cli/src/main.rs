use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use dexfinger::config::{parse_angle, resolve_params, to_toml};
use dexfinger::contact::RigidObject;
use dexfinger::drive::{drive_to_mcp, rigid_coupled_flexion, CouplingModel};
use dexfinger::format::{round_sig9, sig9};
use dexfinger::grasp::{envelop_sweep, DriveSchedule, EquilibriumTrace, SolveStatus, Termination};
use dexfinger::hand::{hand_fk, resolve_layout, HandLayout};
use dexfinger::ucm::{
    constraint_rank, is_stable, motion_subspaces, stiffness_matrices, transmission_jacobians,
};
use dexfinger::workspace::{
    project_workspace, sample_workspace_parallel, write_cloud_csv, write_projection_csv, Plane,
    SamplingMode,
};
use dexfinger::{DriveState, FingerParams, JointState};
use nalgebra::Point3;
use serde_json::{json, Value};

mod manifest;

use manifest::RunManifest;

#[derive(Parser)]
#[command(
    name = "dexfinger",
    version,
    about = "Modular dexterous finger toolkit"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Map the two motor angles through the differential and the coupling.
    DriveMap(DriveMapArgs),
    /// Monte Carlo fingertip workspace.
    Workspace(WorkspaceArgs),
    /// Transmission structure, stiffness and motion subspaces.
    UcmReport(UcmReportArgs),
    /// Quasi-static enveloping sweep against a sphere.
    Envelop(EnvelopArgs),
    /// Forward kinematics of the five-finger hand.
    HandFk(HandFkArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Args)]
struct DriveMapArgs {
    /// Motor 1 angle (radians, or with a `deg` suffix).
    #[arg(long, allow_hyphen_values = true, value_parser = parse_angle)]
    a1: f64,
    #[arg(long, allow_hyphen_values = true, value_parser = parse_angle)]
    a2: f64,
    /// Preset name or config file.
    #[arg(long, default_value = "default")]
    config: String,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct WorkspaceArgs {
    #[arg(long)]
    n: usize,
    /// Defaults to `UCM_SEED`, else 0.
    #[arg(long)]
    seed: Option<u64>,
    /// Keep q2 and q3 on the rigid coupling line.
    #[arg(long)]
    coupled: bool,
    #[arg(long)]
    project: Option<Plane>,
    #[arg(long, default_value = "default")]
    config: String,
    /// Sampling threads; the output does not depend on it.
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct UcmReportArgs {
    #[arg(long, default_value = "default")]
    config: String,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EnvelopArgs {
    #[arg(long, default_value = "grasp")]
    config: String,
    /// Sphere diameter (mm).
    #[arg(long)]
    sphere_d: f64,
    /// Sphere centre `x,y,z` in the finger base frame (mm).
    #[arg(long, allow_hyphen_values = true)]
    center: String,
    /// Final drive value, in the units of the serial transmission variable.
    #[arg(long)]
    a_max: f64,
    #[arg(long)]
    steps: usize,
    /// Remove the object from this step index on.
    #[arg(long)]
    release_at: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct HandFkArgs {
    /// `default` or a layout file.
    #[arg(long, default_value = "default")]
    layout: String,
    /// One `q_aa,q1,q2,q3` per finger in layout order (radians or `deg`).
    #[arg(long = "q", allow_hyphen_values = true)]
    q: Vec<String>,
    #[arg(long, value_enum, default_value = "text")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Usage(String),
    Solver(String),
}

impl From<dexfinger::Error> for Failure {
    fn from(e: dexfinger::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Usage(e.to_string())
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let result = match cli.command {
        Command::DriveMap(a) => drive_map(a, &argv),
        Command::Workspace(a) => workspace(a, &argv),
        Command::UcmReport(a) => ucm_report(a, &argv),
        Command::Envelop(a) => envelop(a, &argv),
        Command::HandFk(a) => hand(a, &argv),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Solver(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn default_seed() -> Result<u64, Failure> {
    match std::env::var("UCM_SEED") {
        Ok(s) => s.trim().parse().map_err(|_| {
            Failure::Usage(format!("UCM_SEED must be an unsigned integer, got {s:?}"))
        }),
        Err(_) => Ok(0),
    }
}

fn num(x: f64) -> Value {
    if x.is_finite() {
        json!(round_sig9(x))
    } else {
        Value::Null
    }
}

fn nums<'a>(xs: impl IntoIterator<Item = &'a f64>) -> Value {
    Value::Array(xs.into_iter().map(|x| num(*x)).collect())
}

fn point(p: &Point3<f64>) -> Value {
    nums(p.coords.iter())
}

fn list<'a>(xs: impl IntoIterator<Item = &'a f64>) -> String {
    let items: Vec<String> = xs.into_iter().map(|x| sig9(*x)).collect();
    format!("[{}]", items.join(", "))
}

/// Write `text` to `out`, or stdout without one, plus the manifest.
fn emit(text: &str, out: Option<&Path>, manifest: RunManifest) -> Outcome {
    match out {
        Some(path) => {
            std::fs::write(path, text)?;
            manifest.with_output(path).write_beside(path)?;
        }
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}

fn params_digest(params: &FingerParams) -> String {
    manifest::sha256_hex(to_toml(params).as_bytes())
}

fn drive_map(args: DriveMapArgs, argv: &[String]) -> Outcome {
    let params = resolve_params(&args.config)?;
    let (theta, mcp) = drive_to_mcp(
        DriveState {
            a1: args.a1,
            a2: args.a2,
        },
        &params.differential,
    );
    let (q2, q3) = rigid_coupled_flexion(mcp.q_fe, &CouplingModel::default())?;
    let rows = [
        ("theta1", theta.theta1),
        ("theta2", theta.theta2),
        ("q_aa", mcp.q_aa),
        ("q_fe", mcp.q_fe),
        ("q1", mcp.q_fe),
        ("q2", q2),
        ("q3", q3),
    ];
    let text = match args.format {
        Format::Text => rows
            .iter()
            .map(|(k, v)| format!("{k:<8}{}\n", sig9(*v)))
            .collect(),
        Format::Json => {
            let record = json!({
                "theta": nums(&[theta.theta1, theta.theta2]),
                "q_aa": num(mcp.q_aa),
                "q_fe": num(mcp.q_fe),
                "q_coupled": nums(&[mcp.q_fe, q2, q3]),
            });
            format!("{record}\n")
        }
    };
    let m = RunManifest::new("drive-map", params_digest(&params), None, argv);
    emit(&text, args.out.as_deref(), m)
}

fn workspace(args: WorkspaceArgs, argv: &[String]) -> Outcome {
    if args.n == 0 {
        return Err(Failure::Usage("`--n` must be at least 1".into()));
    }
    let seed = match args.seed {
        Some(s) => s,
        None => default_seed()?,
    };
    let params = resolve_params(&args.config)?;
    let mode = if args.coupled {
        SamplingMode::Coupled
    } else {
        SamplingMode::Full
    };
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let cloud = sample_workspace_parallel(&params, args.n, seed, mode, workers)?;
    let mut buf = Vec::new();
    match args.project {
        Some(plane) => write_projection_csv(&mut buf, &project_workspace(&cloud, plane)?)?,
        None => write_cloud_csv(&mut buf, &cloud.points)?,
    }
    std::fs::write(&args.out, &buf)?;
    RunManifest::new("workspace", params_digest(&params), Some(seed), argv)
        .with_output(&args.out)
        .write_beside(&args.out)?;
    Ok(())
}

fn ucm_report(args: UcmReportArgs, argv: &[String]) -> Outcome {
    let params = resolve_params(&args.config)?;
    let j = transmission_jacobians(&params);
    let stiff = stiffness_matrices(&params)?;
    let sub = motion_subspaces(&params)?;
    let rank = constraint_rank(&params);
    let j_p: Vec<[f64; 3]> = (0..3)
        .map(|r| [j.j_p[(r, 0)], j.j_p[(r, 1)], j.j_p[(r, 2)]])
        .collect();
    let text = match args.format {
        Format::Text => {
            let mut s = String::new();
            s += &format!("J_s1          {}\n", list(j.j_s1.iter()));
            s += &format!("J_s2          {}\n", sig9(j.j_s2));
            for (r, row) in j_p.iter().enumerate() {
                s += &format!("J_p row {}     {}\n", r + 1, list(row.iter()));
            }
            s += &format!("rank          {rank}\n");
            s += &format!("stable        {}\n", is_stable(&params));
            s += &format!("PD            {}\n", stiff.positive_definite);
            s += &format!("min_eig_K_q   {}\n", sig9(stiff.min_eigenvalue));
            s += &format!("dq_A          {}\n", list(sub.dq_active.iter()));
            s += &format!("PMS normal    {}\n", list(sub.pms_normal.iter()));
            for (i, b) in sub.pms_basis.iter().enumerate() {
                s += &format!("PMS basis {}   {}\n", i + 1, list(b.iter()));
            }
            s += &format!("tau_A         {}\n", list(sub.tau_a.iter()));
            s
        }
        Format::Json => {
            let record = json!({
                "j_s1": nums(j.j_s1.iter()),
                "j_s2": num(j.j_s2),
                "j_p": j_p.iter().map(|r| nums(r.iter())).collect::<Vec<_>>(),
                "rank": rank,
                "stable": is_stable(&params),
                "pd": stiff.positive_definite,
                "min_eig_k_q": num(stiff.min_eigenvalue),
                "dq_active": nums(sub.dq_active.iter()),
                "pms_normal": nums(sub.pms_normal.iter()),
                "pms_basis": sub.pms_basis.iter().map(|b| nums(b.iter())).collect::<Vec<_>>(),
                "tau_a": nums(sub.tau_a.iter()),
            });
            format!("{record}\n")
        }
    };
    let m = RunManifest::new("ucm-report", params_digest(&params), None, argv);
    emit(&text, args.out.as_deref(), m)
}

fn parse_triple(s: &str, flag: &str) -> Result<[f64; 3], Failure> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    let bad = || Failure::Usage(format!("`{flag}` expects x,y,z, got {s:?}"));
    if parts.len() != 3 {
        return Err(bad());
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|_| bad())?;
    }
    Ok(v)
}

fn trace_lines(trace: &EquilibriumTrace) -> String {
    let mut s = String::new();
    for st in &trace.steps {
        let e = &st.equilibrium;
        let contacts: Vec<Value> = e
            .contacts
            .iter()
            .map(|c| {
                json!({
                    "phalanx": c.phalanx,
                    "point_mm": point(&c.point),
                    "normal": nums(c.normal.iter()),
                    "gap_mm": num(c.gap),
                    "force_n": num(c.force),
                })
            })
            .collect();
        let mut forces = [0.0; 3];
        for c in &e.contacts {
            forces[c.phalanx - 1] = c.force;
        }
        let record = json!({
            "step": st.step,
            "a": num(e.a),
            "object_present": st.object_present,
            "q_deg": nums(e.q.as_array().map(f64::to_degrees).iter()),
            "contacts": contacts,
            "forces_n": nums(forces.iter()),
            "energy": num(e.energy),
            "status": match e.status {
                SolveStatus::Converged => "converged",
                SolveStatus::NonConverged => "non-converged",
            },
            "iterations": e.iterations,
        });
        s += &format!("{record}\n");
    }
    s
}

fn envelop(args: EnvelopArgs, argv: &[String]) -> Outcome {
    let params = resolve_params(&args.config)?;
    let [x, y, z] = parse_triple(&args.center, "--center")?;
    if !(args.sphere_d.is_finite() && args.sphere_d > 0.0) {
        return Err(Failure::Usage(format!(
            "`--sphere-d` must be > 0, got {}",
            args.sphere_d
        )));
    }
    if args.steps == 0 {
        return Err(Failure::Usage("`--steps` must be at least 1".into()));
    }
    if !(args.a_max.is_finite() && args.a_max > 0.0) {
        return Err(Failure::Usage(format!(
            "`--a-max` must be > 0, got {}",
            args.a_max
        )));
    }
    let sphere = RigidObject::sphere(Point3::new(x, y, z), args.sphere_d / 2.0)?;
    let mut schedule = DriveSchedule::linear(args.a_max, args.steps);
    if let Some(r) = args.release_at {
        schedule = schedule.with_release(r);
    }
    let manifest =
        RunManifest::new("envelop", params_digest(&params), None, argv).with_output(&args.out);
    let (text, termination, failure) =
        match envelop_sweep(&schedule, &params, &sphere, &Default::default()) {
            Ok(trace) => (trace_lines(&trace), trace.termination, None),
            Err(e) => {
                let record =
                    json!({ "step": 0, "status": "infeasible-start", "message": e.to_string() });
                (
                    format!("{record}\n"),
                    Termination::NonConverged,
                    Some(e.to_string()),
                )
            }
        };
    let summary = json!({ "termination": termination.as_str(), "steps": text.lines().count() });
    std::fs::write(&args.out, format!("{text}{summary}\n"))?;
    manifest.write_beside(&args.out)?;
    println!("termination {}", termination.as_str());
    match (termination, failure) {
        (_, Some(msg)) => Err(Failure::Solver(msg)),
        (Termination::NonConverged, None) => {
            Err(Failure::Solver("equilibrium did not converge".into()))
        }
        _ => Ok(()),
    }
}

fn parse_state(s: &str) -> Result<JointState, Failure> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 4 {
        return Err(Failure::Usage(format!(
            "`--q` expects q_aa,q1,q2,q3, got {s:?}"
        )));
    }
    let mut v = [0.0; 4];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = parse_angle(p).map_err(|e| Failure::Usage(format!("`--q`: {e}")))?;
    }
    Ok(JointState::new(v[0], v[1], v[2], v[3]))
}

fn layout_digest(layout: &HandLayout) -> String {
    let mut canonical = String::new();
    for f in &layout.fingers {
        canonical += &format!(
            "{}|{}|{:?}|{:?}|{:?}\n{}\n",
            f.name,
            f.kind.as_str(),
            f.base.translation.vector.as_slice(),
            f.base.rotation.coords.as_slice(),
            f.aa_spring,
            to_toml(&f.params)
        );
    }
    manifest::sha256_hex(canonical.as_bytes())
}

fn hand(args: HandFkArgs, argv: &[String]) -> Outcome {
    let layout = resolve_layout(&args.layout)?;
    let states = if args.q.is_empty() {
        vec![JointState::default(); layout.fingers.len()]
    } else {
        args.q
            .iter()
            .map(|s| parse_state(s))
            .collect::<Result<Vec<_>, _>>()?
    };
    let chains = hand_fk(&states, &layout)?;
    let text = match args.format {
        Format::Text => {
            let mut s = String::new();
            for (f, c) in layout.fingers.iter().zip(&chains) {
                s += &format!(
                    "{:<8}{:<22}tip {}\n",
                    f.name,
                    f.kind.as_str(),
                    list(c.fingertip().coords.iter())
                );
            }
            s
        }
        Format::Json => {
            let fingers: Vec<Value> = layout
                .fingers
                .iter()
                .zip(&chains)
                .map(|(f, c)| {
                    json!({
                        "name": f.name,
                        "kind": f.kind.as_str(),
                        "joints_mm": c.joint_points().iter().map(point).collect::<Vec<_>>(),
                        "fingertip_mm": point(&c.fingertip()),
                    })
                })
                .collect();
            format!("{}\n", json!({ "fingers": fingers }))
        }
    };
    let m = RunManifest::new("hand-fk", layout_digest(&layout), None, argv);
    emit(&text, args.out.as_deref(), m)
}

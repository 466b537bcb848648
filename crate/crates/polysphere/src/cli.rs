//! Command-line surface of the crate.
//!
//! Balls are named corpus members (square, diamond, hexagon, cube3, oct3)
//! or paths to ball JSON files; maps are always files. Exit codes follow
//! one contract everywhere: 0 means every check passed, 1 means a verified
//! property failed, 2 means the input could not be used at all.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num::Zero;
use serde_json::json;

use crate::ball::PolyBall;
use crate::corpus;
use crate::differential::LimitSchedule;
use crate::error::{Error, Result};
use crate::extension::{extend, ExtendOutcome};
use crate::formats;
use crate::iso::{enumerate_isometries, invariant_fingerprint};
use crate::linalg::{format_rational, parse_rational, Matrix, Vector};
use crate::maps::{sample_sphere_points, SphereMap};
use crate::verify::{run_verification, VerifyConfig};

#[derive(Parser)]
#[command(
    name = "polysphere",
    version,
    about = "Exact geometry of polyhedral normed spaces and extension of sphere isometries",
    after_help = "BALL arguments accept corpus names (square/sq2, diamond/di2, \
hexagon/hex, cube3, oct3/octahedron3) or paths to ball JSON files."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Inspect a ball: dimensions, faces, polar dual
    Ball {
        #[command(subcommand)]
        cmd: BallCmd,
    },
    /// Check residuals of a sphere map or extend it to a linear map
    Map {
        #[command(subcommand)]
        cmd: MapCmd,
    },
    /// Enumerate linear isometries between two balls
    Search {
        #[command(subcommand)]
        cmd: SearchCmd,
    },
    /// Run the full verification suite on a map
    Verify {
        #[command(subcommand)]
        cmd: VerifyCmd,
    },
}

#[derive(Subcommand)]
enum BallCmd {
    /// Print dimension, vertices, facets, and the face census
    Info {
        ball: String,
        #[arg(long)]
        json: bool,
    },
    /// Compute the polar dual ball
    Dual {
        ball: String,
        #[arg(long)]
        json: bool,
        /// Write the dual as a ball file instead of printing it
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum MapCmd {
    /// Evaluate antipodality, sphere, and isometry residuals on samples
    Check {
        source: String,
        target: String,
        map: PathBuf,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long)]
        json: bool,
    },
    /// Recover the per-facet matrices and stitch them into one linear map
    Extend {
        source: String,
        target: String,
        map: PathBuf,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum SearchCmd {
    /// List all linear isometries from one ball onto another
    Iso {
        source: String,
        target: String,
        /// Stop after this many isometries
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum VerifyCmd {
    /// Verify every differential and extension property of a map
    Lemmas(VerifyArgs),
}

#[derive(Args)]
struct VerifyArgs {
    source: String,
    target: String,
    map: PathBuf,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Seeded configurations per sampled property
    #[arg(long, default_value_t = 100)]
    instances: usize,
    /// Dyadic step depth of the limit schedule
    #[arg(long)]
    schedule_depth: Option<usize>,
    /// Stabilization tolerance of the limit schedule, as a rational
    #[arg(long)]
    tol: Option<String>,
    /// Write the verification report JSON here
    #[arg(long)]
    report: Option<PathBuf>,
    /// Print the report JSON instead of the table
    #[arg(long)]
    json: bool,
}

/// Resolves a ball argument: corpus name first, file path otherwise.
fn resolve_ball(spec: &str) -> Result<(String, PolyBall)> {
    let named = match spec.to_ascii_lowercase().as_str() {
        "square" | "sq2" => Some(("square", corpus::square())),
        "diamond" | "di2" => Some(("diamond", corpus::diamond())),
        "hexagon" | "hex" => Some(("hexagon", corpus::hexagon())),
        "cube3" | "cube" => Some(("cube3", corpus::cube3())),
        "oct3" | "octahedron3" => Some(("oct3", corpus::octahedron3())),
        _ => None,
    };
    if let Some((name, ball)) = named {
        return Ok((name.into(), ball));
    }
    let path = Path::new(spec);
    let ball = formats::parse_ball(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| spec.to_string());
    Ok((name, ball))
}

fn vector_string(v: &Vector) -> String {
    let coords: Vec<String> = v.0.iter().map(format_rational).collect();
    format!("({})", coords.join(", "))
}

fn matrix_rows(a: &Matrix) -> Vec<String> {
    (0..a.rows)
        .map(|i| {
            let row: Vec<String> = (0..a.cols).map(|j| format_rational(a.at(i, j))).collect();
            format!("[{}]", row.join(", "))
        })
        .collect()
}

fn matrix_json(a: &Matrix) -> serde_json::Value {
    json!((0..a.rows)
        .map(|i| (0..a.cols)
            .map(|j| format_rational(a.at(i, j)))
            .collect::<Vec<_>>())
        .collect::<Vec<_>>())
}

fn print_json(value: &serde_json::Value) {
    println!(
        "{}",
        serde_json::to_string_pretty(value).expect("json values serialize")
    );
}

fn cmd_ball_info(spec: &str, as_json: bool) -> Result<i32> {
    let (name, ball) = resolve_ball(spec)?;
    let census = ball.lattice.census(ball.dim);
    if as_json {
        print_json(&json!({
            "name": name,
            "dim": ball.dim,
            "vertices": ball.vertices.iter().map(|v| v.0.iter().map(format_rational).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "facets": ball.facets.iter().map(|c| c.0.iter().map(format_rational).collect::<Vec<_>>()).collect::<Vec<_>>(),
            "face_census": census,
            "fingerprint_distances": invariant_fingerprint(&ball).distances.iter().map(format_rational).collect::<Vec<_>>(),
        }));
    } else {
        println!(
            "ball {name}: dim {}, {} vertices, {} facets",
            ball.dim,
            ball.vertices.len(),
            ball.facets.len()
        );
        println!("face census by dimension: {census:?}");
        println!("vertices:");
        for v in &ball.vertices {
            println!("  {}", vector_string(v));
        }
        println!("facet functionals:");
        for c in &ball.facets {
            println!("  {}", vector_string(&c.as_vector()));
        }
    }
    Ok(0)
}

fn cmd_ball_dual(spec: &str, as_json: bool, output: Option<&Path>) -> Result<i32> {
    let (name, ball) = resolve_ball(spec)?;
    let dual = ball.polar_dual();
    if let Some(path) = output {
        formats::serialize_ball(&dual, path)?;
        println!("wrote dual of {name} to {}", path.display());
        return Ok(0);
    }
    if as_json {
        print_json(&json!({
            "name": format!("{name}_dual"),
            "dim": dual.dim,
            "vertices": dual.vertices.iter().map(|v| v.0.iter().map(format_rational).collect::<Vec<_>>()).collect::<Vec<_>>(),
        }));
    } else {
        println!(
            "dual of {name}: dim {}, {} vertices, {} facets",
            dual.dim,
            dual.vertices.len(),
            dual.facets.len()
        );
        println!("vertices:");
        for v in &dual.vertices {
            println!("  {}", vector_string(v));
        }
    }
    Ok(0)
}

fn load_map(source: &str, target: &str, map: &Path) -> Result<(String, String, SphereMap)> {
    let (source_name, source_ball) = resolve_ball(source)?;
    let (target_name, target_ball) = resolve_ball(target)?;
    let f = formats::parse_map(map, source_ball, target_ball)?;
    Ok((source_name, target_name, f))
}

fn cmd_map_check(
    source: &str,
    target: &str,
    map: &Path,
    samples: usize,
    seed: u64,
    as_json: bool,
) -> Result<i32> {
    let (_, _, f) = load_map(source, target, map)?;
    let tolerance = f.declared_tolerance();
    let antipodal = f.antipodal_residual(samples, seed)?;
    let sphere = f.sphere_residual(samples, seed ^ 1)?;
    let points = sample_sphere_points(&f.source, 2 * samples, seed ^ 2)?;
    let pairs: Vec<_> = points
        .chunks_exact(2)
        .map(|c| (c[0].clone(), c[1].clone()))
        .collect();
    let isometry = f.isometry_residual(&pairs)?;
    let checks = [
        ("antipodal_residual", antipodal),
        ("sphere_residual", sphere),
        ("isometry_residual", isometry),
    ];
    let all_pass = checks.iter().all(|(_, r)| *r <= tolerance);
    if as_json {
        print_json(&json!({
            "kind": f.kind_name(),
            "samples": samples,
            "seed": seed,
            "tolerance": format_rational(&tolerance),
            "checks": checks.iter().map(|(n, r)| json!({
                "name": n,
                "residual": format_rational(r),
                "pass": *r <= tolerance,
            })).collect::<Vec<_>>(),
            "pass": all_pass,
        }));
    } else {
        println!("map kind: {}", f.kind_name());
        for (name, r) in &checks {
            let verdict = if *r <= tolerance { "PASS" } else { "FAIL" };
            println!("{name}: {} {verdict}", format_rational(r));
        }
        println!("overall: {}", if all_pass { "PASS" } else { "FAIL" });
    }
    Ok(if all_pass { 0 } else { 1 })
}

fn cmd_map_extend(source: &str, target: &str, map: &Path, as_json: bool) -> Result<i32> {
    let (_, _, f) = load_map(source, target, map)?;
    let outcome = match extend(&f) {
        Ok(o) => o,
        Err(e @ (Error::Io(_) | Error::Parse(_) | Error::Validation(_))) => return Err(e),
        Err(e) => {
            // The pipeline itself diagnosed the map as non-linear on some
            // cone; that is a failed property, not unusable input.
            if as_json {
                print_json(&json!({ "status": "failed", "error": e.to_string() }));
            } else {
                println!("extension failed: {e}");
            }
            return Ok(1);
        }
    };
    match outcome {
        ExtendOutcome::Linear {
            matrix,
            certificate,
        } => {
            if as_json {
                print_json(&json!({
                    "status": "linear",
                    "matrix": matrix_json(&matrix),
                    "isometry": certificate.ok,
                    "invertible": certificate.invertible,
                }));
            } else {
                println!("pieces stitch into one linear map:");
                for row in matrix_rows(&matrix) {
                    println!("  {row}");
                }
                println!(
                    "certified isometry: {}",
                    if certificate.ok { "yes" } else { "no" }
                );
            }
            Ok(if certificate.ok { 0 } else { 1 })
        }
        ExtendOutcome::Inconsistent(report) => {
            if as_json {
                print_json(&json!({
                    "status": "inconsistent",
                    "disagreements": report.disagreements.iter().map(|d| json!({
                        "facets": [d.facets.0, d.facets.1],
                        "vertex": d.vertex,
                        "defect": d.defect.0.iter().map(format_rational).collect::<Vec<_>>(),
                    })).collect::<Vec<_>>(),
                }));
            } else {
                println!(
                    "pieces do not stitch: {} disagreement(s)",
                    report.disagreements.len()
                );
                for d in &report.disagreements {
                    let place = match d.vertex {
                        Some(vid) => format!(
                            "at shared vertex {}",
                            vector_string(&f.source.vertices[vid])
                        ),
                        None => "entry-wise".into(),
                    };
                    println!(
                        "  facets {} and {} {place}: defect {}",
                        d.facets.0,
                        d.facets.1,
                        vector_string(&d.defect)
                    );
                }
            }
            Ok(1)
        }
    }
}

fn cmd_search_iso(source: &str, target: &str, limit: Option<usize>, as_json: bool) -> Result<i32> {
    let (source_name, source_ball) = resolve_ball(source)?;
    let (target_name, target_ball) = resolve_ball(target)?;
    let found = enumerate_isometries(&source_ball, &target_ball, limit);
    if as_json {
        print_json(&json!({
            "source": source_name,
            "target": target_name,
            "count": found.len(),
            "matrices": found.iter().map(matrix_json).collect::<Vec<_>>(),
        }));
    } else {
        println!(
            "{} isometries from {source_name} to {target_name}",
            found.len()
        );
        for (i, a) in found.iter().enumerate() {
            println!("isometry {i}:");
            for row in matrix_rows(a) {
                println!("  {row}");
            }
        }
    }
    Ok(0)
}

fn cmd_verify_lemmas(args: &VerifyArgs) -> Result<i32> {
    let (source_name, target_name, f) = load_map(&args.source, &args.target, &args.map)?;
    let mut schedule = LimitSchedule::default();
    if let Some(depth) = args.schedule_depth {
        if depth == 0 {
            return Err(Error::Validation("schedule depth must be positive".into()));
        }
        schedule.depth = depth;
    }
    if let Some(tol) = &args.tol {
        let t = parse_rational(tol)?;
        if t <= num::BigRational::zero() {
            return Err(Error::Validation("tolerance must be positive".into()));
        }
        schedule.tolerance = t;
    }
    let config = VerifyConfig {
        seed: args.seed,
        instances: args.instances,
        schedule,
    };
    let report = run_verification(&f, &source_name, &target_name, &config);
    if let Some(path) = &args.report {
        report.write(path)?;
    }
    if args.json {
        print!("{}", report.canonical_json());
    } else {
        println!(
            "verify lemmas: {} -> {} ({}), seed {}, {} instances",
            report.source, report.target, report.map_kind, report.seed, report.instances
        );
        for e in &report.entries {
            println!(
                "{:<28} instances={:<4} max_residual={:<12.3e} tol={:<9.0e} {}",
                e.name,
                e.instances,
                e.max_residual,
                e.tolerance,
                if e.pass { "PASS" } else { "FAIL" }
            );
        }
        println!(
            "overall: {}",
            if report.overall_pass { "PASS" } else { "FAIL" }
        );
    }
    Ok(if report.overall_pass { 0 } else { 1 })
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Ball { cmd } => match cmd {
            BallCmd::Info { ball, json } => cmd_ball_info(&ball, json),
            BallCmd::Dual { ball, json, output } => cmd_ball_dual(&ball, json, output.as_deref()),
        },
        Command::Map { cmd } => match cmd {
            MapCmd::Check {
                source,
                target,
                map,
                samples,
                seed,
                json,
            } => cmd_map_check(&source, &target, &map, samples, seed, json),
            MapCmd::Extend {
                source,
                target,
                map,
                json,
            } => cmd_map_extend(&source, &target, &map, json),
        },
        Command::Search { cmd } => match cmd {
            SearchCmd::Iso {
                source,
                target,
                limit,
                json,
            } => cmd_search_iso(&source, &target, limit, json),
        },
        Command::Verify { cmd } => match cmd {
            VerifyCmd::Lemmas(args) => cmd_verify_lemmas(&args),
        },
    }
}

/// Entry point of the `polysphere` binary. Returns the process exit code.
pub fn run() -> i32 {
    if let Ok(threads) = std::env::var("POLYSPHERE_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

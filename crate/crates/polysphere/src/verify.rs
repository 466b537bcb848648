//! The verification harness behind `polysphere verify lemmas`.
//!
//! One run takes a sphere map and produces a [`VerificationReport`] with one
//! entry per verified property, each the worst residual over a deterministic
//! set of seeded instances. Base points are the ball's vertices, the
//! barycenters of every proper face, and seeded sphere points; directions
//! and probe vectors are drawn per instance from the run seed, so identical
//! inputs and seed give byte-identical reports.
//!
//! A property that errors out on some instance (a limit that does not
//! stabilize, a transport that cannot be built) records an infinite
//! residual and fails; nothing is skipped silently.

use num::Signed;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::ball::PolyBall;
use crate::differential::{
    build_dual_transport, build_tangent_transport, derivative_formula_residual,
    difference_quotient_limit, linearity_probe, norming_defect, pairing_residual, support_cloud,
    LimitSchedule,
};
use crate::error::{Error, Result};
use crate::extension::{extend, ExtendOutcome};
use crate::formats::{ReportEntry, ScheduleFile, VerificationReport};
use crate::linalg::{format_rational, rational_to_f64, Rational, Vector};
use crate::maps::{random_dyadic, sample_smooth_chord_points, sample_sphere_points, SphereMap};

/// Pass threshold for the difference-quotient limit against the chord
/// functional value.
const QUOTIENT_TOLERANCE: f64 = 1e-9;
/// Pass threshold for norm preservation of the tangent transport between
/// smooth points.
const TRANSPORT_ISOMETRY_TOLERANCE: f64 = 1e-9;
/// Pass threshold for residuals of limit-built objects (pairing, derivative
/// formula, additivity).
const LIMIT_RESIDUAL_TOLERANCE: f64 = 1e-8;
/// Allowed 1-norming defect of a finite support cloud; slack for the finite
/// sample, not for the property.
const NORMING_TOLERANCE: f64 = 0.05;
/// Required log-log convergence rate of quotient estimates before they
/// stabilize.
const SLOPE_FLOOR: f64 = 0.9;
/// Chord samples per support cloud and probes per norming check.
const CLOUD_SAMPLES: usize = 64;
/// Minimum number of base points per ball.
const BASE_POINT_FLOOR: usize = 20;

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub seed: u64,
    /// Seeded (base point, direction) configurations per sampled entry.
    pub instances: usize,
    pub schedule: LimitSchedule,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            seed: 7,
            instances: 100,
            schedule: LimitSchedule::default(),
        }
    }
}

/// Sphere points every structural check runs at: all vertices, the
/// barycenter of every proper face (facet interiors and ridge midpoints
/// included), topped up with seeded sphere points to the floor count.
pub fn base_points(ball: &PolyBall, seed: u64, floor: usize) -> Vec<Vector> {
    let mut points: Vec<Vector> = ball.vertices.clone();
    for face in &ball.lattice.faces {
        let mut b = Vector::zero(ball.dim);
        for &vi in &face.vertex_ids {
            b = &b + &ball.vertices[vi];
        }
        let b = b.scale(&Rational::new(
            1.into(),
            (face.vertex_ids.len() as i64).into(),
        ));
        if !points.contains(&b) {
            points.push(b);
        }
    }
    if points.len() < floor {
        if let Ok(extra) = sample_sphere_points(ball, floor - points.len(), seed) {
            for p in extra {
                if !points.contains(&p) {
                    points.push(p);
                }
            }
        }
    }
    points
}

fn entry(name: &str, instances: usize, max_residual: f64, tolerance: f64) -> ReportEntry {
    ReportEntry {
        name: name.into(),
        instances,
        max_residual,
        tolerance,
        pass: max_residual <= tolerance,
    }
}

fn to_f64(r: Result<Rational>) -> f64 {
    match r {
        Ok(v) => rational_to_f64(&v),
        Err(_) => f64::INFINITY,
    }
}

fn fold_max(values: Vec<f64>) -> f64 {
    values.into_iter().fold(0.0, f64::max)
}

/// Runs every verified property of the map and assembles the report. The
/// names are stable: they are the contract between this harness, the CLI
/// output, and the acceptance suite.
pub fn run_verification(
    f: &SphereMap,
    source_name: &str,
    target_name: &str,
    config: &VerifyConfig,
) -> VerificationReport {
    let schedule = &config.schedule;
    let declared = rational_to_f64(&(f.declared_tolerance() * Rational::from_integer(10.into())));
    let points = base_points(&f.source, config.seed ^ 0xba5e, BASE_POINT_FLOOR);
    let m = f.source.dim;
    let mut entries = Vec::new();

    let antipodal = to_f64(f.antipodal_residual(config.instances, config.seed ^ 0xa711));
    entries.push(entry("antipodality", config.instances, antipodal, declared));

    let iso_pairs: Vec<(Vector, Vector)> =
        match sample_sphere_points(&f.source, 2 * config.instances, config.seed ^ 0x1503) {
            Ok(pts) => pts
                .chunks_exact(2)
                .map(|c| (c[0].clone(), c[1].clone()))
                .collect(),
            Err(_) => Vec::new(),
        };
    let iso_res = if iso_pairs.is_empty() {
        f64::INFINITY
    } else {
        to_f64(f.isometry_residual(&iso_pairs))
    };
    entries.push(entry("isometry_residual", iso_pairs.len(), iso_res, declared));

    let quotient: Vec<(f64, f64)> = (0..config.instances)
        .into_par_iter()
        .map(|i| {
            let y = &points[i % points.len()];
            let seed_i = config.seed ^ 0x9007_0000 ^ (i as u64);
            let run = || -> Result<(f64, f64)> {
                let xs = sample_smooth_chord_points(f, y, 1, seed_i)?;
                let x = &xs[0];
                let generators = f.source.tangent_directions(y)?.generators;
                let u = generators[i % generators.len()].clone();
                let q = difference_quotient_limit(f, x, y, &u, schedule)?;
                let chord = f.source.normalize(&(x - y))?;
                let gamma = f
                    .source
                    .smooth_gamma(&chord)?
                    .ok_or(Error::NotSmoothPoint)?;
                let residual = rational_to_f64(&(&q.limit - &gamma.apply(&u)).abs());
                let shortfall = match q.convergence_slope(schedule) {
                    Some(s) => (SLOPE_FLOOR - s).max(0.0),
                    None => 0.0,
                };
                Ok((residual, shortfall))
            };
            run().unwrap_or((f64::INFINITY, f64::INFINITY))
        })
        .collect();
    entries.push(entry(
        "difference_quotient_limit",
        config.instances,
        fold_max(quotient.iter().map(|q| q.0).collect()),
        QUOTIENT_TOLERANCE,
    ));
    entries.push(entry(
        "difference_quotient_slope",
        config.instances,
        fold_max(quotient.iter().map(|q| q.1).collect()),
        0.0,
    ));

    let clouds: Vec<(f64, f64)> = points
        .par_iter()
        .enumerate()
        .map(|(i, y)| {
            let seed_i = config.seed ^ 0xc10d_0000 ^ (i as u64);
            let run = || -> Result<(f64, f64)> {
                let cloud = support_cloud(f, y, CLOUD_SAMPLES, seed_i)?;
                let rank_defect = (m - cloud.source_rank) as f64;
                let smooth = f.source.support_set(y)?.is_smooth();
                let norming = if smooth {
                    rational_to_f64(&norming_defect(
                        &f.source,
                        &cloud.source_cloud,
                        CLOUD_SAMPLES,
                        seed_i ^ 1,
                    )?)
                } else {
                    0.0
                };
                Ok((rank_defect, norming))
            };
            run().unwrap_or((f64::INFINITY, f64::INFINITY))
        })
        .collect();
    entries.push(entry(
        "support_cloud_rank",
        points.len(),
        fold_max(clouds.iter().map(|c| c.0).collect()),
        0.0,
    ));
    entries.push(entry(
        "support_cloud_norming",
        points.len(),
        fold_max(clouds.iter().map(|c| c.1).collect()),
        NORMING_TOLERANCE,
    ));

    let transports: Vec<(f64, f64, f64, f64)> = points
        .par_iter()
        .enumerate()
        .map(|(i, y)| {
            let seed_i = config.seed ^ 0x7a27_0000 ^ (i as u64);
            let run = || -> Result<(f64, f64, f64, f64)> {
                let fy = f.evaluate(y)?;
                let span_src = f.source.support_set(y)?.span_dim;
                let span_tgt = f.target.support_set(&fy)?.span_dim;
                let span_diff = (span_src as f64 - span_tgt as f64).abs();
                let t = build_tangent_transport(f, y, schedule)?;
                let d = build_dual_transport(f, y, schedule, seed_i)?;
                let pairing = rational_to_f64(&pairing_residual(&t, &d)?);
                let both_smooth = span_src == 1 && span_tgt == 1;
                let iso_defect = if both_smooth {
                    rational_to_f64(&t.isometry_defect(&f.source, &f.target, 16, seed_i ^ 2)?)
                } else {
                    0.0
                };
                Ok((0.0, pairing, iso_defect, span_diff))
            };
            run().unwrap_or((
                f64::INFINITY,
                f64::INFINITY,
                f64::INFINITY,
                f64::INFINITY,
            ))
        })
        .collect();
    entries.push(entry(
        "transport_construction",
        points.len(),
        fold_max(transports.iter().map(|t| t.0).collect()),
        0.0,
    ));
    entries.push(entry(
        "limit_pairing_invariance",
        points.len(),
        fold_max(transports.iter().map(|t| t.1).collect()),
        LIMIT_RESIDUAL_TOLERANCE,
    ));
    entries.push(entry(
        "tangent_transport_isometry",
        points.len(),
        fold_max(transports.iter().map(|t| t.2).collect()),
        TRANSPORT_ISOMETRY_TOLERANCE,
    ));
    entries.push(entry(
        "support_span_dimension",
        points.len(),
        fold_max(transports.iter().map(|t| t.3).collect()),
        0.0,
    ));

    // Differentiability holds exactly at smooth points and where the
    // support functionals span the whole dual, so only those base points
    // are fair game for the derivative checks.
    let diff_points: Vec<Vector> = points
        .iter()
        .filter(|y| {
            f.source
                .support_set(y)
                .map(|s| s.is_smooth() || s.span_dim == m)
                .unwrap_or(false)
        })
        .cloned()
        .collect();
    let derivative: Vec<(f64, f64)> = (0..config.instances)
        .into_par_iter()
        .map(|i| {
            let y = &diff_points[i % diff_points.len()];
            let seed_i = config.seed ^ 0xde12_0000 ^ (i as u64);
            let run = || -> Result<(f64, f64)> {
                let mut rng = ChaCha20Rng::seed_from_u64(seed_i);
                let z = random_dyadic(&mut rng, m, 64);
                let formula = rational_to_f64(&derivative_formula_residual(f, y, &z, schedule)?);
                let additivity =
                    rational_to_f64(&linearity_probe(f, y, 1, seed_i ^ 3, schedule)?);
                Ok((formula, additivity))
            };
            run().unwrap_or((f64::INFINITY, f64::INFINITY))
        })
        .collect();
    entries.push(entry(
        "derivative_formula",
        config.instances,
        fold_max(derivative.iter().map(|d| d.0).collect()),
        LIMIT_RESIDUAL_TOLERANCE,
    ));
    entries.push(entry(
        "gateaux_linearity",
        config.instances,
        fold_max(derivative.iter().map(|d| d.1).collect()),
        LIMIT_RESIDUAL_TOLERANCE,
    ));

    let extension_residual = match extend(f) {
        Ok(ExtendOutcome::Linear {
            matrix,
            certificate,
        }) if certificate.ok => match f.matrix() {
            Some(a) if *a != matrix => 1.0,
            _ => 0.0,
        },
        Ok(_) => 1.0,
        Err(_) => f64::INFINITY,
    };
    entries.push(entry("linear_extension", 1, extension_residual, 0.0));

    VerificationReport::new(
        source_name.into(),
        target_name.into(),
        f.kind_name().into(),
        config.seed,
        config.instances,
        ScheduleFile {
            depth: schedule.depth,
            window: schedule.window,
            tolerance: format_rational(&schedule.tolerance),
        },
        entries,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;

    fn quick_config() -> VerifyConfig {
        VerifyConfig {
            seed: 7,
            instances: 8,
            schedule: LimitSchedule::default(),
        }
    }

    #[test]
    fn base_points_cover_vertices_and_faces() {
        let sq = corpus::square();
        let pts = base_points(&sq, 1, 20);
        assert!(pts.len() >= 20);
        for v in &sq.vertices {
            assert!(pts.contains(v));
        }
        for p in &pts {
            assert!(sq.on_sphere(p).unwrap());
        }
        let cube = corpus::cube3();
        let pts = base_points(&cube, 1, 20);
        assert_eq!(
            pts.iter()
                .filter(|p| cube.support_set(p).unwrap().is_smooth())
                .count(),
            6
        );
    }

    #[test]
    fn rotation_map_passes_every_entry() {
        let f = corpus::rotation_square();
        let report = run_verification(&f, "square", "square", &quick_config());
        for e in &report.entries {
            assert!(e.pass, "{} failed with residual {}", e.name, e.max_residual);
            assert_eq!(e.max_residual, 0.0, "{}", e.name);
        }
        assert!(report.overall_pass);
        assert_eq!(report.entries.len(), 13);
        assert_eq!(report.map_kind, "linear");
    }

    #[test]
    fn squeeze_map_fails_the_isometry_entry() {
        let sq = corpus::square();
        let squeeze = crate::linalg::Matrix::from_rows(vec![
            vec![crate::linalg::rat_int(1), crate::linalg::rat_int(0)],
            vec![crate::linalg::rat_int(0), crate::linalg::rat(1, 2)],
        ]);
        let f = SphereMap::linear(sq.clone(), sq, squeeze).unwrap();
        let report = run_verification(&f, "square", "square", &quick_config());
        assert!(!report.overall_pass);
        let iso = report
            .entries
            .iter()
            .find(|e| e.name == "isometry_residual")
            .unwrap();
        assert!(!iso.pass);
        assert!(iso.max_residual > 0.0);
    }

    #[test]
    fn ridge_defect_map_fails_the_extension_entry() {
        let f = corpus::ridge_defect_square();
        let report = run_verification(&f, "square", "square", &quick_config());
        assert!(!report.overall_pass);
        let ext = report
            .entries
            .iter()
            .find(|e| e.name == "linear_extension")
            .unwrap();
        assert!(!ext.pass);
        let formula = report
            .entries
            .iter()
            .find(|e| e.name == "derivative_formula")
            .unwrap();
        assert!(!formula.pass);
    }

    #[test]
    fn reports_are_deterministic() {
        let f = corpus::square_to_diamond();
        let a = run_verification(&f, "square", "diamond", &quick_config());
        let b = run_verification(&f, "square", "diamond", &quick_config());
        assert_eq!(a.canonical_json(), b.canonical_json());
    }
}

//! Differential behaviour of sphere maps along dyadic step schedules.
//!
//! Everything here is a limit made finite: difference quotients of the
//! distance function, one-sided derivatives of the norm, the transport of
//! tangent directions and of support functionals from a base point to its
//! image, and the derivative of the homogeneous extension. Limits run over
//! the steps t_k = 2^(-k) and are accepted once a window of consecutive
//! values agrees within the schedule tolerance; on piecewise-linear inputs
//! the agreement is exact after finitely many steps, so the tolerance only
//! matters for opaque evaluators.
//!
//! Each builder doubles as a detector: on maps that are not isometries the
//! same pipelines end in [`Error::InconsistentPairs`],
//! [`Error::NoStabilization`] or [`Error::SupportSpanMismatch`] instead of
//! producing a transport, and the residual operations return the size of the
//! failure rather than hiding it.

use num::{BigInt, One, Signed, Zero};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::ball::PolyBall;
use crate::error::{Error, Result};
use crate::linalg::{
    format_rational, independent_subset, rank, rational_to_f64, rat, Functional, Matrix, Rational,
    Vector,
};
use crate::linalg::span_coefficients;
use crate::maps::{random_dyadic, sample_smooth_chord_points, SphereMap};

/// Dyadic step schedule with a stabilization window and tolerance.
#[derive(Debug, Clone, PartialEq)]
pub struct LimitSchedule {
    /// Steps run over k = 1..=depth with t_k = 2^(-k).
    pub depth: usize,
    /// Number of consecutive agreeing values that ends a run.
    pub window: usize,
    /// Maximum spread inside an agreeing window.
    pub tolerance: Rational,
}

impl Default for LimitSchedule {
    fn default() -> Self {
        LimitSchedule {
            depth: 30,
            window: 3,
            tolerance: rat(1, 1_000_000_000),
        }
    }
}

impl LimitSchedule {
    pub fn step(&self, k: usize) -> Rational {
        Rational::new(BigInt::one(), BigInt::one() << k)
    }
}

/// Index of the start of a stable window at the end of `vals`, if the last
/// `window` values lie pairwise within `tol`.
fn settled<T>(
    vals: &[T],
    window: usize,
    tol: &Rational,
    dist: impl Fn(&T, &T) -> Rational,
) -> Option<usize> {
    if vals.len() < window {
        return None;
    }
    let start = vals.len() - window;
    for i in start..vals.len() {
        for j in (i + 1)..vals.len() {
            if dist(&vals[i], &vals[j]) > *tol {
                return None;
            }
        }
    }
    Some(start)
}

fn scalar_dist(a: &Rational, b: &Rational) -> Rational {
    (a - b).abs()
}

fn vec_dist(a: &Vector, b: &Vector) -> Rational {
    (a - b)
        .0
        .into_iter()
        .map(|c| c.abs())
        .fold(Rational::zero(), Rational::max)
}

fn fun_dist(a: &Functional, b: &Functional) -> Rational {
    a.0.iter()
        .zip(&b.0)
        .map(|(x, y)| (x - y).abs())
        .fold(Rational::zero(), Rational::max)
}

/// One-sided directional derivative of the norm at a sphere point, with the
/// facets attaining it.
#[derive(Debug, Clone, PartialEq)]
pub struct NormDerivative {
    /// Base point, normalized.
    pub y: Vector,
    pub z: Vector,
    /// lim (||y + t z|| - 1)/t as t decreases to 0.
    pub value: Rational,
    /// Facet ids active at y whose functionals attain the value.
    pub achievers: Vec<usize>,
}

/// Computes the one-sided derivative exactly as the maximum of <c, z> over
/// the facets active at y, then cross-checks it against two finite
/// differences taken below the step at which any inactive facet could
/// overtake. The norm is piecewise linear, so the quotients must agree
/// exactly with the argmax.
pub fn norm_directional_derivative(
    ball: &PolyBall,
    y: &Vector,
    z: &Vector,
) -> Result<NormDerivative> {
    let unit = ball.normalize(y)?;
    z.expect_dim(ball.dim)?;
    let active = ball.support_set(&unit)?.facet_ids;
    let values: Vec<Rational> = active.iter().map(|&j| ball.facets[j].apply(z)).collect();
    let value = values
        .iter()
        .cloned()
        .fold(None::<Rational>, |m, v| {
            Some(match m {
                None => v,
                Some(m) => m.max(v),
            })
        })
        .expect("sphere points have at least one active facet");
    let achievers: Vec<usize> = active
        .iter()
        .zip(&values)
        .filter(|&(_, v)| *v == value)
        .map(|(&j, _)| j)
        .collect();

    let mut overtake: Option<Rational> = None;
    for j in 0..ball.facets.len() {
        if active.contains(&j) {
            continue;
        }
        let cz = ball.facets[j].apply(z);
        if cz > value {
            let gap = Rational::one() - ball.facets[j].apply(&unit);
            let threshold = gap / (cz - &value);
            overtake = Some(match overtake {
                None => threshold,
                Some(t) => t.min(threshold),
            });
        }
    }
    let t0 = match overtake {
        Some(a) => a / rat(2, 1),
        None => rat(1, 2),
    };
    for t in [t0.clone(), t0 / rat(2, 1)] {
        let quotient = (ball.norm(&(&unit + &z.scale(&t)))? - Rational::one()) / &t;
        assert_eq!(
            quotient, value,
            "finite difference below the overtaking step must match the argmax"
        );
    }

    Ok(NormDerivative {
        y: unit,
        z: z.clone(),
        value,
        achievers,
    })
}

/// A stabilized difference-quotient run: the recorded estimates, the limit,
/// and the index where the stable window began.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotientLimit {
    pub estimates: Vec<Rational>,
    pub limit: Rational,
    pub settled_at: usize,
}

impl QuotientLimit {
    /// Least-squares slope of log |estimate - limit| against log t over the
    /// estimates with nonzero error, capped at the last ten. The linear-rate
    /// bound |estimate - limit| <= C t is assessed at the small-step end of
    /// the run: when the stable window agrees with the limit exactly, the
    /// sequence is identically the limit below its stabilization threshold,
    /// the bound holds with C = 0, and the fit is vacuous (`None`). A fit
    /// over the remaining large-step estimates would measure the transient
    /// where the active facet configuration is still changing, not the
    /// convergence rate. `None` likewise when fewer than two nonzero-error
    /// points exist.
    pub fn convergence_slope(&self, schedule: &LimitSchedule) -> Option<f64> {
        let tail_exact = self
            .estimates
            .get(self.settled_at..)
            .map(|w| w.iter().all(|est| est == &self.limit))
            .unwrap_or(false);
        if tail_exact {
            return None;
        }
        let mut points: Vec<(f64, f64)> = Vec::new();
        for (i, est) in self.estimates.iter().enumerate().take(self.settled_at) {
            let err = (est - &self.limit).abs();
            if !err.is_zero() {
                let t = schedule.step(i + 1);
                points.push((rational_to_f64(&t).ln(), rational_to_f64(&err).ln()));
            }
        }
        if points.len() > 10 {
            points.drain(..points.len() - 10);
        }
        if points.len() < 2 {
            return None;
        }
        let n = points.len() as f64;
        let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
        let my = points.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = points.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
        Some(sxy / sxx)
    }
}

/// Difference quotient of the image-side distance function along the sphere
/// path y_k = normalize(y - t_k u):
///
/// ( ||f(x) - f(y_k)|| - ||f(x) - f(y)|| ) / ||f(y) - f(y_k)||.
///
/// Preconditions: x and y on the source sphere with x != y, the chord
/// direction x - y smooth in the source, and u a tangent direction at y.
/// For onto isometries the limit equals the chord's support functional
/// applied to u.
pub fn difference_quotient_limit(
    f: &SphereMap,
    x: &Vector,
    y: &Vector,
    u: &Vector,
    schedule: &LimitSchedule,
) -> Result<QuotientLimit> {
    let src = &f.source;
    for p in [x, y] {
        if !src.on_sphere(p)? {
            return Err(Error::NotOnSphere);
        }
    }
    let chord = x - y;
    if chord.is_zero() {
        return Err(Error::ZeroVector);
    }
    if src.smooth_gamma(&chord)?.is_none() {
        return Err(Error::NotSmoothPoint);
    }
    if !src.in_tangent_set(y, u)? {
        return Err(Error::NotTangentDirection);
    }
    let fx = f.evaluate(x)?;
    let fy = f.evaluate(y)?;
    let base = f.target.norm(&(&fx - &fy))?;
    let mut estimates: Vec<Rational> = Vec::new();
    for k in 1..=schedule.depth {
        let t = schedule.step(k);
        let yk = src.normalize(&(y - &u.scale(&t)))?;
        let fyk = f.evaluate(&yk)?;
        let denom = f.target.norm(&(&fy - &fyk))?;
        if denom.is_zero() {
            return Err(Error::EvaluatorFailure {
                reason: "map collapses nearby sphere points".into(),
            });
        }
        estimates.push((f.target.norm(&(&fx - &fyk))? - &base) / denom);
        if let Some(start) = settled(&estimates, schedule.window, &schedule.tolerance, scalar_dist)
        {
            let limit = estimates.last().unwrap().clone();
            return Ok(QuotientLimit {
                estimates,
                limit,
                settled_at: start,
            });
        }
    }
    Err(Error::NoStabilization)
}

/// Support functionals of smooth chords from y, collected on both sides of
/// the map, with the exact ranks of their spans.
#[derive(Debug, Clone, PartialEq)]
pub struct SupportCloud {
    pub source_cloud: Vec<Functional>,
    pub target_cloud: Vec<Functional>,
    pub source_rank: usize,
    pub target_rank: usize,
}

/// Samples chord points via [`sample_smooth_chord_points`] and records the
/// deduplicated support functionals of the chords and of their images. For
/// enough samples the source rank reaches the full dimension: the cloud
/// spans the dual. A single sample only ever witnesses rank one.
pub fn support_cloud(f: &SphereMap, y: &Vector, samples: usize, seed: u64) -> Result<SupportCloud> {
    let yhat = f.source.normalize(y)?;
    let fy = f.evaluate(&yhat)?;
    let xs = sample_smooth_chord_points(f, &yhat, samples, seed)?;
    let mut source_cloud: Vec<Functional> = Vec::new();
    let mut target_cloud: Vec<Functional> = Vec::new();
    for x in &xs {
        let gs = f
            .source
            .smooth_gamma(&(x - &yhat))?
            .expect("sampler guarantees smooth source chords");
        let gt = f
            .target
            .smooth_gamma(&(&f.evaluate(x)? - &fy))?
            .expect("sampler guarantees smooth image chords");
        if !source_cloud.contains(&gs) {
            source_cloud.push(gs);
        }
        if !target_cloud.contains(&gt) {
            target_cloud.push(gt);
        }
    }
    let source_rank = rank(&source_cloud.iter().map(Functional::as_vector).collect::<Vec<_>>());
    let target_rank = rank(&target_cloud.iter().map(Functional::as_vector).collect::<Vec<_>>());
    Ok(SupportCloud {
        source_cloud,
        target_cloud,
        source_rank,
        target_rank,
    })
}

/// Worst gap 1 - max_c |<c, z>| / ||z|| over seeded probe vectors z: zero
/// exactly when the cloud computes the norm of every probe.
pub fn norming_defect(
    ball: &PolyBall,
    cloud: &[Functional],
    probes: usize,
    seed: u64,
) -> Result<Rational> {
    if cloud.is_empty() {
        return Err(Error::Validation("empty support cloud".into()));
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut worst = Rational::zero();
    let mut drawn = 0usize;
    while drawn < probes {
        let z = random_dyadic(&mut rng, ball.dim, 64);
        if z.is_zero() {
            continue;
        }
        drawn += 1;
        let norm = ball.norm(&z)?;
        let best = cloud
            .iter()
            .map(|c| c.apply(&z).abs())
            .fold(Rational::zero(), Rational::max);
        worst = worst.max(Rational::one() - best / norm);
    }
    Ok(worst)
}

/// Transport of tangent directions at y to tangent directions at f(y),
/// together with the base data certifying it extends linearly on its span.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentTransport {
    /// Base point, normalized.
    pub y: Vector,
    /// Image f(y).
    pub fy: Vector,
    /// (u, limit of normalized f(y) - f(y_k)) per tangent generator u.
    pub pairs: Vec<(Vector, Vector)>,
    /// Indices into `pairs` forming a maximal independent set of inputs.
    pub basis: Vec<usize>,
    /// Rank of the input span: dim - 1 at smooth points, dim at others.
    pub span_dim: usize,
}

impl TangentTransport {
    fn basis_vectors(&self) -> (Vec<Vector>, Vec<Vector>) {
        let us = self.basis.iter().map(|&i| self.pairs[i].0.clone()).collect();
        let vs = self.basis.iter().map(|&i| self.pairs[i].1.clone()).collect();
        (us, vs)
    }

    /// Applies the linear extension to any vector in the span of the
    /// tangent directions at y.
    pub fn apply(&self, w: &Vector) -> Result<Vector> {
        let (us, vs) = self.basis_vectors();
        let coeffs = span_coefficients(&us, w).ok_or(Error::SpanViolation)?;
        let mut out = Vector::zero(self.fy.dim());
        for (c, v) in coeffs.iter().zip(&vs) {
            out = &out + &v.scale(c);
        }
        Ok(out)
    }

    /// The transport as a full matrix, available only at non-smooth base
    /// points where the tangent directions span the whole space.
    pub fn as_full_matrix(&self) -> Option<Matrix> {
        if self.span_dim != self.y.dim() {
            return None;
        }
        let (us, vs) = self.basis_vectors();
        let src = Matrix::from_cols(&us);
        let img = Matrix::from_cols(&vs);
        Some(img.mul_mat(&src.inverse()?))
    }

    /// Worst norm distortion | ||T w|| - ||w|| | of the linear extension
    /// over seeded combinations of the basis directions.
    pub fn isometry_defect(
        &self,
        source: &PolyBall,
        target: &PolyBall,
        probes: usize,
        seed: u64,
    ) -> Result<Rational> {
        let (us, _) = self.basis_vectors();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let mut worst = Rational::zero();
        let mut drawn = 0usize;
        while drawn < probes {
            let coeffs = random_dyadic(&mut rng, us.len(), 16);
            let mut w = Vector::zero(source.dim);
            for (c, u) in coeffs.0.iter().zip(&us) {
                w = &w + &u.scale(c);
            }
            if w.is_zero() {
                continue;
            }
            drawn += 1;
            let distortion = (target.norm(&self.apply(&w)?)? - source.norm(&w)?).abs();
            worst = worst.max(distortion);
        }
        Ok(worst)
    }
}

/// Builds the tangent transport at y: every tangent generator u is pushed
/// through y_k = normalize(y - t_k u) and the normalized image differences
/// (f(y) - f(y_k)) / ||f(y) - f(y_k)|| must stabilize. The resulting pairs
/// must be reproducible by a single linear map on their span and must land
/// in the tangent set at f(y); each failure identifies a way in which f is
/// not an onto isometry.
pub fn build_tangent_transport(
    f: &SphereMap,
    y: &Vector,
    schedule: &LimitSchedule,
) -> Result<TangentTransport> {
    let src = &f.source;
    let yhat = src.normalize(y)?;
    let tangent = src.tangent_directions(&yhat)?;
    let fy = f.evaluate(&yhat)?;
    let mut pairs: Vec<(Vector, Vector)> = Vec::new();
    for u in &tangent.generators {
        let mut vals: Vec<Vector> = Vec::new();
        let mut limit = None;
        for k in 1..=schedule.depth {
            let t = schedule.step(k);
            let yk = src.normalize(&(&yhat - &u.scale(&t)))?;
            let diff = &fy - &f.evaluate(&yk)?;
            if diff.is_zero() {
                return Err(Error::EvaluatorFailure {
                    reason: "map collapses nearby sphere points".into(),
                });
            }
            vals.push(f.target.normalize(&diff)?);
            if settled(&vals, schedule.window, &schedule.tolerance, vec_dist).is_some() {
                limit = Some(vals.last().unwrap().clone());
                break;
            }
        }
        pairs.push((u.clone(), limit.ok_or(Error::NoStabilization)?));
    }

    let us: Vec<Vector> = pairs.iter().map(|p| p.0.clone()).collect();
    let basis = independent_subset(&us);
    let basis_us: Vec<Vector> = basis.iter().map(|&i| us[i].clone()).collect();
    let basis_vs: Vec<Vector> = basis.iter().map(|&i| pairs[i].1.clone()).collect();
    for (i, (u, v)) in pairs.iter().enumerate() {
        let coeffs =
            span_coefficients(&basis_us, u).expect("basis is maximal in the generator span");
        let mut predicted = Vector::zero(f.target.dim);
        for (c, bv) in coeffs.iter().zip(&basis_vs) {
            predicted = &predicted + &bv.scale(c);
        }
        let defect = vec_dist(&predicted, v);
        if defect > schedule.tolerance {
            return Err(Error::InconsistentPairs {
                defect: format!(
                    "tangent generator {i} deviates from the linear fit by {}",
                    format_rational(&defect)
                ),
            });
        }
    }
    if !f.target.on_sphere(&fy)? {
        return Err(Error::InconsistentPairs {
            defect: "f(y) is not on the target sphere".into(),
        });
    }
    for (i, (_, v)) in pairs.iter().enumerate() {
        if !f.target.in_tangent_set(&fy, v)? {
            return Err(Error::InconsistentPairs {
                defect: format!("image of tangent generator {i} is not tangent at f(y)"),
            });
        }
    }
    let span_dim = rank(&us);
    Ok(TangentTransport {
        y: yhat,
        fy,
        pairs,
        basis,
        span_dim,
    })
}

/// Transport of support functionals at -y to support functionals at -f(y),
/// sampled along sequences approaching the antipode of y.
#[derive(Debug, Clone, PartialEq)]
pub struct DualTransport {
    /// Base point, normalized.
    pub y: Vector,
    /// Image f(y).
    pub fy: Vector,
    /// (chord functional, image chord functional) limits, deduplicated.
    pub pairs: Vec<(Functional, Functional)>,
    /// Indices into `pairs` forming a maximal independent set of sources.
    pub basis: Vec<usize>,
    /// Exact dimension of the span of the support functionals at y.
    pub source_span_dim: usize,
    /// Exact dimension of the span of the support functionals at f(y).
    pub target_span_dim: usize,
}

impl DualTransport {
    /// Applies the linear extension to a functional in the span of the
    /// sampled chord functionals.
    pub fn apply(&self, g: &Functional) -> Result<Functional> {
        let sources: Vec<Vector> = self
            .basis
            .iter()
            .map(|&i| self.pairs[i].0.as_vector())
            .collect();
        let coeffs = span_coefficients(&sources, &g.as_vector()).ok_or(Error::SpanViolation)?;
        let dim = self.pairs[self.basis[0]].1 .0.len();
        let mut out = vec![Rational::zero(); dim];
        for (c, &i) in coeffs.iter().zip(&self.basis) {
            for (o, e) in out.iter_mut().zip(&self.pairs[i].1 .0) {
                *o += c * e;
            }
        }
        Ok(Functional(out))
    }
}

/// Builds the dual transport at y. Directions are drawn from the seed, one
/// sequence x_n = normalize(-y + 2^(-n) w) per direction; along each
/// sequence the support functionals of the chord x_n - y and of its image
/// chord must stabilize over the full schedule (no early stop: the limit at
/// the antipode is what matters, not transient agreement). Stabilized
/// source functionals support -y by construction, images must support
/// -f(y), and the exact support-span dimensions at y and f(y) must agree.
pub fn build_dual_transport(
    f: &SphereMap,
    y: &Vector,
    schedule: &LimitSchedule,
    seed: u64,
) -> Result<DualTransport> {
    let src = &f.source;
    let tgt = &f.target;
    let yhat = src.normalize(y)?;
    let fy = f.evaluate(&yhat)?;
    if !tgt.on_sphere(&fy)? {
        return Err(Error::EvaluatorFailure {
            reason: "f(y) is not on the target sphere".into(),
        });
    }
    let source_support = src.support_set(&yhat)?;
    let source_span_dim = source_support.span_dim;
    let target_span_dim = tgt.support_set(&fy)?.span_dim;
    if source_span_dim != target_span_dim {
        return Err(Error::SupportSpanMismatch {
            source_dim: source_span_dim,
            target_dim: target_span_dim,
        });
    }

    let minus_y = -&yhat;
    let minus_fy = -&fy;
    let batch = (4 * source_support.facet_ids.len()).max(16);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut pairs: Vec<(Functional, Functional)> = Vec::new();
    for _ in 0..batch {
        let w = random_dyadic(&mut rng, src.dim, 4096);
        let mut vals: Vec<(Functional, Functional)> = Vec::new();
        for n in 1..=schedule.depth {
            let s = schedule.step(n);
            let candidate = &minus_y + &w.scale(&s);
            if candidate.is_zero() {
                continue;
            }
            let xn = src.normalize(&candidate)?;
            let chord = &xn - &yhat;
            if chord.is_zero() {
                continue;
            }
            let Some(gs) = src.smooth_gamma(&chord)? else {
                continue;
            };
            let image_chord = &f.evaluate(&xn)? - &fy;
            if image_chord.is_zero() {
                continue;
            }
            let Some(gt) = tgt.smooth_gamma(&image_chord)? else {
                continue;
            };
            vals.push((gs, gt));
        }
        let stable = settled(&vals, schedule.window, &schedule.tolerance, |a, b| {
            fun_dist(&a.0, &b.0).max(fun_dist(&a.1, &b.1))
        });
        if stable.is_none() {
            continue;
        }
        let pair = vals.last().unwrap().clone();
        assert_eq!(
            pair.0.apply(&minus_y),
            Rational::one(),
            "stabilized chord functional must support the antipode of y"
        );
        if pair.1.apply(&minus_fy) != Rational::one() {
            return Err(Error::InconsistentPairs {
                defect: "image functional does not support the antipode of f(y)".into(),
            });
        }
        if !pairs.contains(&pair) {
            pairs.push(pair);
        }
    }
    if pairs.is_empty() {
        return Err(Error::NoStabilization);
    }
    pairs.sort();

    let sources: Vec<Vector> = pairs.iter().map(|p| p.0.as_vector()).collect();
    let basis = independent_subset(&sources);
    let basis_sources: Vec<Vector> = basis.iter().map(|&i| sources[i].clone()).collect();
    for (i, (g, h)) in pairs.iter().enumerate() {
        let Some(coeffs) = span_coefficients(&basis_sources, &g.as_vector()) else {
            unreachable!("basis is maximal in the sampled span");
        };
        let mut predicted = vec![Rational::zero(); tgt.dim];
        for (c, &bi) in coeffs.iter().zip(&basis) {
            for (o, e) in predicted.iter_mut().zip(&pairs[bi].1 .0) {
                *o += c * e;
            }
        }
        let defect = fun_dist(&Functional(predicted), h);
        if defect > schedule.tolerance {
            return Err(Error::InconsistentPairs {
                defect: format!(
                    "chord functional {i} deviates from the linear fit by {}",
                    format_rational(&defect)
                ),
            });
        }
    }
    Ok(DualTransport {
        y: yhat,
        fy,
        pairs,
        basis,
        source_span_dim,
        target_span_dim,
    })
}

/// Worst defect of the duality pairing <g, u> = <G g, T u> over all sampled
/// combinations of the two transports, which must share a base point.
pub fn pairing_residual(t: &TangentTransport, d: &DualTransport) -> Result<Rational> {
    if t.y != d.y {
        return Err(Error::BasePointMismatch);
    }
    let mut worst = Rational::zero();
    for (g, h) in &d.pairs {
        for (u, v) in &t.pairs {
            worst = worst.max((g.apply(u) - h.apply(v)).abs());
        }
    }
    Ok(worst)
}

/// Stabilized limit of (F(y + t z) - F(y)) / t for the homogeneous
/// extension F of the map.
pub fn gateaux_derivative(
    f: &SphereMap,
    y: &Vector,
    z: &Vector,
    schedule: &LimitSchedule,
) -> Result<Vector> {
    y.expect_dim(f.source.dim)?;
    z.expect_dim(f.source.dim)?;
    if y.is_zero() {
        return Err(Error::ZeroVector);
    }
    let base = f.evaluate_extension(y)?;
    let mut vals: Vec<Vector> = Vec::new();
    for k in 1..=schedule.depth {
        let t = schedule.step(k);
        let shifted = f.evaluate_extension(&(y + &z.scale(&t)))?;
        vals.push((&shifted - &base).scale(&(Rational::one() / &t)));
        if settled(&vals, schedule.window, &schedule.tolerance, vec_dist).is_some() {
            return Ok(vals.last().unwrap().clone());
        }
    }
    Err(Error::NoStabilization)
}

/// Residual of the derivative formula
///
/// F'(y)(z) = d f(y) + T(z - d y),  d the one-sided norm derivative at y
/// in direction z,
///
/// measured in the target norm against the directly computed derivative of
/// the extension. The membership of z - d y in the tangent span at y is
/// verified by an exact rank test before the transport is applied.
pub fn derivative_formula_residual(
    f: &SphereMap,
    y: &Vector,
    z: &Vector,
    schedule: &LimitSchedule,
) -> Result<Rational> {
    let yhat = f.source.normalize(y)?;
    let nd = norm_directional_derivative(&f.source, &yhat, z)?;
    let w = z - &yhat.scale(&nd.value);
    let generators = f.source.tangent_directions(&yhat)?.generators;
    let base_rank = rank(&generators);
    let mut extended = generators.clone();
    extended.push(w.clone());
    if rank(&extended) != base_rank {
        return Err(Error::SpanViolation);
    }
    let transport = build_tangent_transport(f, &yhat, schedule)?;
    let rhs = &transport.fy.scale(&nd.value) + &transport.apply(&w)?;
    let lhs = gateaux_derivative(f, &yhat, z, schedule)?;
    f.target.norm(&(&lhs - &rhs))
}

/// Worst additivity defect ||F'(y)(z1 + z2) - F'(y)(z1) - F'(y)(z2)|| of
/// the extension's derivative over seeded probe pairs.
pub fn linearity_probe(
    f: &SphereMap,
    y: &Vector,
    probes: usize,
    seed: u64,
    schedule: &LimitSchedule,
) -> Result<Rational> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut worst = Rational::zero();
    for _ in 0..probes {
        let z1 = random_dyadic(&mut rng, f.source.dim, 64);
        let z2 = random_dyadic(&mut rng, f.source.dim, 64);
        let d1 = gateaux_derivative(f, y, &z1, schedule)?;
        let d2 = gateaux_derivative(f, y, &z2, schedule)?;
        let d12 = gateaux_derivative(f, y, &(&z1 + &z2), schedule)?;
        worst = worst.max(f.target.norm(&(&d12 - &(&d1 + &d2)))?);
    }
    Ok(worst)
}

//! Maps between unit spheres of polyhedral balls.
//!
//! A [`SphereMap`] pairs a source and target ball with one of three
//! evaluation kinds: a single matrix, a piecewise-linear assignment of one
//! matrix per facet cone, or an opaque evaluator. Construction is lenient on
//! purpose: matrices that fail to send the sphere to the sphere are accepted,
//! because detecting that failure (residual operations here, stitching in the
//! extension module) is half the point of the crate.
//!
//! Evaluators work on exact rational inputs and outputs. The only tolerance
//! in this module is the sphere-membership slack declared by opaque
//! evaluators; linear and piecewise kinds are checked exactly.

use std::collections::BTreeMap;
use std::sync::Arc;

use num::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::ball::PolyBall;
use crate::error::{Error, Result};
use crate::linalg::{rat, Matrix, Rational, Vector};

/// Sampler rejection budget for [`sample_smooth_chord_points`].
pub const CHORD_SAMPLE_BUDGET: usize = 10_000;

pub type OracleFn = Arc<dyn Fn(&Vector) -> std::result::Result<Vector, String> + Send + Sync>;

#[derive(Clone)]
pub enum MapKind {
    /// One matrix applied to every sphere point.
    Linear(Matrix),
    /// One matrix per facet id; evaluation picks the piece of the first
    /// active facet (ascending id) that has one.
    Pwl(BTreeMap<usize, Matrix>),
    /// Black-box evaluator with its declared sphere-membership tolerance.
    Oracle { eval: OracleFn, tol: Rational },
}

#[derive(Clone)]
pub struct SphereMap {
    pub source: PolyBall,
    pub target: PolyBall,
    pub kind: MapKind,
}

impl SphereMap {
    pub fn linear(source: PolyBall, target: PolyBall, matrix: Matrix) -> Result<SphereMap> {
        if source.dim != target.dim {
            return Err(Error::Validation(
                "source and target dimensions differ".into(),
            ));
        }
        if matrix.rows != source.dim || matrix.cols != source.dim {
            return Err(Error::Validation(format!(
                "matrix must be {0} x {0}",
                source.dim
            )));
        }
        Ok(SphereMap {
            source,
            target,
            kind: MapKind::Linear(matrix),
        })
    }

    pub fn pwl(
        source: PolyBall,
        target: PolyBall,
        pieces: BTreeMap<usize, Matrix>,
    ) -> Result<SphereMap> {
        if source.dim != target.dim {
            return Err(Error::Validation(
                "source and target dimensions differ".into(),
            ));
        }
        for (&j, m) in &pieces {
            if j >= source.facets.len() {
                return Err(Error::Validation(format!(
                    "piece references facet {j}, ball has {}",
                    source.facets.len()
                )));
            }
            if m.rows != source.dim || m.cols != source.dim {
                return Err(Error::Validation(format!(
                    "piece for facet {j} must be {0} x {0}",
                    source.dim
                )));
            }
        }
        Ok(SphereMap {
            source,
            target,
            kind: MapKind::Pwl(pieces),
        })
    }

    pub fn oracle(source: PolyBall, target: PolyBall, eval: OracleFn, tol: Rational) -> SphereMap {
        SphereMap {
            source,
            target,
            kind: MapKind::Oracle { eval, tol },
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.kind {
            MapKind::Linear(_) => "linear",
            MapKind::Pwl(_) => "pwl",
            MapKind::Oracle { .. } => "oracle",
        }
    }

    pub fn matrix(&self) -> Option<&Matrix> {
        match &self.kind {
            MapKind::Linear(m) => Some(m),
            _ => None,
        }
    }

    pub fn pieces(&self) -> Option<&BTreeMap<usize, Matrix>> {
        match &self.kind {
            MapKind::Pwl(p) => Some(p),
            _ => None,
        }
    }

    /// Evaluates the map at a point of the source sphere (checked exactly).
    pub fn evaluate(&self, x: &Vector) -> Result<Vector> {
        if !self.source.on_sphere(x)? {
            return Err(Error::NotOnSphere);
        }
        match &self.kind {
            MapKind::Linear(m) => Ok(m.mul_vec(x)),
            MapKind::Pwl(pieces) => {
                let support = self.source.support_set(x)?;
                let piece = support
                    .facet_ids
                    .iter()
                    .find_map(|j| pieces.get(j))
                    .ok_or(Error::MissingPiece {
                        facet: support.facet_ids[0],
                    })?;
                Ok(piece.mul_vec(x))
            }
            MapKind::Oracle { eval, .. } => {
                eval(x).map_err(|reason| Error::EvaluatorFailure { reason })
            }
        }
    }

    /// The homogeneous extension: 0 at 0, ||x|| f(x/||x||) elsewhere.
    pub fn evaluate_extension(&self, x: &Vector) -> Result<Vector> {
        let n = self.source.norm(x)?;
        if n.is_zero() {
            return Ok(Vector::zero(self.target.dim));
        }
        let unit = x.scale(&(Rational::one() / &n));
        Ok(self.evaluate(&unit)?.scale(&n))
    }

    /// Worst value of ||f(-x) + f(x)|| over seeded sphere samples; exactly
    /// zero for maps that respect antipodes on the sample set.
    pub fn antipodal_residual(&self, samples: usize, seed: u64) -> Result<Rational> {
        let mut worst = Rational::zero();
        for x in sample_sphere_points(&self.source, samples, seed)? {
            let fx = self.evaluate(&x)?;
            let fmx = self.evaluate(&-&x)?;
            let resid = self.target.norm(&(&fx + &fmx))?;
            worst = worst.max(resid);
        }
        Ok(worst)
    }

    /// Worst distance distortion | ||f(x)-f(y)|| - ||x-y|| | over the given
    /// pairs. Entries are normalized first and must be nonzero.
    pub fn isometry_residual(&self, pairs: &[(Vector, Vector)]) -> Result<Rational> {
        let mut worst = Rational::zero();
        for (a, b) in pairs {
            let x = self.source.normalize(a)?;
            let y = self.source.normalize(b)?;
            let dist = self.source.norm(&(&x - &y))?;
            let image = self.target.norm(&(&self.evaluate(&x)? - &self.evaluate(&y)?))?;
            worst = worst.max((image - dist).abs());
        }
        Ok(worst)
    }

    /// Worst sphere-membership defect | ||f(x)|| - 1 | over seeded samples.
    pub fn sphere_residual(&self, samples: usize, seed: u64) -> Result<Rational> {
        let one = Rational::one();
        let mut worst = Rational::zero();
        for x in sample_sphere_points(&self.source, samples, seed)? {
            let fx = self.evaluate(&x)?;
            worst = worst.max((self.target.norm(&fx)? - &one).abs());
        }
        Ok(worst)
    }

    /// The declared sphere-membership tolerance: zero for exact kinds.
    pub fn declared_tolerance(&self) -> Rational {
        match &self.kind {
            MapKind::Oracle { tol, .. } => tol.clone(),
            _ => Rational::zero(),
        }
    }
}

/// The homogeneous extension of a sphere map, as a value.
pub struct ExtensionMap<'a>(pub &'a SphereMap);

impl ExtensionMap<'_> {
    pub fn evaluate(&self, x: &Vector) -> Result<Vector> {
        self.0.evaluate_extension(x)
    }
}

/// Whether the open segment from x to -y misses the sphere, i.e. x is not
/// antipodally opposed to y: ||x + y|| < 2. Both points must be unit.
pub fn chord_in_open_ball(ball: &PolyBall, y: &Vector, x: &Vector) -> Result<bool> {
    for p in [x, y] {
        if !ball.on_sphere(p)? {
            return Err(Error::NotOnSphere);
        }
    }
    Ok(ball.norm(&(x + y))? < rat(2, 1))
}

/// Seeded sphere points with dyadic coordinates, normalized exactly.
pub fn sample_sphere_points(ball: &PolyBall, count: usize, seed: u64) -> Result<Vec<Vector>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut draws = 0usize;
    while out.len() < count {
        draws += 1;
        if draws > CHORD_SAMPLE_BUDGET {
            return Err(Error::SamplingExhausted {
                budget: CHORD_SAMPLE_BUDGET,
            });
        }
        let raw = random_dyadic(&mut rng, ball.dim, 64);
        if raw.is_zero() {
            continue;
        }
        out.push(ball.normalize(&raw)?);
    }
    Ok(out)
}

/// Dyadic vector with coordinates k/denom, k in [-denom, denom].
pub(crate) fn random_dyadic(rng: &mut ChaCha20Rng, dim: usize, denom: i64) -> Vector {
    Vector(
        (0..dim)
            .map(|_| rat(rng.gen_range(-denom..=denom), denom))
            .collect(),
    )
}

/// Rejection-samples `count` points x of the source sphere such that the
/// segment ]x, y[ stays in the open ball and both chord directions
/// (x - y)/||x - y|| and (f(x) - f(y))/||f(x) - f(y)|| are smooth points of
/// their spheres. Draws cover the whole sphere, so the admissible region is
/// sampled everywhere it has interior, not just near the antipode of y.
pub fn sample_smooth_chord_points(
    map: &SphereMap,
    y: &Vector,
    count: usize,
    seed: u64,
) -> Result<Vec<Vector>> {
    let ball = &map.source;
    if !ball.on_sphere(y)? {
        return Err(Error::NotOnSphere);
    }
    let fy = map.evaluate(y)?;
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out: Vec<Vector> = Vec::with_capacity(count);
    let mut draws = 0usize;
    while out.len() < count {
        draws += 1;
        if draws > CHORD_SAMPLE_BUDGET {
            return Err(Error::SamplingExhausted {
                budget: CHORD_SAMPLE_BUDGET,
            });
        }
        let w = random_dyadic(&mut rng, ball.dim, 4096);
        if w.is_zero() {
            continue;
        }
        let x = ball.normalize(&w)?;
        if !chord_in_open_ball(ball, y, &x)? {
            continue;
        }
        let chord = &x - y;
        if chord.is_zero() || ball.smooth_gamma(&chord)?.is_none() {
            continue;
        }
        let fx = map.evaluate(&x)?;
        let image_chord = &fx - &fy;
        if image_chord.is_zero() || map.target.smooth_gamma(&image_chord)?.is_none() {
            continue;
        }
        out.push(x);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::linalg::rat_int;

    #[test]
    fn linear_extension_is_homogeneous() {
        let f = corpus::rotation_square();
        let x = Vector(vec![rat_int(3), rat(3, 2)]);
        assert_eq!(
            f.evaluate_extension(&x).unwrap(),
            Vector(vec![rat(-3, 2), rat_int(3)])
        );
        assert_eq!(
            f.evaluate_extension(&Vector::zero(2)).unwrap(),
            Vector::zero(2)
        );
    }

    #[test]
    fn evaluate_requires_sphere_points() {
        let f = corpus::rotation_square();
        assert!(matches!(
            f.evaluate(&Vector::from_i64(&[2, 0])),
            Err(Error::NotOnSphere)
        ));
    }

    #[test]
    fn rotation_has_zero_residuals() {
        let f = corpus::rotation_square();
        assert_eq!(f.antipodal_residual(40, 7).unwrap(), Rational::zero());
        let pts = sample_sphere_points(&f.source, 20, 11).unwrap();
        let pairs: Vec<_> = pts
            .iter()
            .zip(pts.iter().rev())
            .filter(|(a, b)| a != b)
            .map(|(a, b)| (a.clone(), b.clone()))
            .collect();
        assert_eq!(f.isometry_residual(&pairs).unwrap(), Rational::zero());
        assert_eq!(f.sphere_residual(30, 3).unwrap(), Rational::zero());
    }

    #[test]
    fn squeeze_map_has_unit_isometry_defect() {
        let sq = corpus::square();
        let m = Matrix::from_rows(vec![
            vec![rat_int(1), rat_int(0)],
            vec![rat_int(0), rat(1, 2)],
        ]);
        let f = SphereMap::linear(sq.clone(), sq, m).unwrap();
        let pair = vec![(Vector::from_i64(&[0, 1]), Vector::from_i64(&[0, -1]))];
        assert_eq!(f.isometry_residual(&pair).unwrap(), rat_int(1));
    }

    #[test]
    fn negated_piece_breaks_antipodality() {
        let f = corpus::negated_piece_square();
        let r = f.antipodal_residual(60, 5).unwrap();
        assert!(r >= rat_int(2));
    }

    #[test]
    fn chord_region_is_symmetric_and_correct() {
        let sq = corpus::square();
        let y = Vector::from_i64(&[1, 0]);
        let x = Vector::from_i64(&[0, 1]);
        assert!(chord_in_open_ball(&sq, &y, &x).unwrap());
        assert!(chord_in_open_ball(&sq, &x, &y).unwrap());
        // The antipode itself satisfies the condition; a far edge point
        // aligned with y does not.
        assert!(chord_in_open_ball(&sq, &y, &-&y).unwrap());
        assert!(!chord_in_open_ball(&sq, &y, &Vector::from_i64(&[1, 1])).unwrap());
    }

    #[test]
    fn chord_sampler_finds_smooth_chords() {
        let f = corpus::identity_map(corpus::square());
        let y = Vector::from_i64(&[1, 0]);
        let xs = sample_smooth_chord_points(&f, &y, 16, 99).unwrap();
        assert_eq!(xs.len(), 16);
        for x in &xs {
            assert!(chord_in_open_ball(&f.source, &y, x).unwrap());
            let chord = x - &y;
            assert!(f.source.smooth_gamma(&chord).unwrap().is_some());
        }
        let again = sample_smooth_chord_points(&f, &y, 16, 99).unwrap();
        assert_eq!(xs, again);
    }

    #[test]
    fn constant_map_exhausts_the_sampler() {
        let f = corpus::constant_map(corpus::square());
        let y = Vector::from_i64(&[1, 0]);
        assert!(matches!(
            sample_smooth_chord_points(&f, &y, 4, 1),
            Err(Error::SamplingExhausted { .. })
        ));
    }
}

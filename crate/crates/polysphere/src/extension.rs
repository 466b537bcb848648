//! Recovering the linear map behind a sphere map, one facet cone at a time.
//!
//! On each facet the homogeneous extension of an onto isometry acts as a
//! single matrix, and that matrix is determined by the images of any m
//! linearly independent facet points. [`recover_pieces`] solves for it per
//! facet, [`stitch`] checks that adjacent pieces agree across every ridge
//! and that all pieces coincide, and [`verify_linear_isometry`] certifies
//! the stitched matrix by vertex norms in both directions. [`extend`] runs
//! the whole pipeline and either returns the certified matrix or the report
//! saying exactly where the pieces disagree.
//!
//! All checks are exact for linear and piecewise kinds; opaque evaluators
//! are granted their declared tolerance scaled by a fixed safety factor.

use std::collections::BTreeMap;

use num::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;

use crate::ball::PolyBall;
use crate::error::{Error, Result};
use crate::linalg::{rank, Matrix, Rational, Vector};
use crate::maps::SphereMap;

/// Seed for the per-facet sample generators; mixed with the facet id so the
/// draw is independent of recovery order.
const PIECE_SAMPLE_SEED: u64 = 0xface7;

/// Safety factor applied to an opaque evaluator's declared tolerance in all
/// piece and stitch comparisons.
const TOLERANCE_FACTOR: i64 = 10;

/// One matrix per facet of the source ball, with the sample points that
/// produced and verified each matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct PieceSet {
    pub source: PolyBall,
    pub target: PolyBall,
    pub pieces: BTreeMap<usize, Matrix>,
    /// Facet points each matrix was solved from.
    pub evidence: BTreeMap<usize, Vec<Vector>>,
    /// Comparison slack granted to these pieces (zero for exact map kinds).
    pub tolerance: Rational,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StitchStatus {
    Consistent,
    Inconsistent,
}

/// One failed agreement check between two pieces.
#[derive(Debug, Clone, PartialEq)]
pub struct Disagreement {
    /// Facet pair whose matrices differ.
    pub facets: (usize, usize),
    /// Shared ridge vertex the difference was observed at, when the check
    /// was a ridge check; `None` for the global entry-wise pass.
    pub vertex: Option<usize>,
    /// Difference vector observed (A_j v - A_k v, or the worst column of
    /// A_j - A_k for the entry-wise pass).
    pub defect: Vector,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StitchReport {
    pub status: StitchStatus,
    /// The common matrix, present exactly when consistent.
    pub matrix: Option<Matrix>,
    pub disagreements: Vec<Disagreement>,
}

/// Per-vertex norm certificate underlying an isometry verdict.
#[derive(Debug, Clone, PartialEq)]
pub struct IsometryCertificate {
    pub ok: bool,
    pub invertible: bool,
    /// ||A v||_target for every source vertex, by vertex id.
    pub forward_norms: Vec<(usize, Rational)>,
    /// ||A^{-1} w||_source for every target vertex, by vertex id; empty
    /// when A is singular.
    pub inverse_norms: Vec<(usize, Rational)>,
}

/// Outcome of the extension pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum ExtendOutcome {
    /// The pieces stitched into one matrix; the certificate states whether
    /// that matrix is a linear isometry between the two balls.
    Linear {
        matrix: Matrix,
        certificate: IsometryCertificate,
    },
    /// The pieces do not agree; the report localizes the failures.
    Inconsistent(StitchReport),
}

impl ExtendOutcome {
    pub fn certified_matrix(&self) -> Option<&Matrix> {
        match self {
            ExtendOutcome::Linear {
                matrix,
                certificate,
            } if certificate.ok => Some(matrix),
            _ => None,
        }
    }
}

/// Strictly interior point of the facet: a positive rational combination of
/// its vertices. Interior points are smooth, so piecewise maps evaluate
/// them with the facet's own matrix.
fn interior_sample(rng: &mut ChaCha20Rng, ball: &PolyBall, vertex_ids: &[usize]) -> Vector {
    let weights: Vec<Rational> = vertex_ids
        .iter()
        .map(|_| Rational::from_integer(rng.gen_range(1..=16).into()))
        .collect();
    let total: Rational = weights.iter().sum();
    let mut point = Vector::zero(ball.dim);
    for (&vi, w) in vertex_ids.iter().zip(&weights) {
        point = &point + &ball.vertices[vi].scale(&(w / &total));
    }
    point
}

fn max_abs(v: &Vector) -> Rational {
    v.0.iter()
        .map(|c| c.abs())
        .fold(Rational::zero(), Rational::max)
}

/// Solves the matrix acting on one facet cone from m linearly independent
/// facet points and their images, then verifies it on 2m fresh interior
/// samples and on their negations (the negations exercise the opposite
/// facet, so a map that is not antipodal fails here). Returns the matrix
/// and the points it was solved from.
pub fn recover_piece(f: &SphereMap, facet_id: usize) -> Result<(Matrix, Vec<Vector>)> {
    let ball = &f.source;
    let m = ball.dim;
    if facet_id >= ball.facets.len() {
        return Err(Error::Validation(format!(
            "facet {facet_id} out of range, ball has {}",
            ball.facets.len()
        )));
    }
    let vertex_ids = ball.facet_vertex_ids(facet_id);
    let third = Rational::new(1.into(), 3.into());
    let mut barycenter = Vector::zero(m);
    for &vi in vertex_ids {
        barycenter = &barycenter + &ball.vertices[vi];
    }
    barycenter = barycenter.scale(&Rational::new(1.into(), (vertex_ids.len() as i64).into()));

    let mut candidates: Vec<Vector> = vec![barycenter.clone()];
    for &vi in vertex_ids {
        let shifted = &barycenter.scale(&(Rational::one() - &third))
            + &ball.vertices[vi].scale(&third);
        candidates.push(shifted);
    }
    let mut rng = ChaCha20Rng::seed_from_u64(PIECE_SAMPLE_SEED ^ facet_id as u64);
    for _ in 0..4 * m {
        candidates.push(interior_sample(&mut rng, ball, vertex_ids));
    }

    let mut points: Vec<Vector> = Vec::with_capacity(m);
    for c in candidates {
        if points.len() == m {
            break;
        }
        let mut trial = points.clone();
        trial.push(c.clone());
        if rank(&trial) > points.len() {
            points.push(c);
        }
    }
    if points.len() < m {
        return Err(Error::SingularSampleSet { facet: facet_id });
    }

    let images: Vec<Vector> = points
        .iter()
        .map(|p| f.evaluate(p))
        .collect::<Result<_>>()?;
    let p = Matrix::from_cols(&points);
    let q = Matrix::from_cols(&images);
    let a = q.mul_mat(&p.inverse().expect("solved points are independent"));

    let tolerance = f.declared_tolerance() * Rational::from_integer(TOLERANCE_FACTOR.into());
    for _ in 0..2 * m {
        let sample = interior_sample(&mut rng, ball, vertex_ids);
        let defect = max_abs(&(&a.mul_vec(&sample) - &f.evaluate(&sample)?));
        if defect > tolerance {
            return Err(Error::VerificationFailed { facet: facet_id });
        }
        let negated = -&sample;
        let opposite_defect = max_abs(&(&a.mul_vec(&negated) - &f.evaluate(&negated)?));
        if opposite_defect > tolerance {
            return Err(Error::VerificationFailed {
                facet: ball.opposite_facet(facet_id),
            });
        }
    }
    Ok((a, points))
}

/// Recovers the matrix on every facet cone, solving one representative per
/// antipodal facet pair in parallel and reusing its matrix for the opposite
/// facet (the negation checks in [`recover_piece`] justify the reuse).
pub fn recover_pieces(f: &SphereMap) -> Result<PieceSet> {
    let ball = &f.source;
    let representatives: Vec<usize> = (0..ball.facets.len())
        .filter(|&j| ball.opposite_facet(j) >= j)
        .collect();
    let solved: Vec<(usize, Matrix, Vec<Vector>)> = representatives
        .par_iter()
        .map(|&j| recover_piece(f, j).map(|(a, ev)| (j, a, ev)))
        .collect::<Result<_>>()?;

    let mut pieces = BTreeMap::new();
    let mut evidence = BTreeMap::new();
    for (j, a, ev) in solved {
        let opposite = ball.opposite_facet(j);
        let negated: Vec<Vector> = ev.iter().map(|p| -p).collect();
        pieces.insert(j, a.clone());
        evidence.insert(j, ev);
        pieces.insert(opposite, a);
        evidence.insert(opposite, negated);
    }
    Ok(PieceSet {
        source: f.source.clone(),
        target: f.target.clone(),
        pieces,
        evidence,
        tolerance: f.declared_tolerance() * Rational::from_integer(TOLERANCE_FACTOR.into()),
    })
}

/// Returns a copy of the piece set with one entry of one piece shifted by
/// `delta`, leaving every other piece (including the antipodal twin) alone.
pub fn perturb_piece(
    pieces: &PieceSet,
    facet: usize,
    row: usize,
    col: usize,
    delta: &Rational,
) -> Result<PieceSet> {
    let mut out = pieces.clone();
    let matrix = out
        .pieces
        .get_mut(&facet)
        .ok_or(Error::MissingPiece { facet })?;
    *matrix.at_mut(row, col) += delta;
    Ok(out)
}

/// Checks the pieces against each other: first across every ridge of the
/// face lattice (A_j v = A_k v on each shared ridge vertex), then globally
/// entry-wise. Ridge agreement alone only pins the matrices down on the
/// ridge spans, which is why the entry-wise pass decides the verdict; the
/// ridge pass exists to localize failures to a named shared vertex.
pub fn stitch(pieces: &PieceSet) -> Result<StitchReport> {
    let ball = &pieces.source;
    for j in 0..ball.facets.len() {
        if !pieces.pieces.contains_key(&j) {
            return Err(Error::MissingPiece { facet: j });
        }
    }
    let tol = &pieces.tolerance;
    let mut disagreements: Vec<Disagreement> = Vec::new();
    for ridge in &ball.lattice.ridges {
        let (j, k) = ridge.facets;
        let a = &pieces.pieces[&j];
        let b = &pieces.pieces[&k];
        if a == b {
            continue;
        }
        for &vid in &ball.lattice.faces[ridge.face].vertex_ids {
            let v = &ball.vertices[vid];
            let defect = &a.mul_vec(v) - &b.mul_vec(v);
            if max_abs(&defect) > *tol {
                disagreements.push(Disagreement {
                    facets: (j, k),
                    vertex: Some(vid),
                    defect,
                });
            }
        }
    }
    let reference = &pieces.pieces[&0];
    for (&j, a) in pieces.pieces.iter().skip(1) {
        let mut worst_col = None;
        let mut worst = tol.clone();
        for c in 0..a.cols {
            let mut diff = Vector::zero(a.rows);
            for r in 0..a.rows {
                diff.0[r] = reference.at(r, c) - a.at(r, c);
            }
            let d = max_abs(&diff);
            if d > worst {
                worst = d;
                worst_col = Some(diff);
            }
        }
        if let Some(defect) = worst_col {
            disagreements.push(Disagreement {
                facets: (0, j),
                vertex: None,
                defect,
            });
        }
    }
    if disagreements.is_empty() {
        Ok(StitchReport {
            status: StitchStatus::Consistent,
            matrix: Some(reference.clone()),
            disagreements,
        })
    } else {
        Ok(StitchReport {
            status: StitchStatus::Inconsistent,
            matrix: None,
            disagreements,
        })
    }
}

/// Certifies whether A maps the source ball isometrically onto the target
/// ball: every source vertex must land on the target sphere and, with A
/// invertible, every target vertex must pull back to the source sphere.
/// Checking vertices suffices: by convexity the vertex bounds give
/// ||A|| <= 1 and ||A^{-1}|| <= 1, which forces equality everywhere.
pub fn verify_linear_isometry(
    a: &Matrix,
    source: &PolyBall,
    target: &PolyBall,
) -> Result<IsometryCertificate> {
    if a.rows != target.dim || a.cols != source.dim || source.dim != target.dim {
        return Err(Error::DimensionMismatch {
            expected: source.dim,
            got: a.rows,
        });
    }
    let one = Rational::one();
    let mut ok = true;
    let mut forward_norms = Vec::with_capacity(source.vertices.len());
    for (i, v) in source.vertices.iter().enumerate() {
        let n = target.norm(&a.mul_vec(v))?;
        ok &= n == one;
        forward_norms.push((i, n));
    }
    let mut inverse_norms = Vec::new();
    let invertible = match a.inverse() {
        Some(inv) => {
            for (i, w) in target.vertices.iter().enumerate() {
                let n = source.norm(&inv.mul_vec(w))?;
                ok &= n == one;
                inverse_norms.push((i, n));
            }
            true
        }
        None => {
            ok = false;
            false
        }
    };
    Ok(IsometryCertificate {
        ok,
        invertible,
        forward_norms,
        inverse_norms,
    })
}

/// The full pipeline: recover a matrix per facet cone, stitch, and certify.
/// A consistent stitch always carries a matrix; the certificate then states
/// whether that matrix is an isometry, so a caller never has to trust a
/// returned matrix without its certificate.
pub fn extend(f: &SphereMap) -> Result<ExtendOutcome> {
    let pieces = recover_pieces(f)?;
    let report = stitch(&pieces)?;
    match report.matrix.clone() {
        Some(matrix) => {
            let certificate = verify_linear_isometry(&matrix, &f.source, &f.target)?;
            Ok(ExtendOutcome::Linear {
                matrix,
                certificate,
            })
        }
        None => Ok(ExtendOutcome::Inconsistent(report)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::linalg::{rat, rat_int};

    #[test]
    fn pieces_of_a_linear_map_are_the_matrix() {
        let f = corpus::rotation_square();
        let set = recover_pieces(&f).unwrap();
        assert_eq!(set.pieces.len(), 4);
        for a in set.pieces.values() {
            assert_eq!(a, f.matrix().unwrap());
        }
        for (j, ev) in &set.evidence {
            assert_eq!(ev.len(), 2);
            for p in ev {
                assert!(f.source.on_sphere(p).unwrap());
                assert_eq!(f.source.facets[*j].apply(p), rat_int(1));
            }
        }
    }

    #[test]
    fn stitch_accepts_consistent_pieces_and_returns_the_matrix() {
        let f = corpus::square_to_diamond();
        let outcome = extend(&f).unwrap();
        match outcome {
            ExtendOutcome::Linear {
                matrix,
                certificate,
            } => {
                assert_eq!(matrix, *f.matrix().unwrap());
                assert!(certificate.ok);
            }
            ExtendOutcome::Inconsistent(_) => panic!("expected a linear outcome"),
        }
    }

    #[test]
    fn stitch_localizes_the_ridge_defect() {
        let f = corpus::ridge_defect_square();
        let set = recover_pieces(&f).unwrap();
        let report = stitch(&set).unwrap();
        assert_eq!(report.status, StitchStatus::Inconsistent);
        assert!(report.matrix.is_none());
        // The bad ridges are the vertices (1,-1) and (-1,1), where the
        // sheared pieces meet the identity pieces.
        let bad = Vector::from_i64(&[1, -1]);
        assert!(report.disagreements.iter().any(|d| {
            d.vertex
                .map(|vid| f.source.vertices[vid] == bad || f.source.vertices[vid] == -&bad)
                .unwrap_or(false)
        }));
    }

    #[test]
    fn single_entry_perturbations_are_detected_with_a_named_ridge() {
        let f = corpus::identity_map(corpus::square());
        let set = recover_pieces(&f).unwrap();
        for k in 1..=20u32 {
            let delta = Rational::new(1.into(), (1i64 << k).into());
            let bad = perturb_piece(&set, 3, 0, 1, &delta).unwrap();
            let report = stitch(&bad).unwrap();
            assert_eq!(report.status, StitchStatus::Inconsistent);
            assert!(report.disagreements.iter().any(|d| d.vertex.is_some()));
        }
    }

    #[test]
    fn missing_piece_is_reported() {
        let f = corpus::identity_map(corpus::square());
        let mut set = recover_pieces(&f).unwrap();
        set.pieces.remove(&2);
        assert_eq!(stitch(&set).unwrap_err(), Error::MissingPiece { facet: 2 });
        assert!(matches!(
            perturb_piece(&set, 2, 0, 0, &rat_int(1)),
            Err(Error::MissingPiece { facet: 2 })
        ));
    }

    #[test]
    fn certificate_knows_isometries_from_contractions() {
        let sq = corpus::square();
        let di = corpus::diamond();
        let rot = corpus::rotation_square();
        assert!(verify_linear_isometry(rot.matrix().unwrap(), &sq, &sq)
            .unwrap()
            .ok);
        let r0 = corpus::square_to_diamond();
        assert!(verify_linear_isometry(r0.matrix().unwrap(), &sq, &di)
            .unwrap()
            .ok);

        // The squeeze keeps every square vertex at norm one going forward
        // ((1,1) lands on (1,1/2)), so the inverse direction is the check
        // that actually catches it: A^{-1}(1,1) = (1,2).
        let squeeze = Matrix::from_rows(vec![
            vec![rat_int(1), rat_int(0)],
            vec![rat_int(0), rat(1, 2)],
        ]);
        let cert = verify_linear_isometry(&squeeze, &sq, &sq).unwrap();
        assert!(!cert.ok);
        assert!(cert.invertible);
        assert!(cert.forward_norms.iter().all(|(_, n)| *n == rat_int(1)));
        assert!(cert.inverse_norms.iter().any(|(_, n)| *n == rat_int(2)));

        let singular = Matrix::from_rows(vec![
            vec![rat_int(1), rat_int(1)],
            vec![rat_int(1), rat_int(1)],
        ]);
        let cert = verify_linear_isometry(&singular, &sq, &sq).unwrap();
        assert!(!cert.ok);
        assert!(!cert.invertible);
        assert!(cert.inverse_norms.is_empty());
    }

    #[test]
    fn extend_flags_the_inconsistent_map() {
        let f = corpus::ridge_defect_square();
        match extend(&f).unwrap() {
            ExtendOutcome::Inconsistent(report) => {
                assert!(!report.disagreements.is_empty());
            }
            ExtendOutcome::Linear { .. } => panic!("expected an inconsistent outcome"),
        }
        assert_eq!(extend(&f).unwrap(), extend(&f).unwrap());
    }

    #[test]
    fn non_antipodal_maps_fail_piece_verification() {
        let f = corpus::constant_map(corpus::square());
        assert!(matches!(
            recover_pieces(&f),
            Err(Error::VerificationFailed { .. })
        ));
    }

    #[test]
    fn extension_works_in_dimension_three() {
        let cube = corpus::cube3();
        let mut m = Matrix::zero(3, 3);
        *m.at_mut(0, 1) = rat_int(1);
        *m.at_mut(1, 0) = rat_int(-1);
        *m.at_mut(2, 2) = rat_int(1);
        let f = SphereMap::linear(cube.clone(), cube, m.clone()).unwrap();
        match extend(&f).unwrap() {
            ExtendOutcome::Linear {
                matrix,
                certificate,
            } => {
                assert_eq!(matrix, m);
                assert!(certificate.ok);
            }
            ExtendOutcome::Inconsistent(_) => panic!("expected a linear outcome"),
        }
    }
}

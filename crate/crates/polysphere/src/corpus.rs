//! Named reference balls and a seeded generator for random symmetric balls.
//!
//! The fixed balls are the standing test corpus for the whole crate; every
//! module's tests and the acceptance suite lean on them. Constructors panic
//! on failure since their vertex lists are statically valid.

use std::collections::BTreeMap;
use std::sync::Arc;

use num::{BigInt, One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::ball::PolyBall;
use crate::linalg::{rank, rat, rat_int, Functional, Matrix, Rational, Vector};
use crate::lp;
use crate::maps::{OracleFn, SphereMap};

fn ball(dim: usize, coords: &[&[i64]]) -> PolyBall {
    let vertices = coords.iter().map(|c| Vector::from_i64(c)).collect();
    PolyBall::from_vertices(dim, vertices).expect("corpus ball is valid")
}

/// Sup-norm square: vertices (+-1, +-1).
pub fn square() -> PolyBall {
    ball(2, &[&[1, 1], &[1, -1], &[-1, 1], &[-1, -1]])
}

/// Sum-norm diamond: vertices +-e1, +-e2.
pub fn diamond() -> PolyBall {
    ball(2, &[&[1, 0], &[-1, 0], &[0, 1], &[0, -1]])
}

/// Hexagon hull{+-(1,0), +-(0,1), +-(1,1)}.
pub fn hexagon() -> PolyBall {
    ball(2, &[&[1, 0], &[-1, 0], &[0, 1], &[0, -1], &[1, 1], &[-1, -1]])
}

/// Sup-norm cube in dimension 3.
pub fn cube3() -> PolyBall {
    ball(
        3,
        &[
            &[1, 1, 1],
            &[1, 1, -1],
            &[1, -1, 1],
            &[1, -1, -1],
            &[-1, 1, 1],
            &[-1, 1, -1],
            &[-1, -1, 1],
            &[-1, -1, -1],
        ],
    )
}

/// Sum-norm octahedron in dimension 3.
pub fn octahedron3() -> PolyBall {
    ball(
        3,
        &[
            &[1, 0, 0],
            &[-1, 0, 0],
            &[0, 1, 0],
            &[0, -1, 0],
            &[0, 0, 1],
            &[0, 0, -1],
        ],
    )
}

/// All five fixed corpus balls with their conventional names.
pub fn all_named() -> Vec<(&'static str, PolyBall)> {
    vec![
        ("square", square()),
        ("diamond", diamond()),
        ("hexagon", hexagon()),
        ("cube3", cube3()),
        ("oct3", octahedron3()),
    ]
}

/// Draws a random symmetric full-dimensional ball with at most `max_vertices`
/// vertices (counting antipodes), deterministically from the seed.
///
/// Candidate points get dyadic coordinates, the set is closed under negation,
/// non-extreme points are filtered out with the hull oracle, and degenerate
/// draws are retried. Always terminates: the cross-polytope vertices are
/// added first, so the hull is full-dimensional from the start.
pub fn random_symmetric_ball(dim: usize, max_vertices: usize, seed: u64) -> PolyBall {
    assert!(dim >= 2 && max_vertices >= 2 * dim);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let denom = BigInt::from(16);
    loop {
        let mut points: Vec<Vector> = Vec::new();
        for i in 0..dim {
            let mut e = Vector::zero(dim);
            e.0[i] = Rational::one();
            points.push(e.clone());
            points.push(-&e);
        }
        let extra_pairs = rng.gen_range(0..=(max_vertices - 2 * dim) / 2);
        for _ in 0..extra_pairs {
            let p = Vector(
                (0..dim)
                    .map(|_| {
                        let n = rng.gen_range(-24i64..=24);
                        Rational::new(BigInt::from(n), denom.clone())
                    })
                    .collect(),
            );
            if p.is_zero() {
                continue;
            }
            points.push(p.clone());
            points.push(-&p);
        }
        let kept = extreme_subset(points);
        if kept.len() > max_vertices || rank(&kept) < dim {
            continue;
        }
        match PolyBall::from_vertices(dim, kept) {
            Ok(b) => return b,
            Err(_) => continue,
        }
    }
}

fn facet_id(ball: &PolyBall, coords: &[i64]) -> usize {
    let f = Functional::from_i64(coords);
    ball.facets
        .iter()
        .position(|c| *c == f)
        .expect("corpus facet is present")
}

/// Identity sphere map on `ball`.
pub fn identity_map(ball: PolyBall) -> SphereMap {
    let m = Matrix::identity(ball.dim);
    SphereMap::linear(ball.clone(), ball, m).expect("identity map is valid")
}

/// Quarter-turn rotation of the square, a linear onto isometry.
pub fn rotation_square() -> SphereMap {
    let m = Matrix::from_rows(vec![
        vec![rat_int(0), rat_int(-1)],
        vec![rat_int(1), rat_int(0)],
    ]);
    SphereMap::linear(square(), square(), m).expect("rotation is valid")
}

/// The linear isometry from the square onto the diamond that sends
/// (1, 1) to e1 and (1, -1) to e2.
pub fn square_to_diamond() -> SphereMap {
    let m = Matrix::from_rows(vec![
        vec![rat(1, 2), rat(1, 2)],
        vec![rat(1, 2), rat(-1, 2)],
    ]);
    SphereMap::linear(square(), diamond(), m).expect("square-to-diamond is valid")
}

/// Piecewise map on the square that shears the x1 = +-1 facets while leaving
/// the x2 = +-1 facets alone. Antipodal, sphere-valid on every piece, but
/// the pieces disagree at the ridge vertex (1, -1), so the map is not the
/// restriction of any single linear map.
pub fn ridge_defect_square() -> SphereMap {
    let sq = square();
    let shear = Matrix::from_rows(vec![
        vec![rat_int(1), rat_int(0)],
        vec![rat(1, 2), rat(1, 2)],
    ]);
    let id = Matrix::identity(2);
    let mut pieces = BTreeMap::new();
    pieces.insert(facet_id(&sq, &[1, 0]), shear.clone());
    pieces.insert(facet_id(&sq, &[-1, 0]), shear);
    pieces.insert(facet_id(&sq, &[0, 1]), id.clone());
    pieces.insert(facet_id(&sq, &[0, -1]), id);
    SphereMap::pwl(sq.clone(), sq, pieces).expect("ridge-defect map is valid")
}

/// Piecewise map on the square that negates the x1 = 1 facet only, breaking
/// antipodality away from the corners.
pub fn negated_piece_square() -> SphereMap {
    let sq = square();
    let mut neg = Matrix::identity(2);
    *neg.at_mut(0, 0) = rat_int(-1);
    *neg.at_mut(1, 1) = rat_int(-1);
    let id = Matrix::identity(2);
    let mut pieces = BTreeMap::new();
    pieces.insert(facet_id(&sq, &[1, 0]), neg);
    pieces.insert(facet_id(&sq, &[-1, 0]), id.clone());
    pieces.insert(facet_id(&sq, &[0, 1]), id.clone());
    pieces.insert(facet_id(&sq, &[0, -1]), id);
    SphereMap::pwl(sq.clone(), sq, pieces).expect("negated-piece map is valid")
}

/// Piecewise map on the cube that applies the shear
/// (x1, x2, x3) -> (x1 + delta (x2 - x3), x2, x3) on the x3 = +-1 facets and
/// the identity elsewhere. Antipodal, but the pieces meeting at any vertex of
/// the twisted facets are not simultaneously linearizable.
pub fn twisted_cube(delta: Rational) -> SphereMap {
    let cube = cube3();
    let mut twist = Matrix::identity(3);
    *twist.at_mut(0, 1) = delta.clone();
    *twist.at_mut(0, 2) = -delta;
    let id = Matrix::identity(3);
    let mut pieces = BTreeMap::new();
    for j in 0..cube.facets.len() {
        pieces.insert(j, id.clone());
    }
    pieces.insert(facet_id(&cube, &[0, 0, 1]), twist.clone());
    pieces.insert(facet_id(&cube, &[0, 0, -1]), twist);
    SphereMap::pwl(cube.clone(), cube, pieces).expect("twisted cube map is valid")
}

/// Opaque map sending every sphere point to one fixed vertex. Useful for
/// exercising sampler exhaustion and evaluator plumbing.
pub fn constant_map(ball: PolyBall) -> SphereMap {
    let v = ball.vertices[0].clone();
    let eval: OracleFn = Arc::new(move |_: &Vector| Ok(v.clone()));
    SphereMap::oracle(ball.clone(), ball, eval, Rational::zero())
}

/// Wraps any sphere map behind the opaque-evaluator interface, preserving its
/// behavior while hiding its structure.
pub fn oracle_wrap(map: &SphereMap) -> SphereMap {
    let inner = map.clone();
    let eval: OracleFn = Arc::new(move |x: &Vector| {
        inner.evaluate(x).map_err(|e| e.to_string())
    });
    SphereMap::oracle(
        map.source.clone(),
        map.target.clone(),
        eval,
        Rational::zero(),
    )
}

/// Keeps exactly the extreme points of the hull of `points`, preserving
/// antipodal pairing.
fn extreme_subset(points: Vec<Vector>) -> Vec<Vector> {
    let mut kept: Vec<Vector> = Vec::new();
    // Dedup first so the extremality test is meaningful.
    for p in points {
        if !kept.contains(&p) {
            kept.push(p);
        }
    }
    loop {
        let mut removed = false;
        for i in 0..kept.len() {
            let others: Vec<Vector> = kept
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| v.clone())
                .collect();
            if lp::in_hull(&others, &kept[i]) {
                let gone = kept.remove(i);
                kept.retain(|v| *v != -&gone);
                removed = true;
                break;
            }
        }
        if !removed {
            return kept;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corpus_counts() {
        assert_eq!(square().facets.len(), 4);
        assert_eq!(diamond().facets.len(), 4);
        assert_eq!(hexagon().facets.len(), 6);
        assert_eq!(cube3().facets.len(), 6);
        assert_eq!(octahedron3().facets.len(), 8);
    }

    #[test]
    fn random_balls_are_reproducible() {
        let a = random_symmetric_ball(2, 8, 42);
        let b = random_symmetric_ball(2, 8, 42);
        assert_eq!(a.vertices, b.vertices);
        assert_eq!(a.facets, b.facets);
    }

    #[test]
    fn random_ball_dimensions() {
        for seed in [1u64, 2, 3] {
            let b = random_symmetric_ball(3, 12, seed);
            assert_eq!(b.dim, 3);
            assert!(b.vertices.len() <= 12);
        }
    }
}

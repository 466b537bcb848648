//! Brute-force enumeration of all linear isometries between two balls.
//!
//! This is the independent ground truth the extension pipeline is checked
//! against. A linear isometry maps vertices bijectively to vertices and
//! commutes with negation, so the search walks assignments of antipodal
//! vertex pairs, realizes a matrix by exact linear solve as soon as the
//! assigned vertices span the space, and keeps it only if the full
//! isometry certificate passes. Everything is rational, so membership in
//! the result list is exact.

use rayon::prelude::*;

use crate::ball::PolyBall;
use crate::extension::verify_linear_isometry;
use crate::linalg::{independent_subset, rank, Matrix, Rational, Vector};

/// Canonical summary preserved by every linear isometry. Equal fingerprints
/// are necessary for the balls to be isometric, never sufficient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BallFingerprint {
    pub dim: usize,
    pub vertex_count: usize,
    pub facet_count: usize,
    /// Face counts indexed by face dimension.
    pub face_census: Vec<usize>,
    /// Sorted multiset of pairwise vertex distances, each in the ball's
    /// own norm.
    pub distances: Vec<Rational>,
}

pub fn invariant_fingerprint(ball: &PolyBall) -> BallFingerprint {
    let n = ball.vertices.len();
    let mut distances = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            let diff = &ball.vertices[i] - &ball.vertices[j];
            distances.push(ball.norm(&diff).expect("vertices share the dimension"));
        }
    }
    distances.sort();
    BallFingerprint {
        dim: ball.dim,
        vertex_count: n,
        facet_count: ball.facets.len(),
        face_census: ball.lattice.census(ball.dim),
        distances,
    }
}

/// Sorted distances from one vertex to every other vertex, the per-vertex
/// pruning key of the matcher.
fn vertex_profiles(ball: &PolyBall) -> Vec<Vec<Rational>> {
    let n = ball.vertices.len();
    (0..n)
        .map(|i| {
            let mut d: Vec<Rational> = (0..n)
                .filter(|&j| j != i)
                .map(|j| {
                    let diff = &ball.vertices[i] - &ball.vertices[j];
                    ball.norm(&diff).expect("vertices share the dimension")
                })
                .collect();
            d.sort();
            d
        })
        .collect()
}

fn antipode_ids(ball: &PolyBall) -> Vec<usize> {
    ball.vertices
        .iter()
        .map(|v| {
            let neg = -v;
            ball.vertices
                .iter()
                .position(|u| *u == neg)
                .expect("ball vertices are symmetric")
        })
        .collect()
}

struct Matcher<'a> {
    source: &'a PolyBall,
    target: &'a PolyBall,
    source_profiles: Vec<Vec<Rational>>,
    target_profiles: Vec<Vec<Rational>>,
    target_antipodes: Vec<usize>,
    /// Source representatives of antipodal pairs, in assignment order.
    reps: Vec<usize>,
    prune: bool,
}

impl Matcher<'_> {
    /// Solves the matrix determined by the assignment and keeps it when the
    /// isometry certificate passes. The assignment spans the source space,
    /// so the solve is exact and every later vertex image is forced; pairs
    /// outside the solving subset are cross-checked first.
    fn realize(&self, assignment: &[(usize, usize)], out: &mut Vec<Matrix>) {
        let sources: Vec<Vector> = assignment
            .iter()
            .map(|&(v, _)| self.source.vertices[v].clone())
            .collect();
        let subset = independent_subset(&sources);
        let p = Matrix::from_cols(&subset.iter().map(|&i| sources[i].clone()).collect::<Vec<_>>());
        let q = Matrix::from_cols(
            &subset
                .iter()
                .map(|&i| self.target.vertices[assignment[i].1].clone())
                .collect::<Vec<_>>(),
        );
        let a = q.mul_mat(&p.inverse().expect("subset spans the space"));
        for &(v, w) in assignment {
            if a.mul_vec(&self.source.vertices[v]) != self.target.vertices[w] {
                return;
            }
        }
        let cert = verify_linear_isometry(&a, self.source, self.target)
            .expect("dimensions were checked up front");
        if cert.ok {
            out.push(a);
        }
    }

    /// Target vertices the next representative may map to, honoring the
    /// used-pair bookkeeping and, in pruned mode, the profile and pairwise
    /// distance invariants.
    fn candidates(&self, rep: usize, assignment: &[(usize, usize)], used: &[bool]) -> Vec<usize> {
        (0..self.target.vertices.len())
            .filter(|&w| {
                if used[w] {
                    return false;
                }
                if !self.prune {
                    return true;
                }
                if self.source_profiles[rep] != self.target_profiles[w] {
                    return false;
                }
                assignment.iter().all(|&(v, img)| {
                    let sd = &self.source.vertices[rep] - &self.source.vertices[v];
                    let td = &self.target.vertices[w] - &self.target.vertices[img];
                    let ss = &self.source.vertices[rep] + &self.source.vertices[v];
                    let ts = &self.target.vertices[w] + &self.target.vertices[img];
                    self.source.norm(&sd).unwrap() == self.target.norm(&td).unwrap()
                        && self.source.norm(&ss).unwrap() == self.target.norm(&ts).unwrap()
                })
            })
            .collect()
    }

    /// Returns true when the limit was reached and the search should stop.
    fn dfs(
        &self,
        depth: usize,
        assignment: &mut Vec<(usize, usize)>,
        used: &mut Vec<bool>,
        out: &mut Vec<Matrix>,
        limit: Option<usize>,
    ) -> bool {
        let sources: Vec<Vector> = assignment
            .iter()
            .map(|&(v, _)| self.source.vertices[v].clone())
            .collect();
        if rank(&sources) == self.source.dim {
            self.realize(assignment, out);
            return limit.is_some_and(|l| out.len() >= l);
        }
        if depth == self.reps.len() {
            return false;
        }
        let rep = self.reps[depth];
        for w in self.candidates(rep, assignment, used) {
            assignment.push((rep, w));
            used[w] = true;
            used[self.target_antipodes[w]] = true;
            let stop = self.dfs(depth + 1, assignment, used, out, limit);
            assignment.pop();
            used[w] = false;
            used[self.target_antipodes[w]] = false;
            if stop {
                return true;
            }
        }
        false
    }
}

fn search(source: &PolyBall, target: &PolyBall, limit: Option<usize>, prune: bool) -> Vec<Matrix> {
    if source.dim != target.dim {
        return Vec::new();
    }
    if prune && invariant_fingerprint(source) != invariant_fingerprint(target) {
        return Vec::new();
    }
    let source_antipodes = antipode_ids(source);
    let mut reps: Vec<usize> = (0..source.vertices.len())
        .filter(|&v| source_antipodes[v] > v)
        .collect();
    let source_profiles = vertex_profiles(source);
    let target_profiles = vertex_profiles(target);
    if prune {
        reps.sort_by_key(|&v| {
            let matches = target_profiles
                .iter()
                .filter(|p| **p == source_profiles[v])
                .count();
            (matches, v)
        });
    }
    let matcher = Matcher {
        source,
        target,
        source_profiles,
        target_profiles,
        target_antipodes: antipode_ids(target),
        reps,
        prune,
    };

    let mut found = if limit.is_none() {
        let first = matcher.reps[0];
        let roots = matcher.candidates(first, &[], &vec![false; target.vertices.len()]);
        roots
            .par_iter()
            .map(|&w| {
                let mut assignment = vec![(first, w)];
                let mut used = vec![false; target.vertices.len()];
                used[w] = true;
                used[matcher.target_antipodes[w]] = true;
                let mut out = Vec::new();
                matcher.dfs(1, &mut assignment, &mut used, &mut out, None);
                out
            })
            .reduce(Vec::new, |mut acc, mut part| {
                acc.append(&mut part);
                acc
            })
    } else {
        let mut out = Vec::new();
        matcher.dfs(
            0,
            &mut Vec::new(),
            &mut vec![false; target.vertices.len()],
            &mut out,
            limit,
        );
        out
    };
    found.sort();
    found.dedup();
    found
}

/// All linear isometries from the source ball onto the target ball, sorted
/// by matrix entries, or the first `limit` found when a limit is given.
/// Unequal dimensions yield the empty list immediately; an empty list is
/// the definitive answer that no linear isometry exists.
pub fn enumerate_isometries(
    source: &PolyBall,
    target: &PolyBall,
    limit: Option<usize>,
) -> Vec<Matrix> {
    search(source, target, limit, true)
}

/// Slow-path variant of [`enumerate_isometries`] with every matching
/// heuristic disabled: no fingerprint gate, no profile filter, no pairwise
/// distance checks. Each spanning assignment is realized and verified
/// outright, so agreement with the pruned search certifies that pruning
/// discards no isometry.
pub fn enumerate_isometries_unpruned(
    source: &PolyBall,
    target: &PolyBall,
    limit: Option<usize>,
) -> Vec<Matrix> {
    search(source, target, limit, false)
}

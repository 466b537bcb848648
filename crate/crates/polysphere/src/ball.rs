//! Polyhedral unit balls with exact vertex and facet descriptions.
//!
//! A ball here is the convex hull of a centrally symmetric, full-dimensional
//! finite vertex set in dimension m >= 2, with the origin interior. Both
//! representations are kept: the vertex list as given by the caller, and the
//! facet functionals normalized so that a facet is {x : <c, x> = 1} with
//! <c, v> <= 1 for every vertex. Facet ids are positions in the facet list,
//! which is sorted by coefficient vectors, so ids are stable for a given
//! vertex set. All geometry in this module is exact rational arithmetic; the
//! intended working range is m <= 6 and at most a few dozen vertices.
//!
//! Facet enumeration is deliberately brute force: every m-subset of vertices
//! that spans a hyperplane missing the origin proposes a supporting
//! functional, kept when no vertex lies strictly outside. The face lattice is
//! recovered from vertex-facet incidence by closing the facet vertex sets
//! under intersection.

use std::collections::{BTreeMap, BTreeSet};

use itertools::Itertools;
use num::{One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::error::{Error, Result};
use crate::linalg::{rank, solve, Functional, Matrix, Rational, Vector};
use crate::lp;

/// Number of seeded facet-interior tangent directions added to the exact
/// generators, and the fixed seed used to draw them.
const TANGENT_INTERIOR_SAMPLES: usize = 8;
const TANGENT_SAMPLE_SEED: u64 = 0x7ab1e5;

/// A proper face, identified by the vertices it contains and the facets it
/// lies on. `dim` is the affine dimension of the vertex set.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Face {
    pub dim: usize,
    pub vertex_ids: Vec<usize>,
    pub facet_ids: Vec<usize>,
}

/// A ridge together with the unique pair of facets meeting there.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RidgeAdjacency {
    pub face: usize,
    pub facets: (usize, usize),
}

/// All proper faces (dimensions 0 through m-1), sorted by (dim, vertex ids),
/// plus the ridge adjacency between facets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FaceLattice {
    pub faces: Vec<Face>,
    pub ridges: Vec<RidgeAdjacency>,
}

impl FaceLattice {
    /// Face counts indexed by dimension.
    pub fn census(&self, dim: usize) -> Vec<usize> {
        let mut counts = vec![0usize; dim];
        for f in &self.faces {
            counts[f.dim] += 1;
        }
        counts
    }
}

/// The set of support functionals at a sphere point: the face of the dual
/// ball whose extreme points are the facet functionals active at the point.
#[derive(Debug, Clone)]
pub struct SupportSet {
    pub base: Vector,
    pub facet_ids: Vec<usize>,
    pub extreme_points: Vec<Functional>,
    /// Dimension of the linear span of the support set.
    pub span_dim: usize,
}

impl SupportSet {
    pub fn is_smooth(&self) -> bool {
        self.facet_ids.len() == 1
    }
}

/// Unit directions u that arise as limits of (y - z)/||y - z|| for sphere
/// points z -> y. For smooth y this is the whole unit sphere of ker(gamma);
/// in general it is the boundary of the cone {u : <c, u> >= 0 for all active
/// c}, met with the sphere. `generators` is a finite exact presentation:
/// normalized directions from y to every vertex of every active facet, plus
/// a few seeded facet-interior directions. Every generator u satisfies
/// norm(y - t u) = 1 exactly for small t > 0.
#[derive(Debug, Clone)]
pub struct TangentSet {
    pub base: Vector,
    pub is_smooth: bool,
    pub generators: Vec<Vector>,
    pub span_dim: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolyBall {
    pub dim: usize,
    pub vertices: Vec<Vector>,
    pub facets: Vec<Functional>,
    pub lattice: FaceLattice,
    /// For each facet, the ids of its incident vertices.
    facet_vertices: Vec<Vec<usize>>,
}

impl PolyBall {
    /// Builds a ball from its vertex list.
    ///
    /// The list must be centrally symmetric, span the space, and consist of
    /// extreme points only (duplicates and hull-interior or mid-face points
    /// are rejected, reporting the offending index).
    pub fn from_vertices(dim: usize, vertices: Vec<Vector>) -> Result<PolyBall> {
        if dim < 2 {
            return Err(Error::UnsupportedDimension { dim });
        }
        for v in &vertices {
            v.expect_dim(dim)?;
        }
        for (i, v) in vertices.iter().enumerate() {
            if !vertices.iter().any(|w| w == &-v) {
                return Err(Error::NotSymmetric { index: i });
            }
        }
        let r = rank(&vertices);
        if r < dim {
            return Err(Error::NotFullDimensional { dim, rank: r });
        }
        for i in 0..vertices.len() {
            let others: Vec<Vector> = vertices
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, v)| v.clone())
                .collect();
            if lp::in_hull(&others, &vertices[i]) {
                return Err(Error::RedundantVertex { index: i });
            }
        }
        let facets = enumerate_facets(dim, &vertices);
        Self::assemble(dim, vertices, facets)
    }

    /// Builds a ball from matched vertex and facet descriptions, checking
    /// incidence instead of re-enumerating. Used for polar duals.
    fn assemble(dim: usize, vertices: Vec<Vector>, facets: Vec<Functional>) -> Result<PolyBall> {
        let one = Rational::one();
        let facet_vertices: Vec<Vec<usize>> = facets
            .iter()
            .map(|c| {
                (0..vertices.len())
                    .filter(|&i| c.apply(&vertices[i]) == one)
                    .collect()
            })
            .collect();
        for (j, ids) in facet_vertices.iter().enumerate() {
            let pts: Vec<Vector> = ids.iter().map(|&i| vertices[i].clone()).collect();
            assert!(
                rank(&pts) == dim,
                "facet {j} is not supported by {dim} independent vertices"
            );
        }
        for (i, v) in vertices.iter().enumerate() {
            let attained = facets.iter().map(|c| c.apply(v)).max();
            assert!(
                attained == Some(one.clone()),
                "vertex {i} does not attain norm one"
            );
        }
        let lattice = build_lattice(dim, vertices.len(), &facet_vertices, &vertices);
        Ok(PolyBall {
            dim,
            vertices,
            facets,
            lattice,
            facet_vertices,
        })
    }

    /// The polar ball: vertices are this ball's facet functionals, facets are
    /// this ball's vertices. Taking the polar twice returns the original
    /// vertex set (possibly reordered).
    pub fn polar_dual(&self) -> PolyBall {
        let vertices: Vec<Vector> = self.facets.iter().map(|c| c.as_vector()).collect();
        let facets: Vec<Functional> = self.vertices.iter().map(|v| Functional(v.0.clone())).collect();
        Self::assemble(self.dim, vertices, facets)
            .expect("polar of a valid ball is a valid ball")
    }

    /// The norm whose unit ball this is: max over facets of <c, x>.
    pub fn norm(&self, x: &Vector) -> Result<Rational> {
        x.expect_dim(self.dim)?;
        Ok(self
            .facets
            .iter()
            .map(|c| c.apply(x))
            .max()
            .expect("ball has facets"))
    }

    /// Norm of a dual element: max over vertices of <f, v>.
    pub fn dual_norm(&self, f: &Functional) -> Rational {
        self.vertices
            .iter()
            .map(|v| f.apply(v))
            .max()
            .expect("ball has vertices")
    }

    pub fn contains(&self, x: &Vector) -> Result<bool> {
        Ok(self.norm(x)? <= Rational::one())
    }

    pub fn on_sphere(&self, x: &Vector) -> Result<bool> {
        Ok(self.norm(x)? == Rational::one())
    }

    /// x / ||x||; rejects the zero vector.
    pub fn normalize(&self, x: &Vector) -> Result<Vector> {
        let n = self.norm(x)?;
        if n.is_zero() {
            return Err(Error::ZeroVector);
        }
        Ok(x.scale(&(Rational::one() / n)))
    }

    fn active_facets(&self, unit: &Vector) -> Vec<usize> {
        let one = Rational::one();
        (0..self.facets.len())
            .filter(|&j| self.facets[j].apply(unit) == one)
            .collect()
    }

    /// Support functionals of x (normalized internally): the active facet
    /// functionals and the dimension of their span.
    pub fn support_set(&self, x: &Vector) -> Result<SupportSet> {
        let unit = self.normalize(x)?;
        let facet_ids = self.active_facets(&unit);
        let extreme_points: Vec<Functional> =
            facet_ids.iter().map(|&j| self.facets[j].clone()).collect();
        let coeffs: Vec<Vector> = extreme_points.iter().map(|f| f.as_vector()).collect();
        let span_dim = rank(&coeffs);
        Ok(SupportSet {
            base: unit,
            facet_ids,
            extreme_points,
            span_dim,
        })
    }

    /// The unique support functional at a smooth point, `None` when the
    /// point has several active facets.
    pub fn smooth_gamma(&self, x: &Vector) -> Result<Option<Functional>> {
        let s = self.support_set(x)?;
        Ok(if s.is_smooth() {
            Some(s.extreme_points.into_iter().next().unwrap())
        } else {
            None
        })
    }

    /// The face whose relative interior contains x/||x||.
    pub fn carrier_face(&self, x: &Vector) -> Result<&Face> {
        let unit = self.normalize(x)?;
        let active = self.active_facets(&unit);
        self.lattice
            .faces
            .iter()
            .find(|f| f.facet_ids == active)
            .ok_or(Error::NotOnSphere)
    }

    pub fn facet_vertex_ids(&self, facet: usize) -> &[usize] {
        &self.facet_vertices[facet]
    }

    /// Id of the facet with the negated functional, which exists for every
    /// facet of a symmetric ball.
    pub fn opposite_facet(&self, facet: usize) -> usize {
        let negated = -&self.facets[facet];
        self.facets
            .iter()
            .position(|c| *c == negated)
            .expect("symmetric ball has the negated facet")
    }

    /// Tangent directions at a sphere point y. See [`TangentSet`].
    pub fn tangent_directions(&self, y: &Vector) -> Result<TangentSet> {
        y.expect_dim(self.dim)?;
        if !self.on_sphere(y)? {
            return Err(Error::NotOnSphere);
        }
        let active = self.active_facets(y);
        let mut gens: BTreeSet<Vector> = BTreeSet::new();
        for &j in &active {
            for &vi in &self.facet_vertices[j] {
                let d = y - &self.vertices[vi];
                if !d.is_zero() {
                    gens.insert(self.normalize(&d)?);
                }
            }
        }
        let mut rng = ChaCha20Rng::seed_from_u64(TANGENT_SAMPLE_SEED);
        for k in 0..TANGENT_INTERIOR_SAMPLES {
            let j = active[k % active.len()];
            let ids = &self.facet_vertices[j];
            let weights: Vec<Rational> = ids
                .iter()
                .map(|_| Rational::from_integer(rng.gen_range(1..=16).into()))
                .collect();
            let total: Rational = weights.iter().sum();
            let mut w = Vector::zero(self.dim);
            for (&vi, wt) in ids.iter().zip(&weights) {
                w = &w + &self.vertices[vi].scale(&(wt / &total));
            }
            let d = y - &w;
            if !d.is_zero() {
                gens.insert(self.normalize(&d)?);
            }
        }
        let generators: Vec<Vector> = gens.into_iter().collect();
        let span_dim = rank(&generators);
        let is_smooth = active.len() == 1;
        debug_assert_eq!(span_dim, if is_smooth { self.dim - 1 } else { self.dim });
        Ok(TangentSet {
            base: y.clone(),
            is_smooth,
            generators,
            span_dim,
        })
    }

    /// Whether unit `u` points along the sphere at `y`: nonnegative against
    /// every active facet and orthogonal to at least one. Exactly for such u
    /// the point y - t u stays on the sphere for all small t > 0, so these
    /// are the directions [`Self::tangent_directions`] generates.
    pub fn in_tangent_set(&self, y: &Vector, u: &Vector) -> Result<bool> {
        if !self.on_sphere(y)? {
            return Err(Error::NotOnSphere);
        }
        if !self.on_sphere(u)? {
            return Ok(false);
        }
        let mut touches = false;
        for &j in &self.active_facets(y) {
            let v = self.facets[j].apply(u);
            if v.is_negative() {
                return Ok(false);
            }
            if v.is_zero() {
                touches = true;
            }
        }
        Ok(touches)
    }

    /// Largest r certifying that every z in cone(x/||x|| + r B) satisfies
    /// <gamma(x), z> = ||z||. Requires x (normalized) to be a smooth point.
    ///
    /// For each other facet c the worst point of the certified cone slice is
    /// x + r b with b maximizing <c - gamma, b> over the ball, so the bound
    /// is r <= (1 - <c, x>) / ||c - gamma||_dual, and the returned radius is
    /// the minimum over facets.
    pub fn smoothness_radius(&self, x: &Vector) -> Result<Rational> {
        let unit = self.normalize(x)?;
        let Some(gamma) = self.smooth_gamma(&unit)? else {
            return Err(Error::NotSmoothPoint);
        };
        let one = Rational::one();
        self.facets
            .iter()
            .filter(|c| **c != gamma)
            .map(|c| {
                let gap = &one - c.apply(&unit);
                let diff = Functional(
                    c.0.iter()
                        .zip(&gamma.0)
                        .map(|(a, b)| a - b)
                        .collect(),
                );
                gap / self.dual_norm(&diff)
            })
            .min()
            .ok_or(Error::NotSmoothPoint)
    }
}

/// Brute-force facet enumeration over m-subsets of vertices.
fn enumerate_facets(dim: usize, vertices: &[Vector]) -> Vec<Functional> {
    let one = Rational::one();
    let ones = Vector(vec![one.clone(); dim]);
    let mut seen: BTreeMap<Vec<Rational>, ()> = BTreeMap::new();
    for combo in (0..vertices.len()).combinations(dim) {
        let rows: Vec<Vec<Rational>> = combo.iter().map(|&i| vertices[i].0.clone()).collect();
        let m = Matrix::from_rows(rows);
        let Some(c) = solve(&m, &ones) else {
            continue;
        };
        if seen.contains_key(&c.0) {
            continue;
        }
        let f = Functional(c.0.clone());
        if vertices.iter().all(|v| f.apply(v) <= one) {
            seen.insert(c.0, ());
        }
    }
    seen.into_keys().map(Functional).collect()
}

fn build_lattice(
    dim: usize,
    nvertices: usize,
    facet_vertices: &[Vec<usize>],
    vertices: &[Vector],
) -> FaceLattice {
    assert!(nvertices <= 128, "vertex sets beyond 128 are out of scope");
    let to_mask = |ids: &[usize]| ids.iter().fold(0u128, |m, &i| m | (1u128 << i));
    let facet_masks: Vec<u128> = facet_vertices.iter().map(|ids| to_mask(ids)).collect();

    let mut faces: BTreeSet<u128> = BTreeSet::new();
    let mut work: Vec<u128> = facet_masks.clone();
    while let Some(mask) = work.pop() {
        if mask == 0 || !faces.insert(mask) {
            continue;
        }
        for &f in &facet_masks {
            let inter = mask & f;
            if inter != 0 && inter != mask && !faces.contains(&inter) {
                work.push(inter);
            }
        }
    }

    let mut built: Vec<Face> = faces
        .into_iter()
        .map(|mask| {
            let vertex_ids: Vec<usize> = (0..nvertices).filter(|&i| mask & (1 << i) != 0).collect();
            let facet_ids: Vec<usize> = (0..facet_masks.len())
                .filter(|&j| facet_masks[j] & mask == mask)
                .collect();
            let fdim = affine_dim(&vertex_ids, vertices);
            Face {
                dim: fdim,
                vertex_ids,
                facet_ids,
            }
        })
        .collect();
    built.sort_by(|a, b| (a.dim, &a.vertex_ids).cmp(&(b.dim, &b.vertex_ids)));

    let ridges: Vec<RidgeAdjacency> = built
        .iter()
        .enumerate()
        .filter(|(_, f)| dim >= 2 && f.dim == dim - 2)
        .map(|(i, f)| {
            assert!(
                f.facet_ids.len() == 2,
                "ridge contained in {} facets",
                f.facet_ids.len()
            );
            RidgeAdjacency {
                face: i,
                facets: (f.facet_ids[0], f.facet_ids[1]),
            }
        })
        .collect();

    let lattice = FaceLattice {
        faces: built,
        ridges,
    };
    // Euler characteristic of the boundary sphere, an exactness guard.
    let census = lattice.census(dim);
    let euler: i64 = census
        .iter()
        .enumerate()
        .map(|(d, &n)| if d.is_multiple_of(2) { n as i64 } else { -(n as i64) })
        .sum();
    let expected = 1 - if dim.is_multiple_of(2) { 1 } else { -1 };
    assert_eq!(euler, expected, "face census fails the Euler check");
    lattice
}

fn affine_dim(vertex_ids: &[usize], vertices: &[Vector]) -> usize {
    let v0 = &vertices[vertex_ids[0]];
    let diffs: Vec<Vector> = vertex_ids[1..].iter().map(|&i| &vertices[i] - v0).collect();
    rank(&diffs)
}

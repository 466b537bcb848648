//! Exact linear programming over the rationals.
//!
//! A small two-phase simplex with Bland's rule, used as the membership and
//! norm oracle that is independent of the facet pipeline: it only ever sees
//! vertex coordinates. Problem sizes here are tiny (at most a dozen rows),
//! so the tableau is recomputed naively and exactly.

use num::{One, Signed, Zero};

use crate::linalg::{Rational, Vector};

/// Minimizes `cost . x` subject to `A x = b`, `x >= 0`.
///
/// Returns `None` when infeasible. Unbounded problems do not occur for the
/// uses in this crate (costs are nonnegative on the feasible set); they are
/// reported as `None` defensively.
pub fn minimize(
    a: &[Vec<Rational>],
    b: &[Rational],
    cost: &[Rational],
) -> Option<(Rational, Vec<Rational>)> {
    let m = a.len();
    let n = cost.len();
    debug_assert!(a.iter().all(|row| row.len() == n));
    debug_assert_eq!(b.len(), m);

    // Working tableau with artificial columns n..n+m appended.
    let mut t: Vec<Vec<Rational>> = Vec::with_capacity(m);
    let mut rhs: Vec<Rational> = Vec::with_capacity(m);
    for i in 0..m {
        let flip = b[i].is_negative();
        let mut row: Vec<Rational> = a[i]
            .iter()
            .map(|v| if flip { -v } else { v.clone() })
            .collect();
        row.extend((0..m).map(|j| {
            if j == i {
                Rational::one()
            } else {
                Rational::zero()
            }
        }));
        t.push(row);
        rhs.push(if flip { -&b[i] } else { b[i].clone() });
    }
    let mut basis: Vec<usize> = (n..n + m).collect();

    let phase1: Vec<Rational> = (0..n + m)
        .map(|j| {
            if j < n {
                Rational::zero()
            } else {
                Rational::one()
            }
        })
        .collect();
    let v1 = run_phase(&mut t, &mut rhs, &mut basis, &phase1, n + m)?;
    if !v1.is_zero() {
        return None;
    }

    // Drive leftover artificials out of the basis; rows that cannot pivot on
    // a real column are redundant constraints and are dropped.
    let mut row = 0;
    while row < basis.len() {
        if basis[row] >= n {
            if let Some(col) = (0..n).find(|&j| !t[row][j].is_zero()) {
                pivot(&mut t, &mut rhs, &mut basis, row, col);
                row += 1;
            } else {
                t.remove(row);
                rhs.remove(row);
                basis.remove(row);
            }
        } else {
            row += 1;
        }
    }
    for r in t.iter_mut() {
        r.truncate(n);
    }

    let v2 = run_phase(&mut t, &mut rhs, &mut basis, cost, n)?;
    let mut x = vec![Rational::zero(); n];
    for (i, &bi) in basis.iter().enumerate() {
        x[bi] = rhs[i].clone();
    }
    Some((v2, x))
}

fn run_phase(
    t: &mut [Vec<Rational>],
    rhs: &mut [Rational],
    basis: &mut [usize],
    cost: &[Rational],
    ncols: usize,
) -> Option<Rational> {
    loop {
        let entering = (0..ncols).find(|&j| {
            if basis.contains(&j) {
                return false;
            }
            let reduced = &cost[j]
                - basis
                    .iter()
                    .enumerate()
                    .map(|(i, &bi)| &cost[bi] * &t[i][j])
                    .sum::<Rational>();
            reduced.is_negative()
        });
        let Some(col) = entering else {
            let value = basis
                .iter()
                .enumerate()
                .map(|(i, &bi)| &cost[bi] * &rhs[i])
                .sum();
            return Some(value);
        };
        // Bland's ratio test: smallest ratio, ties broken by basic variable.
        let mut leave: Option<(usize, Rational)> = None;
        for i in 0..t.len() {
            if t[i][col].is_positive() {
                let ratio = &rhs[i] / &t[i][col];
                let better = match &leave {
                    None => true,
                    Some((li, lr)) => ratio < *lr || (ratio == *lr && basis[i] < basis[*li]),
                };
                if better {
                    leave = Some((i, ratio));
                }
            }
        }
        let (row, _) = leave?;
        pivot(t, rhs, basis, row, col);
    }
}

fn pivot(t: &mut [Vec<Rational>], rhs: &mut [Rational], basis: &mut [usize], row: usize, col: usize) {
    let p = t[row][col].clone();
    for v in t[row].iter_mut() {
        *v = &*v / &p;
    }
    rhs[row] = &rhs[row] / &p;
    for i in 0..t.len() {
        if i == row || t[i][col].is_zero() {
            continue;
        }
        let f = t[i][col].clone();
        for j in 0..t[i].len() {
            let s = &t[row][j] * &f;
            t[i][j] = &t[i][j] - &s;
        }
        let s = &rhs[row] * &f;
        rhs[i] = &rhs[i] - &s;
    }
    basis[row] = col;
}

/// Least total mass writing `x` as a nonnegative combination of `points`:
/// min sum(lambda) with sum(lambda_i p_i) = x. For a symmetric spanning point
/// set this is the Minkowski functional of their convex hull.
pub fn min_total_mass(points: &[Vector], x: &Vector) -> Option<Rational> {
    let m = x.dim();
    let a: Vec<Vec<Rational>> = (0..m)
        .map(|i| points.iter().map(|p| p.0[i].clone()).collect())
        .collect();
    let cost = vec![Rational::one(); points.len()];
    minimize(&a, &x.0, &cost).map(|(v, _)| v)
}

/// Exact membership of `x` in the convex hull of `points`.
pub fn in_hull(points: &[Vector], x: &Vector) -> bool {
    let m = x.dim();
    let mut a: Vec<Vec<Rational>> = (0..m)
        .map(|i| points.iter().map(|p| p.0[i].clone()).collect())
        .collect();
    a.push(vec![Rational::one(); points.len()]);
    let mut b = x.0.clone();
    b.push(Rational::one());
    let cost = vec![Rational::zero(); points.len()];
    minimize(&a, &b, &cost).is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{rat, rat_int};

    fn square_vertices() -> Vec<Vector> {
        [[1, 1], [1, -1], [-1, 1], [-1, -1]]
            .iter()
            .map(|c| Vector::from_i64(c))
            .collect()
    }

    #[test]
    fn mass_on_the_square_is_the_sup_norm() {
        let v = square_vertices();
        let cases = [
            (Vector(vec![rat(1, 2), rat(-1, 4)]), rat(1, 2)),
            (Vector::from_i64(&[3, 3]), rat_int(3)),
            (Vector::zero(2), rat_int(0)),
        ];
        for (x, want) in cases {
            assert_eq!(min_total_mass(&v, &x).unwrap(), want);
        }
    }

    #[test]
    fn hull_membership_square() {
        let v = square_vertices();
        assert!(in_hull(&v, &Vector(vec![rat(9, 10), rat(-1, 3)])));
        assert!(in_hull(&v, &Vector::from_i64(&[1, 1])));
        assert!(!in_hull(&v, &Vector(vec![rat(11, 10), rat_int(0)])));
    }

    #[test]
    fn infeasible_outside_span() {
        let points = [Vector::from_i64(&[1, 0, 0]), Vector::from_i64(&[-1, 0, 0])];
        assert_eq!(min_total_mass(&points, &Vector::from_i64(&[0, 1, 0])), None);
        assert!(in_hull(&points, &Vector::from_i64(&[1, 0, 0])));
    }

    #[test]
    fn degenerate_rows_are_dropped() {
        // Second constraint row is a copy of the first.
        let a = vec![
            vec![rat_int(1), rat_int(1)],
            vec![rat_int(1), rat_int(1)],
        ];
        let b = vec![rat_int(2), rat_int(2)];
        let cost = vec![rat_int(1), rat_int(3)];
        let (value, x) = minimize(&a, &b, &cost).unwrap();
        assert_eq!(value, rat_int(2));
        assert_eq!(x, vec![rat_int(2), rat_int(0)]);
    }
}

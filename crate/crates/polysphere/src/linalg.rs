//! Exact rational scalars, vectors, functionals and dense matrices.
//!
//! Everything in this module is exact: no rounding, no tolerances. Scalars are
//! arbitrary-precision rationals kept in lowest terms with positive
//! denominator. Vectors live in the primal space, functionals in the dual;
//! they share a coordinate representation but are distinct types so that a
//! pairing is always written `functional.apply(&vector)`.

use num::{BigInt, BigRational, One, Signed, Zero};
use std::fmt;
use std::ops::{Add, Neg, Sub};

use crate::error::{Error, Result};

pub type Rational = BigRational;

/// Shorthand for small rational constants.
pub fn rat(n: i64, d: i64) -> Rational {
    assert!(d != 0, "zero denominator");
    Rational::new(BigInt::from(n), BigInt::from(d))
}

pub fn rat_int(n: i64) -> Rational {
    Rational::from(BigInt::from(n))
}

/// Parses "p/q" or "p". Rejects zero denominators instead of panicking.
pub fn parse_rational(s: &str) -> Result<Rational> {
    let s = s.trim();
    let (num, den) = match s.split_once('/') {
        Some((n, d)) => (n.trim(), Some(d.trim())),
        None => (s, None),
    };
    let n: BigInt = num
        .parse()
        .map_err(|_| Error::Parse(format!("bad rational {s:?}")))?;
    let d: BigInt = match den {
        Some(d) => d
            .parse()
            .map_err(|_| Error::Parse(format!("bad rational {s:?}")))?,
        None => BigInt::one(),
    };
    if d.is_zero() {
        return Err(Error::Parse(format!("zero denominator in {s:?}")));
    }
    Ok(Rational::new(n, d))
}

/// Canonical form: "p" for integers, "p/q" otherwise (q > 0, lowest terms).
pub fn format_rational(r: &Rational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn rational_to_f64(r: &Rational) -> f64 {
    use num::ToPrimitive;
    r.to_f64().unwrap_or(f64::NAN)
}

fn dot_slices(a: &[Rational], b: &[Rational]) -> Rational {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// A point of the primal space, exact coordinates.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Vector(pub Vec<Rational>);

/// An element of the dual space, exact coefficients.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Functional(pub Vec<Rational>);

impl Vector {
    pub fn zero(dim: usize) -> Self {
        Vector(vec![Rational::zero(); dim])
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|c| c.is_zero())
    }

    pub fn scale(&self, s: &Rational) -> Vector {
        Vector(self.0.iter().map(|c| c * s).collect())
    }

    pub fn from_i64(coords: &[i64]) -> Vector {
        Vector(coords.iter().map(|&c| rat_int(c)).collect())
    }

    /// Checked length guard used at API boundaries.
    pub fn expect_dim(&self, dim: usize) -> Result<()> {
        if self.dim() == dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: dim,
                got: self.dim(),
            })
        }
    }
}

impl Functional {
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn apply(&self, v: &Vector) -> Rational {
        dot_slices(&self.0, &v.0)
    }

    pub fn scale(&self, s: &Rational) -> Functional {
        Functional(self.0.iter().map(|c| c * s).collect())
    }

    pub fn from_i64(coords: &[i64]) -> Functional {
        Functional(coords.iter().map(|&c| rat_int(c)).collect())
    }

    /// Coefficient vector, for rank and span computations in the dual.
    pub fn as_vector(&self) -> Vector {
        Vector(self.0.clone())
    }
}

impl Add for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), rhs.dim());
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a + b).collect())
    }
}

impl Sub for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), rhs.dim());
        Vector(self.0.iter().zip(&rhs.0).map(|(a, b)| a - b).collect())
    }
}

impl Neg for &Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        Vector(self.0.iter().map(|c| -c).collect())
    }
}

impl Neg for &Functional {
    type Output = Functional;
    fn neg(self) -> Functional {
        Functional(self.0.iter().map(|c| -c).collect())
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{}", format_rational(c))?;
        }
        write!(f, ")")
    }
}

impl fmt::Display for Functional {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", Vector(self.0.clone()))
    }
}

/// Dense row-major rational matrix.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    data: Vec<Rational>,
}

impl Matrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![Rational::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zero(n, n);
        for i in 0..n {
            *m.at_mut(i, i) = Rational::one();
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Rational>>) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        assert!(rows.iter().all(|row| row.len() == c));
        Matrix {
            rows: r,
            cols: c,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn from_cols(cols: &[Vector]) -> Self {
        let c = cols.len();
        let r = cols.first().map_or(0, |v| v.dim());
        let mut m = Matrix::zero(r, c);
        for (j, v) in cols.iter().enumerate() {
            assert_eq!(v.dim(), r);
            for i in 0..r {
                *m.at_mut(i, j) = v.0[i].clone();
            }
        }
        m
    }

    pub fn at(&self, i: usize, j: usize) -> &Rational {
        &self.data[i * self.cols + j]
    }

    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut Rational {
        &mut self.data[i * self.cols + j]
    }

    pub fn col(&self, j: usize) -> Vector {
        Vector((0..self.rows).map(|i| self.at(i, j).clone()).collect())
    }

    pub fn row(&self, i: usize) -> Vec<Rational> {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    pub fn mul_vec(&self, v: &Vector) -> Vector {
        assert_eq!(self.cols, v.dim());
        Vector(
            (0..self.rows)
                .map(|i| dot_slices(&self.data[i * self.cols..(i + 1) * self.cols], &v.0))
                .collect(),
        )
    }

    /// Transpose action on the dual: (A^T f)(v) = f(A v).
    pub fn transpose_apply(&self, f: &Functional) -> Functional {
        assert_eq!(self.rows, f.dim());
        Functional(
            (0..self.cols)
                .map(|j| (0..self.rows).map(|i| self.at(i, j) * &f.0[i]).sum())
                .collect(),
        )
    }

    pub fn mul_mat(&self, other: &Matrix) -> Matrix {
        assert_eq!(self.cols, other.rows);
        let mut out = Matrix::zero(self.rows, other.cols);
        for i in 0..self.rows {
            for j in 0..other.cols {
                *out.at_mut(i, j) = (0..self.cols).map(|k| self.at(i, k) * other.at(k, j)).sum();
            }
        }
        out
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zero(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                *out.at_mut(j, i) = self.at(i, j).clone();
            }
        }
        out
    }

    /// Gauss-Jordan inverse; `None` when singular.
    #[allow(clippy::needless_range_loop)]
    pub fn inverse(&self) -> Option<Matrix> {
        assert_eq!(self.rows, self.cols);
        let n = self.rows;
        let mut a = self.clone();
        let mut inv = Matrix::identity(n);
        for col in 0..n {
            let pivot = (col..n).find(|&r| !a.at(r, col).is_zero())?;
            if pivot != col {
                for j in 0..n {
                    let (p, c) = (pivot * n + j, col * n + j);
                    a.data.swap(p, c);
                    inv.data.swap(p, c);
                }
            }
            let p = a.at(col, col).clone();
            for j in 0..n {
                *a.at_mut(col, j) = a.at(col, j) / &p;
                *inv.at_mut(col, j) = inv.at(col, j) / &p;
            }
            for r in 0..n {
                if r == col || a.at(r, col).is_zero() {
                    continue;
                }
                let factor = a.at(r, col).clone();
                for j in 0..n {
                    let s = a.at(col, j) * &factor;
                    *a.at_mut(r, j) = a.at(r, j) - &s;
                    let s = inv.at(col, j) * &factor;
                    *inv.at_mut(r, j) = inv.at(r, j) - &s;
                }
            }
        }
        Some(inv)
    }

    pub fn max_abs_entry(&self) -> Rational {
        self.data
            .iter()
            .map(|c| c.abs())
            .max()
            .unwrap_or_else(Rational::zero)
    }
}

/// Solves the square system A x = b exactly; `None` when singular.
pub fn solve(a: &Matrix, b: &Vector) -> Option<Vector> {
    Some(a.inverse()?.mul_vec(b))
}

/// Row echelon rank of a list of coordinate vectors.
#[allow(clippy::needless_range_loop)]
pub fn rank(vectors: &[Vector]) -> usize {
    let mut rows: Vec<Vec<Rational>> = vectors.iter().map(|v| v.0.clone()).collect();
    let cols = rows.first().map_or(0, |r| r.len());
    let mut rank = 0;
    for col in 0..cols {
        let Some(pivot) = (rank..rows.len()).find(|&r| !rows[r][col].is_zero()) else {
            continue;
        };
        rows.swap(rank, pivot);
        let p = rows[rank][col].clone();
        for r in rank + 1..rows.len() {
            if rows[r][col].is_zero() {
                continue;
            }
            let factor = &rows[r][col] / &p;
            for j in col..cols {
                let s = &rows[rank][j] * &factor;
                rows[r][j] = &rows[r][j] - &s;
            }
        }
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    rank
}

/// Indices of a maximal linearly independent subset, greedy in input order.
pub fn independent_subset(vectors: &[Vector]) -> Vec<usize> {
    let mut chosen: Vec<usize> = Vec::new();
    let mut basis: Vec<Vector> = Vec::new();
    for (i, v) in vectors.iter().enumerate() {
        basis.push(v.clone());
        if rank(&basis) == basis.len() {
            chosen.push(i);
        } else {
            basis.pop();
        }
    }
    chosen
}

/// Coefficients expressing `v` in the given (independent) spanning set, or
/// `None` when `v` lies outside the span.
#[allow(clippy::needless_range_loop)]
pub fn span_coefficients(basis: &[Vector], v: &Vector) -> Option<Vec<Rational>> {
    let dim = v.dim();
    let r = basis.len();
    if r == 0 {
        return v.is_zero().then(Vec::new);
    }
    // Augmented elimination on [B | v] with B the dim x r column matrix.
    let mut rows: Vec<Vec<Rational>> = (0..dim)
        .map(|i| {
            let mut row: Vec<Rational> = basis.iter().map(|b| b.0[i].clone()).collect();
            row.push(v.0[i].clone());
            row
        })
        .collect();
    let mut pivot_rows: Vec<(usize, usize)> = Vec::new();
    let mut lead = 0;
    for col in 0..r {
        let Some(p) = (lead..dim).find(|&i| !rows[i][col].is_zero()) else {
            continue;
        };
        rows.swap(lead, p);
        let pv = rows[lead][col].clone();
        for j in col..=r {
            rows[lead][j] = &rows[lead][j] / &pv;
        }
        for i in 0..dim {
            if i != lead && !rows[i][col].is_zero() {
                let f = rows[i][col].clone();
                for j in col..=r {
                    let s = &rows[lead][j] * &f;
                    rows[i][j] = &rows[i][j] - &s;
                }
            }
        }
        pivot_rows.push((lead, col));
        lead += 1;
    }
    // Inconsistent when a zero row has nonzero rhs.
    for (i, row) in rows.iter().enumerate() {
        if pivot_rows.iter().all(|&(pr, _)| pr != i) && !row[r].is_zero() {
            return None;
        }
    }
    let mut coeffs = vec![Rational::zero(); r];
    for &(i, col) in &pivot_rows {
        coeffs[col] = rows[i][r].clone();
    }
    Some(coeffs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parse_accepts_both_forms() {
        assert_eq!(parse_rational("3/4").unwrap(), rat(3, 4));
        assert_eq!(parse_rational("-7").unwrap(), rat_int(-7));
        assert_eq!(parse_rational(" 6/-8 ").unwrap(), rat(-3, 4));
        assert!(parse_rational("1/0").is_err());
        assert!(parse_rational("a/b").is_err());
        assert!(parse_rational("").is_err());
    }

    #[test]
    fn format_is_lowest_terms() {
        assert_eq!(format_rational(&rat(6, -8)), "-3/4");
        assert_eq!(format_rational(&rat(8, 4)), "2");
    }

    #[test]
    fn inverse_of_rotation() {
        let a = Matrix::from_rows(vec![
            vec![rat_int(0), rat_int(-1)],
            vec![rat_int(1), rat_int(0)],
        ]);
        let inv = a.inverse().unwrap();
        assert_eq!(a.mul_mat(&inv), Matrix::identity(2));
    }

    #[test]
    fn singular_matrix_has_no_inverse() {
        let a = Matrix::from_rows(vec![
            vec![rat_int(1), rat_int(2)],
            vec![rat_int(2), rat_int(4)],
        ]);
        assert!(a.inverse().is_none());
    }

    #[test]
    fn rank_counts_independent_rows() {
        let vs = [
            Vector::from_i64(&[1, 0, 0]),
            Vector::from_i64(&[1, 1, 0]),
            Vector::from_i64(&[2, 1, 0]),
        ];
        assert_eq!(rank(&vs), 2);
        assert_eq!(independent_subset(&vs), vec![0, 1]);
    }

    #[test]
    fn span_coefficients_detects_outside_vectors() {
        let basis = [Vector::from_i64(&[1, 0, 0]), Vector::from_i64(&[0, 1, 0])];
        let inside = Vector::from_i64(&[3, -2, 0]);
        assert_eq!(
            span_coefficients(&basis, &inside).unwrap(),
            vec![rat_int(3), rat_int(-2)]
        );
        assert!(span_coefficients(&basis, &Vector::from_i64(&[0, 0, 1])).is_none());
    }

    fn small_rational() -> impl Strategy<Value = Rational> {
        (-50i64..50, 1i64..20).prop_map(|(n, d)| rat(n, d))
    }

    proptest! {
        #[test]
        fn parse_format_roundtrip(r in small_rational()) {
            prop_assert_eq!(parse_rational(&format_rational(&r)).unwrap(), r);
        }

        #[test]
        fn solve_then_multiply(entries in prop::collection::vec(small_rational(), 9),
                               rhs in prop::collection::vec(small_rational(), 3)) {
            let a = Matrix::from_rows(entries.chunks(3).map(|c| c.to_vec()).collect());
            let b = Vector(rhs);
            if let Some(x) = solve(&a, &b) {
                prop_assert_eq!(a.mul_vec(&x), b);
            }
        }

        #[test]
        fn span_coefficients_reconstruct(coords in prop::collection::vec(small_rational(), 6)) {
            let basis = [Vector(coords[0..3].to_vec()), Vector(coords[3..6].to_vec())];
            if rank(&basis) == 2 {
                let v = &basis[0].scale(&rat(5, 3)) + &basis[1].scale(&rat(-1, 7));
                let c = span_coefficients(&basis, &v).unwrap();
                prop_assert_eq!(c, vec![rat(5, 3), rat(-1, 7)]);
            }
        }
    }
}

//! Exact integer lattice linear algebra.
//!
//! Dense matrices over arbitrary-precision integers, Smith normal form with
//! unimodular transforms, kernels, images, lattice quotients with torsion,
//! and symplectic reduction of a lattice by an isotropic sublattice.
//!
//! Conventions: vectors are rows; a sublattice is the row space of a matrix;
//! a map `f: Z^m -> Z^n` is an `m x n` matrix acting by `v -> v * M`.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};
use std::fmt;

#[derive(Debug, thiserror::Error)]
pub enum ZlatError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("sublattice is not isotropic for the given form")]
    NotIsotropic,
    #[error("vector does not lie in the span of the given lattice")]
    NotInSpan,
}

#[derive(Clone, PartialEq, Eq)]
pub struct IntMatrix {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "IntMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            let row: Vec<String> = (0..self.cols).map(|j| self[(i, j)].to_string()).collect();
            writeln!(f, "  [{}]", row.join(", "))?;
        }
        write!(f, "]")
    }
}

impl std::ops::Index<(usize, usize)> for IntMatrix {
    type Output = BigInt;
    fn index(&self, (i, j): (usize, usize)) -> &BigInt {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for IntMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut BigInt {
        &mut self.data[i * self.cols + j]
    }
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = BigInt::one();
        }
        m
    }

    pub fn from_rows_i64(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut m = Self::zeros(r, c);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), c, "ragged rows");
            for (j, v) in row.iter().enumerate() {
                m[(i, j)] = BigInt::from(*v);
            }
        }
        m
    }

    pub fn row_vec(v: &[i64]) -> Self {
        Self::from_rows_i64(&[v.to_vec()])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> Vec<BigInt> {
        (0..self.cols).map(|j| self[(i, j)].clone()).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    pub fn to_i64(&self) -> Option<Vec<Vec<i64>>> {
        let mut out = Vec::with_capacity(self.rows);
        for i in 0..self.rows {
            let mut row = Vec::with_capacity(self.cols);
            for j in 0..self.cols {
                row.push(i64::try_from(&self[(i, j)]).ok()?);
            }
            out.push(row);
        }
        Some(out)
    }

    pub fn transpose(&self) -> Self {
        let mut m = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m[(j, i)] = self[(i, j)].clone();
            }
        }
        m
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matrix product shape");
        let mut m = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = &self[(i, k)];
                if a.is_zero() {
                    continue;
                }
                for j in 0..other.cols {
                    let t = a * &other[(k, j)];
                    m[(i, j)] += t;
                }
            }
        }
        m
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert!(self.rows == other.rows && self.cols == other.cols);
        let mut m = self.clone();
        for (a, b) in m.data.iter_mut().zip(&other.data) {
            *a -= b;
        }
        m
    }

    pub fn neg(&self) -> Self {
        let mut m = self.clone();
        for a in m.data.iter_mut() {
            *a = -a.clone();
        }
        m
    }

    /// Stack `other` below `self`.
    pub fn vstack(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.cols);
        let mut m = Self::zeros(self.rows + other.rows, self.cols);
        m.data[..self.data.len()].clone_from_slice(&self.data);
        m.data[self.data.len()..].clone_from_slice(&other.data);
        m
    }

    pub fn take_rows(&self, idx: &[usize]) -> Self {
        let mut m = Self::zeros(idx.len(), self.cols);
        for (r, &i) in idx.iter().enumerate() {
            for j in 0..self.cols {
                m[(r, j)] = self[(i, j)].clone();
            }
        }
        m
    }

    pub fn is_skew_symmetric(&self) -> bool {
        if self.rows != self.cols {
            return false;
        }
        for i in 0..self.rows {
            for j in 0..self.cols {
                if self[(i, j)] != -self[(j, i)].clone() {
                    return false;
                }
            }
        }
        true
    }
}

/// `u * a * v = d` with `u`, `v` unimodular, `d` diagonal with a divisibility
/// chain. `u_inv`, `v_inv` are the exact inverses, accumulated alongside.
pub struct SnfResult {
    pub d: IntMatrix,
    pub u: IntMatrix,
    pub u_inv: IntMatrix,
    pub v: IntMatrix,
    pub v_inv: IntMatrix,
}

impl SnfResult {
    pub fn rank(&self) -> usize {
        let n = self.d.rows().min(self.d.cols());
        (0..n).take_while(|&i| !self.d[(i, i)].is_zero()).count()
    }

    pub fn invariant_factors(&self) -> Vec<BigInt> {
        let n = self.d.rows().min(self.d.cols());
        (0..n)
            .map(|i| self.d[(i, i)].clone())
            .filter(|x| !x.is_zero())
            .collect()
    }
}

struct SnfCalc {
    a: IntMatrix,
    u: IntMatrix,
    u_inv: IntMatrix,
    v: IntMatrix,
    v_inv: IntMatrix,
}

impl SnfCalc {
    fn new(a: IntMatrix) -> Self {
        let (m, n) = (a.rows(), a.cols());
        SnfCalc {
            a,
            u: IntMatrix::identity(m),
            u_inv: IntMatrix::identity(m),
            v: IntMatrix::identity(n),
            v_inv: IntMatrix::identity(n),
        }
    }

    fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for c in 0..self.a.cols() {
            self.a.data.swap(i * self.a.cols + c, j * self.a.cols + c);
        }
        for c in 0..self.u.cols() {
            self.u.data.swap(i * self.u.cols + c, j * self.u.cols + c);
        }
        // u_inv gets the inverse column op
        for r in 0..self.u_inv.rows() {
            self.u_inv.data.swap(r * self.u_inv.cols + i, r * self.u_inv.cols + j);
        }
    }

    fn swap_cols(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for r in 0..self.a.rows() {
            self.a.data.swap(r * self.a.cols + i, r * self.a.cols + j);
        }
        for r in 0..self.v.rows() {
            self.v.data.swap(r * self.v.cols + i, r * self.v.cols + j);
        }
        for c in 0..self.v_inv.cols() {
            self.v_inv.data.swap(i * self.v_inv.cols + c, j * self.v_inv.cols + c);
        }
    }

    /// row_j -= q * row_i
    fn add_row(&mut self, i: usize, j: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for c in 0..self.a.cols() {
            let t = q * &self.a[(i, c)];
            self.a[(j, c)] -= t;
        }
        for c in 0..self.u.cols() {
            let t = q * &self.u[(i, c)];
            self.u[(j, c)] -= t;
        }
        for r in 0..self.u_inv.rows() {
            let t = q * &self.u_inv[(r, j)];
            self.u_inv[(r, i)] += t;
        }
    }

    /// col_j -= q * col_i
    fn add_col(&mut self, i: usize, j: usize, q: &BigInt) {
        if q.is_zero() {
            return;
        }
        for r in 0..self.a.rows() {
            let t = q * &self.a[(r, i)];
            self.a[(r, j)] -= t;
        }
        for r in 0..self.v.rows() {
            let t = q * &self.v[(r, i)];
            self.v[(r, j)] -= t;
        }
        for c in 0..self.v_inv.cols() {
            let t = q * &self.v_inv[(j, c)];
            self.v_inv[(i, c)] += t;
        }
    }

    fn negate_row(&mut self, i: usize) {
        for c in 0..self.a.cols() {
            let t = -self.a[(i, c)].clone();
            self.a[(i, c)] = t;
        }
        for c in 0..self.u.cols() {
            let t = -self.u[(i, c)].clone();
            self.u[(i, c)] = t;
        }
        for r in 0..self.u_inv.rows() {
            let t = -self.u_inv[(r, i)].clone();
            self.u_inv[(r, i)] = t;
        }
    }

    fn select_pivot(&self, from: usize) -> Option<(usize, usize)> {
        let mut best: Option<(usize, usize)> = None;
        for i in from..self.a.rows() {
            for j in from..self.a.cols() {
                if self.a[(i, j)].is_zero() {
                    continue;
                }
                match best {
                    None => best = Some((i, j)),
                    Some(b) => {
                        if self.a[(i, j)].abs() < self.a[b].abs() {
                            best = Some((i, j));
                        }
                    }
                }
            }
        }
        best
    }

    /// Clear row and column `k` with a Euclidean pivot loop. Pivot must be
    /// nonzero on entry; all entries of rows/cols < k are untouched.
    fn eliminate_at(&mut self, k: usize) {
        debug_assert!(!self.a[(k, k)].is_zero());
        loop {
            let mut clean = true;
            for i in k + 1..self.a.rows() {
                if !self.a[(i, k)].is_zero() {
                    let q = self.a[(i, k)].div_floor(&self.a[(k, k)]);
                    self.add_row(k, i, &q);
                    if !self.a[(i, k)].is_zero() {
                        // remainder is smaller than the pivot: swap it up
                        self.swap_rows(k, i);
                        clean = false;
                    }
                }
            }
            for j in k + 1..self.a.cols() {
                if !self.a[(k, j)].is_zero() {
                    let q = self.a[(k, j)].div_floor(&self.a[(k, k)]);
                    self.add_col(k, j, &q);
                    if !self.a[(k, j)].is_zero() {
                        self.swap_cols(k, j);
                        clean = false;
                    }
                }
            }
            if clean {
                break;
            }
        }
        if self.a[(k, k)].is_negative() {
            self.negate_row(k);
        }
    }

    fn process(&mut self) {
        let n = self.a.rows().min(self.a.cols());
        let mut k = 0;
        while k < n {
            let Some((pi, pj)) = self.select_pivot(k) else { break };
            self.swap_rows(k, pi);
            self.swap_cols(k, pj);
            self.eliminate_at(k);
            k += 1;
        }
        self.divisibility_chain(k);
    }

    /// Enforce d_1 | d_2 | ... on an already diagonal matrix. Each fix
    /// replaces an adjacent pair (x, y) by (gcd, lcm), which strictly
    /// decreases the earlier factor, so the scan terminates.
    fn divisibility_chain(&mut self, rank: usize) {
        if rank < 2 {
            return;
        }
        loop {
            let mut fixed = true;
            for i in 0..rank - 1 {
                let x = self.a[(i, i)].clone();
                let y = self.a[(i + 1, i + 1)].clone();
                if (&y % &x).is_zero() {
                    continue;
                }
                fixed = false;
                // col_i += col_{i+1} puts y into position (i+1, i); the pivot
                // loop then computes gcd/lcm for the 2x2 block.
                let minus_one = -BigInt::one();
                self.add_col(i + 1, i, &minus_one);
                self.eliminate_at(i);
                if self.a[(i + 1, i + 1)].is_negative() {
                    self.negate_row(i + 1);
                }
            }
            if fixed {
                break;
            }
        }
    }
}

pub fn smith_normal_form(a: &IntMatrix) -> SnfResult {
    let mut calc = SnfCalc::new(a.clone());
    calc.process();
    debug_assert_eq!(calc.u.mul(a).mul(&calc.v), calc.a);
    SnfResult { d: calc.a, u: calc.u, u_inv: calc.u_inv, v: calc.v, v_inv: calc.v_inv }
}

/// Basis of `{ v : v * a = 0 }` (the left kernel), as rows.
pub fn kernel(a: &IntMatrix) -> IntMatrix {
    let snf = smith_normal_form(a);
    let r = snf.rank();
    let idx: Vec<usize> = (r..a.rows()).collect();
    snf.u.take_rows(&idx)
}

/// Basis of the row space of `a`, as rows of a matrix with `rank` rows.
pub fn image(a: &IntMatrix) -> IntMatrix {
    let snf = smith_normal_form(a);
    let r = snf.rank();
    // rows of d * v_inv = u * a: the first r rows of u*a form a basis.
    let ua = snf.u.mul(a);
    let idx: Vec<usize> = (0..r).collect();
    ua.take_rows(&idx)
}

pub fn rank(a: &IntMatrix) -> usize {
    smith_normal_form(a).rank()
}

/// Determinant via fraction-free SNF diagonal product, up to sign: returns
/// the absolute value. Handy for covolume checks of full-rank images.
pub fn det_abs(a: &IntMatrix) -> BigInt {
    assert_eq!(a.rows(), a.cols());
    let snf = smith_normal_form(a);
    let mut p = BigInt::one();
    for i in 0..a.rows() {
        p *= &snf.d[(i, i)];
    }
    p.abs()
}

/// Solve `x * a = b` exactly over the integers, rows of `b` independently.
/// Returns `None` if some row has no integral solution.
pub fn solve_left(a: &IntMatrix, b: &IntMatrix) -> Option<IntMatrix> {
    assert_eq!(a.cols(), b.cols());
    let snf = smith_normal_form(a);
    let r = snf.rank();
    // x a = b  <=>  x u^{-1} d v^{-1} = b  <=>  (x u^{-1}) d = b v
    let bv = b.mul(&snf.v);
    let mut y = IntMatrix::zeros(b.rows(), a.rows());
    for i in 0..b.rows() {
        for j in 0..a.rows() {
            if j < r {
                let d = &snf.d[(j, j)];
                let (q, rem) = bv[(i, j)].div_rem(d);
                if !rem.is_zero() {
                    return None;
                }
                y[(i, j)] = q;
            } else if !bv[(i, j)].is_zero() {
                return None;
            }
        }
    }
    Some(y.mul(&snf.u))
}

/// A finitely generated abelian group presented as a quotient of a lattice
/// `L` by a row sublattice, with a chosen lift of a free basis. When `L` is
/// a proper sublattice of the ambient space, `base` holds its basis and
/// `reduce` accepts ambient vectors lying in `L`.
pub struct LatticeQuotient {
    pub free_rank: usize,
    /// invariant factors > 1 of the relation lattice inside the ambient.
    pub torsion: Vec<BigInt>,
    /// rows: ambient representatives of the free generators.
    pub lift_basis: IntMatrix,
    /// dimension of the coordinate space the quotient was computed in.
    pub ambient: usize,
    base: Option<IntMatrix>,
    v: IntMatrix,
    d: Vec<BigInt>,
}

impl LatticeQuotient {
    /// Class of a row vector: (free coordinates, torsion coordinates reduced
    /// mod the invariant factors). Panics if the vector is not in the span
    /// of the base lattice.
    pub fn reduce(&self, x: &IntMatrix) -> (IntMatrix, Vec<BigInt>) {
        let x = match &self.base {
            None => x.clone(),
            Some(b) => solve_left(b, x).expect("vector lies in the base lattice"),
        };
        let x = &x;
        assert_eq!(x.cols(), self.ambient);
        let y = x.mul(&self.v);
        let r = self.d.len();
        let free_idx: Vec<usize> = (r..self.ambient).collect();
        let mut free = IntMatrix::zeros(x.rows(), free_idx.len());
        let mut tors = Vec::new();
        for i in 0..x.rows() {
            for (c, &j) in free_idx.iter().enumerate() {
                free[(i, c)] = y[(i, j)].clone();
            }
            for (j, dj) in self.d.iter().enumerate() {
                if dj > &BigInt::one() {
                    tors.push(y[(i, j)].mod_floor(dj));
                }
            }
        }
        (free, tors)
    }

    pub fn in_subgroup(&self, x: &IntMatrix) -> bool {
        let (free, tors) = self.reduce(x);
        free.is_zero() && tors.iter().all(|t| t.is_zero())
    }
}

/// Quotient of `Z^n` by the row space of `s`.
pub fn quotient_ambient(s: &IntMatrix) -> LatticeQuotient {
    let n = s.cols();
    let snf = smith_normal_form(s);
    let r = snf.rank();
    let d: Vec<BigInt> = (0..r).map(|i| snf.d[(i, i)].clone()).collect();
    let idx: Vec<usize> = (r..n).collect();
    let lift = snf.v_inv.take_rows(&idx);
    let torsion = d.iter().filter(|x| **x > BigInt::one()).cloned().collect();
    LatticeQuotient {
        free_rank: n - r,
        torsion,
        lift_basis: lift,
        ambient: n,
        base: None,
        v: snf.v.clone(),
        d,
    }
}

/// Quotient `L / S` where `L` is given by generator rows (a basis is computed)
/// and `S` by generator rows lying in the span of `L`.
pub fn quotient(l: &IntMatrix, s: &IntMatrix) -> Result<LatticeQuotient, ZlatError> {
    let lb = image(l);
    let x = solve_left(&lb, s).ok_or(ZlatError::NotInSpan)?;
    let mut q = quotient_ambient(&x);
    // express lift basis back in ambient coordinates of L's space, and make
    // reduce() accept ambient vectors
    q.lift_basis = q.lift_basis.mul(&lb);
    q.base = Some(lb);
    Ok(q)
}

/// Result of symplectic reduction of a lattice with skew form `eps` by an
/// isotropic sublattice `G`: `K = ker<G,*>`, the quotient `K/G`, and the
/// induced form on a lift of the free part of `K/G`.
pub struct SymplecticReduction {
    /// rows: basis of `K` in ambient coordinates.
    pub k_basis: IntMatrix,
    pub quotient: LatticeQuotient,
    /// induced skew form on the free basis of `K/G`.
    pub induced_form: IntMatrix,
}

/// Reduce `(Z^n, eps)` by the isotropic row lattice `g`.
pub fn symplectic_reduce(
    eps: &IntMatrix,
    g: &IntMatrix,
) -> Result<SymplecticReduction, ZlatError> {
    if eps.rows() != eps.cols() || g.cols() != eps.rows() {
        return Err(ZlatError::Dimension(format!(
            "eps {}x{}, g {}x{}",
            eps.rows(),
            eps.cols(),
            g.rows(),
            g.cols()
        )));
    }
    if !g.mul(eps).mul(&g.transpose()).is_zero() {
        return Err(ZlatError::NotIsotropic);
    }
    // K = left kernel of eps * g^T
    let pair = eps.mul(&g.transpose());
    let k = kernel(&pair);
    // eps must vanish on G x K (G is inside K since G is isotropic)
    debug_assert!(g.mul(eps).mul(&k.transpose()).is_zero());
    let q = quotient(&k, g)?;
    let lift = &q.lift_basis;
    let induced = lift.mul(eps).mul(&lift.transpose());
    Ok(SymplecticReduction { k_basis: k, quotient: q, induced_form: induced })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn m(rows: &[Vec<i64>]) -> IntMatrix {
        IntMatrix::from_rows_i64(rows)
    }

    #[test]
    fn snf_identity() {
        let a = IntMatrix::identity(3);
        let s = smith_normal_form(&a);
        assert_eq!(s.d, a);
        assert_eq!(s.u, IntMatrix::identity(3));
        assert_eq!(s.v, IntMatrix::identity(3));
    }

    #[test]
    fn snf_2x2_example() {
        // brute-force oracle for [[2,4],[6,8]]: gcd of entries = 2,
        // gcd of 2x2 minors = |16 - 24| = 8, so d = (2, 8/2) = (2, 4).
        let a = m(&[vec![2, 4], vec![6, 8]]);
        let s = smith_normal_form(&a);
        assert_eq!(s.d, m(&[vec![2, 0], vec![0, 4]]));
        assert_eq!(s.u.mul(&a).mul(&s.v), s.d);
    }

    #[test]
    fn snf_zero() {
        let a = IntMatrix::zeros(2, 3);
        let s = smith_normal_form(&a);
        assert!(s.d.is_zero());
    }

    #[test]
    fn kernel_of_sum() {
        let a = m(&[vec![1], vec![1]]);
        let k = kernel(&a);
        assert_eq!(k.rows(), 1);
        // spans (1, -1)
        let want = m(&[vec![1, -1]]);
        assert!(solve_left(&k, &want).is_some());
        assert!(solve_left(&want, &k).is_some());
    }

    #[test]
    fn image_index_six() {
        // image of diag(2,3) has covolume 6 in Z^2
        let a = m(&[vec![2, 0], vec![0, 3]]);
        let b = image(&a);
        assert_eq!(det_abs(&b), BigInt::from(6));
    }

    #[test]
    fn quotient_z2_by_2e1() {
        let l = IntMatrix::identity(2);
        let s = m(&[vec![2, 0]]);
        let q = quotient(&l, &s).unwrap();
        assert_eq!(q.free_rank, 1);
        assert_eq!(q.torsion, vec![BigInt::from(2)]);
    }

    #[test]
    fn symplectic_reduce_hyperbolic_pair() {
        // standard J_4; reduce by e1: K = span(e1, e3, e4), K/G = Z^2, form J_2
        let j4 = m(&[
            vec![0, 0, 1, 0],
            vec![0, 0, 0, 1],
            vec![-1, 0, 0, 0],
            vec![0, -1, 0, 0],
        ]);
        let g = m(&[vec![1, 0, 0, 0]]);
        let red = symplectic_reduce(&j4, &g).unwrap();
        assert_eq!(red.quotient.free_rank, 2);
        assert!(red.quotient.torsion.is_empty());
        let f = red.induced_form;
        assert!(f.is_skew_symmetric());
        assert_eq!(det_abs(&f), BigInt::from(1));
    }

    #[test]
    fn symplectic_reduce_rejects_nonisotropic() {
        let j2 = m(&[vec![0, 1], vec![-1, 0]]);
        let g = m(&[vec![1, 0], vec![0, 1]]);
        assert!(matches!(symplectic_reduce(&j2, &g), Err(ZlatError::NotIsotropic)));
    }

    #[test]
    fn symplectic_reduce_by_zero() {
        let j2 = m(&[vec![0, 1], vec![-1, 0]]);
        let g = IntMatrix::zeros(0, 2);
        let red = symplectic_reduce(&j2, &g).unwrap();
        assert_eq!(red.quotient.free_rank, 2);
        assert_eq!(red.induced_form, j2);
    }

    /// Brute-force oracle: reduced row/column elimination computing only the
    /// diagonal multiset, via gcds of all entries (d1), then recursing on the
    /// Schur-like complement is overkill; instead use gcd of k x k minors.
    fn minors_gcd_diag(a: &IntMatrix) -> Vec<BigInt> {
        let n = a.rows().min(a.cols());
        let mut out = Vec::new();
        let mut prev = BigInt::one();
        for k in 1..=n {
            let mut g = BigInt::zero();
            let rows: Vec<usize> = (0..a.rows()).collect();
            let cols: Vec<usize> = (0..a.cols()).collect();
            for rs in combinations(&rows, k) {
                for cs in combinations(&cols, k) {
                    let d = minor_det(a, &rs, &cs);
                    g = g.gcd(&d);
                }
            }
            if g.is_zero() {
                break;
            }
            out.push(&g / &prev);
            prev = g;
        }
        out
    }

    fn combinations(items: &[usize], k: usize) -> Vec<Vec<usize>> {
        if k == 0 {
            return vec![vec![]];
        }
        if items.len() < k {
            return vec![];
        }
        let mut out = Vec::new();
        for (i, &x) in items.iter().enumerate() {
            for mut rest in combinations(&items[i + 1..], k - 1) {
                rest.insert(0, x);
                out.push(rest);
            }
        }
        out
    }

    fn minor_det(a: &IntMatrix, rs: &[usize], cs: &[usize]) -> BigInt {
        let k = rs.len();
        if k == 1 {
            return a[(rs[0], cs[0])].clone();
        }
        let mut det = BigInt::zero();
        for (j, &c) in cs.iter().enumerate() {
            let sub_rs = &rs[1..];
            let sub_cs: Vec<usize> =
                cs.iter().enumerate().filter(|(jj, _)| *jj != j).map(|(_, &x)| x).collect();
            let d = minor_det(a, sub_rs, &sub_cs);
            let t = &a[(rs[0], c)] * d;
            if j % 2 == 0 {
                det += t;
            } else {
                det -= t;
            }
        }
        det
    }

    #[test]
    fn snf_matches_minor_gcd_oracle() {
        // deterministic small cases; the proptest below covers random ones
        for a in [
            m(&[vec![2, 4], vec![6, 8]]),
            m(&[vec![1, 2, 3], vec![4, 5, 6], vec![7, 8, 9]]),
            m(&[vec![6, 0], vec![0, 10], vec![0, 0]]),
            m(&[vec![0, -3, 1], vec![9, 0, 2]]),
        ] {
            let s = smith_normal_form(&a);
            assert_eq!(s.invariant_factors(), minors_gcd_diag(&a), "{a:?}");
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn snf_properties(rows in 1usize..6, cols in 1usize..6,
                          seed in prop::collection::vec(-9i64..=9, 36)) {
            let data: Vec<Vec<i64>> = (0..rows)
                .map(|i| (0..cols).map(|j| seed[i * 6 + j]).collect())
                .collect();
            let a = IntMatrix::from_rows_i64(&data);
            let s = smith_normal_form(&a);
            // u a v = d
            prop_assert_eq!(s.u.mul(&a).mul(&s.v), s.d.clone());
            // transforms are inverse pairs (hence unimodular)
            prop_assert_eq!(s.u.mul(&s.u_inv), IntMatrix::identity(rows));
            prop_assert_eq!(s.v.mul(&s.v_inv), IntMatrix::identity(cols));
            // diagonal, divisibility chain, nonnegative
            for i in 0..rows.min(cols) {
                for j in 0..cols {
                    if i != j {
                        prop_assert!(s.d[(i, j)].is_zero());
                    }
                }
                prop_assert!(!s.d[(i, i)].is_negative());
            }
            let f = s.invariant_factors();
            for w in f.windows(2) {
                prop_assert!((&w[1] % &w[0]).is_zero());
            }
            prop_assert_eq!(f, minors_gcd_diag(&a));
        }

        #[test]
        fn symplectic_reduce_matches_oracle(seed in prop::collection::vec(-3i64..=3, 12)) {
            // lattice Z^4 with standard J_4, random isotropic vector g != 0
            let j4 = m(&[
                vec![0, 0, 1, 0],
                vec![0, 0, 0, 1],
                vec![-1, 0, 0, 0],
                vec![0, -1, 0, 0],
            ]);
            let gv = vec![seed[0], seed[1], seed[2], seed[3]];
            // <g, g> = 0 automatically for a single vector
            let g = m(&[gv.clone()]);
            if g.is_zero() { return Ok(()); }
            let red = symplectic_reduce(&j4, &g).unwrap();
            // oracle: K = left kernel by SNF, quotient rank = rank K - rank G
            let pair = j4.mul(&g.transpose());
            let k = kernel(&pair);
            prop_assert_eq!(red.k_basis.rows(), k.rows());
            let expect_rank = rank(&k) - rank(&g);
            prop_assert_eq!(red.quotient.free_rank, expect_rank);
            // induced form is skew and has the same rank behavior over Q
            prop_assert!(red.induced_form.is_skew_symmetric());
        }
    }
}

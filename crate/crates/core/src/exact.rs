//! Exact dense linear algebra: fraction-free integer elimination (rank and
//! nullspace over Q), leftmost-lowest column reduction with an explicit
//! change-of-basis matrix, and elimination over prime fields.
//!
//! Integer routines run in checked `i128` first and retry with `BigInt` when an
//! intermediate overflows.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{QtdaError, Result};

/// Dense row-major integer matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<i64>,
}

impl IntMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        IntMatrix {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        IntMatrix { rows: r, cols: c, data }
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: i64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[i64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<i64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> IntMatrix {
        let mut t = IntMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0)
    }

    /// Checked product; overflow of i64 is reported rather than wrapped.
    pub fn matmul(&self, other: &IntMatrix) -> Result<IntMatrix> {
        assert_eq!(self.cols, other.rows, "inner dimensions");
        let mut out = IntMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0 {
                    continue;
                }
                for c in 0..other.cols {
                    let b = other.get(k, c);
                    if b == 0 {
                        continue;
                    }
                    let v = a
                        .checked_mul(b)
                        .and_then(|p| p.checked_add(out.get(r, c)))
                        .ok_or(QtdaError::ExactOverflow)?;
                    out.set(r, c, v);
                }
            }
        }
        Ok(out)
    }

    pub fn add(&self, other: &IntMatrix) -> Result<IntMatrix> {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.checked_add(*b).ok_or(QtdaError::ExactOverflow))
            .collect::<Result<Vec<_>>>()?;
        Ok(IntMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// Columns selected in order.
    pub fn select_cols(&self, cols: &[usize]) -> IntMatrix {
        let mut m = IntMatrix::zeros(self.rows, cols.len());
        for r in 0..self.rows {
            for (j, &c) in cols.iter().enumerate() {
                m.set(r, j, self.get(r, c));
            }
        }
        m
    }

    /// Rows selected in order.
    pub fn select_rows(&self, rows: &[usize]) -> IntMatrix {
        let mut m = IntMatrix::zeros(rows.len(), self.cols);
        for (i, &r) in rows.iter().enumerate() {
            m.data[i * self.cols..(i + 1) * self.cols].copy_from_slice(self.row(r));
        }
        m
    }

    /// Horizontal concatenation [self | other].
    pub fn hcat(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.rows, other.rows);
        let mut m = IntMatrix::zeros(self.rows, self.cols + other.cols);
        for r in 0..self.rows {
            let dst = &mut m.data[r * (self.cols + other.cols)..(r + 1) * (self.cols + other.cols)];
            dst[..self.cols].copy_from_slice(self.row(r));
            dst[self.cols..].copy_from_slice(other.row(r));
        }
        m
    }
}

/// Integer arithmetic with overflow signalling.
trait Zint: Clone + PartialEq {
    fn from_i64(v: i64) -> Self;
    fn zero() -> Self;
    fn is_zero(&self) -> bool;
    fn is_unit(&self) -> bool;
    fn abs_lt(&self, other: &Self) -> bool;
    fn mul(&self, o: &Self) -> Option<Self>;
    fn sub(&self, o: &Self) -> Option<Self>;
    fn neg(&self) -> Option<Self>;
    fn is_negative(&self) -> bool;
    fn divides(&self, o: &Self) -> bool;
    fn div_exact(&self, o: &Self) -> Self;
    fn gcd(&self, o: &Self) -> Self;
    fn lcm(&self, o: &Self) -> Option<Self>;
    fn to_i64(&self) -> Option<i64>;
}

impl Zint for i128 {
    fn from_i64(v: i64) -> Self {
        v as i128
    }
    fn zero() -> Self {
        0
    }
    fn is_zero(&self) -> bool {
        *self == 0
    }
    fn is_unit(&self) -> bool {
        *self == 1 || *self == -1
    }
    fn abs_lt(&self, other: &Self) -> bool {
        self.unsigned_abs() < other.unsigned_abs()
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        self.checked_mul(*o)
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        self.checked_sub(*o)
    }
    fn neg(&self) -> Option<Self> {
        self.checked_neg()
    }
    fn is_negative(&self) -> bool {
        *self < 0
    }
    fn divides(&self, o: &Self) -> bool {
        *self != 0 && o % self == 0
    }
    fn div_exact(&self, o: &Self) -> Self {
        self / o
    }
    fn gcd(&self, o: &Self) -> Self {
        Integer::gcd(self, o)
    }
    fn lcm(&self, o: &Self) -> Option<Self> {
        let g = Integer::gcd(self, o);
        if g == 0 {
            return Some(0);
        }
        (self / g).checked_mul(*o).map(|v| v.abs())
    }
    fn to_i64(&self) -> Option<i64> {
        i64::try_from(*self).ok()
    }
}

impl Zint for BigInt {
    fn from_i64(v: i64) -> Self {
        BigInt::from(v)
    }
    fn zero() -> Self {
        Zero::zero()
    }
    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }
    fn is_unit(&self) -> bool {
        self.abs().is_one()
    }
    fn abs_lt(&self, other: &Self) -> bool {
        self.abs() < other.abs()
    }
    fn mul(&self, o: &Self) -> Option<Self> {
        Some(self * o)
    }
    fn sub(&self, o: &Self) -> Option<Self> {
        Some(self - o)
    }
    fn neg(&self) -> Option<Self> {
        Some(-self)
    }
    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
    fn divides(&self, o: &Self) -> bool {
        !Zero::is_zero(self) && Zero::is_zero(&(o % self))
    }
    fn div_exact(&self, o: &Self) -> Self {
        self / o
    }
    fn gcd(&self, o: &Self) -> Self {
        Integer::gcd(self, o)
    }
    fn lcm(&self, o: &Self) -> Option<Self> {
        Some(Integer::lcm(self, o))
    }
    fn to_i64(&self) -> Option<i64> {
        ToPrimitive::to_i64(self)
    }
}

struct Overflow;

type Zr<T> = std::result::Result<T, Overflow>;

fn lift<T: Zint>(m: &IntMatrix) -> Vec<Vec<T>> {
    (0..m.rows)
        .map(|r| m.row(r).iter().map(|&v| T::from_i64(v)).collect())
        .collect()
}

fn content<T: Zint>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |g, x| g.gcd(x))
}

/// target <- target - q * src (when src pivot divides) or a_p*target - a_t*src, then divide by content.
fn eliminate<T: Zint>(target: &mut [T], src: &[T], a_t: &T, a_p: &T) -> Zr<()> {
    if a_p.divides(a_t) {
        let q = a_t.div_exact(a_p);
        for (t, s) in target.iter_mut().zip(src) {
            if !s.is_zero() {
                *t = t.sub(&s.mul(&q).ok_or(Overflow)?).ok_or(Overflow)?;
            }
        }
    } else {
        for (t, s) in target.iter_mut().zip(src) {
            let lhs = t.mul(a_p).ok_or(Overflow)?;
            let rhs = s.mul(a_t).ok_or(Overflow)?;
            *t = lhs.sub(&rhs).ok_or(Overflow)?;
        }
        let g = content(target);
        if !g.is_zero() && !g.is_unit() {
            for t in target.iter_mut() {
                *t = t.div_exact(&g);
            }
        }
    }
    Ok(())
}

/// Row echelon form; with `full` the pivot columns are also cleared above.
/// Returns the reduced rows (pivot rows first) and pivot columns.
fn echelon<T: Zint>(mut rows: Vec<Vec<T>>, ncols: usize, full: bool) -> Zr<(Vec<Vec<T>>, Vec<usize>)> {
    let mut pivots = Vec::new();
    let mut top = 0;
    for c in 0..ncols {
        if top == rows.len() {
            break;
        }
        // Prefer a unit pivot, otherwise the smallest magnitude.
        let mut best: Option<usize> = None;
        for r in top..rows.len() {
            if rows[r][c].is_zero() {
                continue;
            }
            match best {
                None => best = Some(r),
                Some(b) => {
                    if rows[r][c].abs_lt(&rows[b][c]) {
                        best = Some(r);
                    }
                }
            }
            if rows[r][c].is_unit() {
                best = Some(r);
                break;
            }
        }
        let Some(p) = best else { continue };
        rows.swap(top, p);
        let (head, tail) = rows.split_at_mut(top + 1);
        let pivot_row = &head[top];
        let a_p = pivot_row[c].clone();
        for row in tail.iter_mut() {
            if !row[c].is_zero() {
                let a_t = row[c].clone();
                eliminate(row, pivot_row, &a_t, &a_p)?;
            }
        }
        if full {
            let (above, rest) = rows.split_at_mut(top);
            let pivot_row = &rest[0];
            for row in above.iter_mut() {
                if !row[c].is_zero() {
                    let a_t = row[c].clone();
                    eliminate(row, pivot_row, &a_t, &a_p)?;
                }
            }
        }
        pivots.push(c);
        top += 1;
    }
    rows.truncate(top);
    Ok((rows, pivots))
}

fn rank_generic<T: Zint>(m: &IntMatrix) -> Zr<usize> {
    // Eliminate along the shorter side.
    let (rows, cols) = if m.rows <= m.cols {
        (lift::<T>(m), m.cols)
    } else {
        (lift::<T>(&m.transpose()), m.rows)
    };
    Ok(echelon(rows, cols, false)?.1.len())
}

/// Exact rank over Q.
pub fn rank_q(m: &IntMatrix) -> usize {
    if m.rows == 0 || m.cols == 0 {
        return 0;
    }
    match rank_generic::<i128>(m) {
        Ok(r) => r,
        Err(Overflow) => match rank_generic::<BigInt>(m) {
            Ok(r) => r,
            Err(Overflow) => unreachable!("BigInt arithmetic does not overflow"),
        },
    }
}

fn nullspace_generic<T: Zint>(m: &IntMatrix) -> Zr<Vec<Vec<T>>> {
    let (rows, pivots) = echelon(lift::<T>(m), m.cols, true)?;
    let mut is_pivot = vec![None; m.cols];
    for (r, &c) in pivots.iter().enumerate() {
        is_pivot[c] = Some(r);
    }
    let mut basis = Vec::new();
    for f in 0..m.cols {
        if is_pivot[f].is_some() {
            continue;
        }
        // x_f = L, x_{c_r} = -row_r[f] * L / p_r
        let mut l = T::from_i64(1);
        for (r, &c) in pivots.iter().enumerate() {
            if !rows[r][f].is_zero() {
                let p = &rows[r][c];
                let g = p.gcd(&rows[r][f]);
                let need = p.div_exact(&g);
                l = l.lcm(&need).ok_or(Overflow)?;
            }
        }
        let mut x = vec![T::zero(); m.cols];
        x[f] = l.clone();
        for (r, &c) in pivots.iter().enumerate() {
            if !rows[r][f].is_zero() {
                let p = &rows[r][c];
                let num = rows[r][f].mul(&l).ok_or(Overflow)?;
                x[c] = num.div_exact(p).neg().ok_or(Overflow)?;
            }
        }
        let g = content(&x);
        if !g.is_zero() && !g.is_unit() {
            for v in x.iter_mut() {
                *v = v.div_exact(&g);
            }
        }
        if x[f].is_negative() {
            for v in x.iter_mut() {
                *v = v.neg().ok_or(Overflow)?;
            }
        }
        basis.push(x);
    }
    Ok(basis)
}

fn to_i64_vecs<T: Zint>(v: Vec<Vec<T>>) -> Result<Vec<Vec<i64>>> {
    v.into_iter()
        .map(|row| {
            row.iter()
                .map(|x| x.to_i64().ok_or(QtdaError::ExactOverflow))
                .collect()
        })
        .collect()
}

/// Integer basis of the right nullspace over Q (one vector per free column,
/// primitive, with a positive entry at its free column).
pub fn nullspace_q(m: &IntMatrix) -> Result<Vec<Vec<i64>>> {
    match nullspace_generic::<i128>(m) {
        Ok(b) => to_i64_vecs(b),
        Err(Overflow) => match nullspace_generic::<BigInt>(m) {
            Ok(b) => to_i64_vecs(b),
            Err(Overflow) => unreachable!("BigInt arithmetic does not overflow"),
        },
    }
}

/// Result of reducing the columns of D by invertible column operations: R = D·Y.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnReduction {
    pub reduced: IntMatrix,
    pub y: IntMatrix,
    /// Columns of `reduced` that are identically zero, in increasing order.
    pub zero_columns: Vec<usize>,
}

fn column_reduce_generic<T: Zint>(d: &IntMatrix) -> Zr<(Vec<Vec<T>>, Vec<Vec<T>>)> {
    let m = d.rows;
    let n = d.cols;
    let mut cols: Vec<Vec<T>> = (0..n)
        .map(|c| (0..m).map(|r| T::from_i64(d.get(r, c))).collect())
        .collect();
    let mut ys: Vec<Vec<T>> = (0..n)
        .map(|c| {
            let mut v = vec![T::zero(); n];
            v[c] = T::from_i64(1);
            v
        })
        .collect();
    let low = |col: &[T]| col.iter().rposition(|x| !x.is_zero());
    let mut owner: Vec<Option<usize>> = vec![None; m];
    for j in 0..n {
        while let Some(l) = low(&cols[j]) {
            let Some(p) = owner[l] else {
                owner[l] = Some(j);
                break;
            };
            let a_t = cols[j][l].clone();
            let a_p = cols[p][l].clone();
            // Combine D-column and Y-column as one vector so scaling stays consistent.
            let mut joint: Vec<T> = cols[j].iter().chain(&ys[j]).cloned().collect();
            let src: Vec<T> = cols[p].iter().chain(&ys[p]).cloned().collect();
            eliminate(&mut joint, &src, &a_t, &a_p)?;
            let (dc, yc) = joint.split_at(m);
            cols[j] = dc.to_vec();
            ys[j] = yc.to_vec();
        }
    }
    Ok((cols, ys))
}

fn assemble<T: Zint>(cols: Vec<Vec<T>>, ys: Vec<Vec<T>>, m: usize) -> Result<ColumnReduction> {
    let n = cols.len();
    let mut reduced = IntMatrix::zeros(m, n);
    let mut y = IntMatrix::zeros(n, n);
    let mut zero_columns = Vec::new();
    for j in 0..n {
        let mut all_zero = true;
        for r in 0..m {
            let v = cols[j][r].to_i64().ok_or(QtdaError::ExactOverflow)?;
            all_zero &= v == 0;
            reduced.set(r, j, v);
        }
        for r in 0..n {
            y.set(r, j, ys[j][r].to_i64().ok_or(QtdaError::ExactOverflow)?);
        }
        if all_zero {
            zero_columns.push(j);
        }
    }
    Ok(ColumnReduction {
        reduced,
        y,
        zero_columns,
    })
}

/// Left-to-right column reduction with leftmost-lowest pivots over Q, keeping
/// every column integral. `Y` is accumulated explicitly and is invertible over Q.
pub fn column_reduce_q(d: &IntMatrix) -> Result<ColumnReduction> {
    match column_reduce_generic::<i128>(d) {
        Ok((c, y)) => assemble(c, y, d.rows),
        Err(Overflow) => match column_reduce_generic::<BigInt>(d) {
            Ok((c, y)) => assemble(c, y, d.rows),
            Err(Overflow) => unreachable!("BigInt arithmetic does not overflow"),
        },
    }
}

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1u64;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = ((r as u128 * b as u128) % p as u128) as u64;
        }
        b = ((b as u128 * b as u128) % p as u128) as u64;
        e >>= 1;
    }
    r
}

fn inv_mod(a: u64, p: u64) -> u64 {
    pow_mod(a, p - 2, p)
}

pub fn reduce_mod(v: i64, p: u64) -> u64 {
    v.rem_euclid(p as i64) as u64
}

pub fn is_prime(p: u64) -> bool {
    if p < 2 {
        return false;
    }
    let mut d = 2;
    while d * d <= p {
        if p % d == 0 {
            return false;
        }
        d += 1;
    }
    true
}

fn echelon_mod(mut rows: Vec<Vec<u64>>, ncols: usize, p: u64, full: bool) -> (Vec<Vec<u64>>, Vec<usize>) {
    let mut pivots = Vec::new();
    let mut top = 0;
    for c in 0..ncols {
        if top == rows.len() {
            break;
        }
        let Some(r) = (top..rows.len()).find(|&r| rows[r][c] != 0) else {
            continue;
        };
        rows.swap(top, r);
        let inv = inv_mod(rows[top][c], p);
        for v in rows[top].iter_mut() {
            *v = ((*v as u128 * inv as u128) % p as u128) as u64;
        }
        let pivot_row = rows[top].clone();
        for (i, row) in rows.iter_mut().enumerate() {
            if i == top || (!full && i < top) || row[c] == 0 {
                continue;
            }
            let f = row[c];
            for (t, s) in row.iter_mut().zip(&pivot_row) {
                if *s != 0 {
                    let sub = ((f as u128 * *s as u128) % p as u128) as u64;
                    *t = (*t + p - sub) % p;
                }
            }
        }
        pivots.push(c);
        top += 1;
    }
    rows.truncate(top);
    (rows, pivots)
}

fn lift_mod(m: &IntMatrix, p: u64) -> Vec<Vec<u64>> {
    (0..m.rows)
        .map(|r| m.row(r).iter().map(|&v| reduce_mod(v, p)).collect())
        .collect()
}

/// Rank over GF(p), entries reduced mod p.
pub fn rank_mod_p(m: &IntMatrix, p: u64) -> usize {
    if m.rows == 0 || m.cols == 0 {
        return 0;
    }
    echelon_mod(lift_mod(m, p), m.cols, p, false).1.len()
}

/// Nullspace basis over GF(p) with residues in [0, p).
pub fn nullspace_mod_p(m: &IntMatrix, p: u64) -> Vec<Vec<u64>> {
    let (rows, pivots) = echelon_mod(lift_mod(m, p), m.cols, p, true);
    let mut is_pivot = vec![false; m.cols];
    for &c in &pivots {
        is_pivot[c] = true;
    }
    (0..m.cols)
        .filter(|&f| !is_pivot[f])
        .map(|f| {
            let mut x = vec![0u64; m.cols];
            x[f] = 1;
            for (r, &c) in pivots.iter().enumerate() {
                x[c] = (p - rows[r][f]) % p;
            }
            x
        })
        .collect()
}

/// Greatest common divisor of a slice, used to normalize chain coefficients.
pub fn gcd_slice(v: &[i64]) -> i64 {
    v.iter().fold(0i64, |g, &x| Integer::gcd(&g, &x))
}

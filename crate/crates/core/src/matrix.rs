//! Dense square matrices over big integers.

use std::fmt;

use faer::Mat;
use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};

use crate::num::{ln_big, Q};

#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    n: usize,
    a: Vec<BigInt>,
}

impl IntMatrix {
    pub fn zeros(n: usize) -> Self {
        IntMatrix { n, a: vec![BigInt::zero(); n * n] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.a[i * n + i] = BigInt::one();
        }
        m
    }

    pub fn from_rows<T: Into<BigInt> + Clone>(rows: &[Vec<T>]) -> Self {
        let n = rows.len();
        let mut m = Self::zeros(n);
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), n, "matrix must be square");
            for (j, x) in r.iter().enumerate() {
                m.a[i * n + j] = x.clone().into();
            }
        }
        m
    }

    /// I + E_{ij}
    pub fn elementary(n: usize, i: usize, j: usize) -> Self {
        let mut m = Self::identity(n);
        m.a[i * n + j] += 1;
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.a[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.a[i * self.n + j] = v;
    }

    pub fn rows(&self) -> Vec<Vec<BigInt>> {
        (0..self.n).map(|i| self.a[i * self.n..(i + 1) * self.n].to_vec()).collect()
    }

    /// Right-multiplication by I + E_{src,dst}: column dst += column src.
    pub fn add_col(&mut self, dst: usize, src: usize) {
        for r in 0..self.n {
            let v = self.a[r * self.n + src].clone();
            self.a[r * self.n + dst] += v;
        }
    }

    pub fn mul(&self, o: &IntMatrix) -> IntMatrix {
        assert_eq!(self.n, o.n);
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let x = &self.a[i * n + k];
                if x.is_zero() {
                    continue;
                }
                for j in 0..n {
                    let y = &o.a[k * n + j];
                    if !y.is_zero() {
                        out.a[i * n + j] += x * y;
                    }
                }
            }
        }
        out
    }

    pub fn pow(&self, mut e: u64) -> IntMatrix {
        let mut base = self.clone();
        let mut acc = Self::identity(self.n);
        while e > 0 {
            if e & 1 == 1 {
                acc = acc.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        acc
    }

    pub fn transpose(&self) -> IntMatrix {
        let n = self.n;
        let mut t = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                t.a[j * n + i] = self.a[i * n + j].clone();
            }
        }
        t
    }

    pub fn mul_vec_q(&self, v: &[Q]) -> Vec<Q> {
        (0..self.n)
            .map(|i| {
                let mut s = Q::zero();
                for (j, x) in v.iter().enumerate() {
                    let c = &self.a[i * self.n + j];
                    if !c.is_zero() {
                        s += x * BigRational::from_integer(c.clone());
                    }
                }
                s
            })
            .collect()
    }

    pub fn mul_vec_int(&self, v: &[BigInt]) -> Vec<BigInt> {
        (0..self.n).map(|i| (0..self.n).fold(BigInt::zero(), |s, j| s + &self.a[i * self.n + j] * &v[j])).collect()
    }

    /// ‖·‖₁: sum of absolute entries.
    pub fn sum_norm(&self) -> BigInt {
        self.a.iter().map(|x| x.abs()).sum()
    }

    /// ‖·‖∞: largest absolute entry.
    pub fn sup_norm(&self) -> BigInt {
        self.a.iter().map(|x| x.abs()).max().unwrap_or_default()
    }

    /// Operator norm induced by the sup norm: largest absolute row sum.
    pub fn row_sum_norm(&self) -> BigInt {
        (0..self.n)
            .map(|i| self.a[i * self.n..(i + 1) * self.n].iter().map(|x| x.abs()).sum::<BigInt>())
            .max()
            .unwrap_or_default()
    }

    /// Q_β = Σ_α Q_{αβ}
    pub fn column_sums(&self) -> Vec<BigInt> {
        (0..self.n).map(|j| (0..self.n).map(|i| &self.a[i * self.n + j]).sum()).collect()
    }

    pub fn max_column_sum(&self) -> BigInt {
        self.column_sums().into_iter().max().unwrap_or_default()
    }

    pub fn min_entry(&self) -> BigInt {
        self.a.iter().min().cloned().unwrap_or_default()
    }

    pub fn is_positive(&self) -> bool {
        self.a.iter().all(|x| x.is_positive())
    }

    pub fn ln_sum_norm(&self) -> f64 {
        ln_big(&self.sum_norm())
    }

    pub fn trace(&self) -> BigInt {
        (0..self.n).map(|i| &self.a[i * self.n + i]).sum()
    }

    /// Bareiss fraction-free elimination.
    pub fn det(&self) -> BigInt {
        let n = self.n;
        let mut m = self.a.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n {
            if m[k * n + k].is_zero() {
                let Some(p) = (k + 1..n).find(|&r| !m[r * n + k].is_zero()) else {
                    return BigInt::zero();
                };
                for c in 0..n {
                    m.swap(k * n + c, p * n + c);
                }
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = &m[i * n + j] * &m[k * n + k] - &m[i * n + k] * &m[k * n + j];
                    m[i * n + j] = v / &prev;
                }
            }
            prev = m[k * n + k].clone();
        }
        sign * &m[n * n - 1]
    }

    /// Coefficients of det(X·I − A), highest degree first (Faddeev–LeVerrier).
    pub fn charpoly(&self) -> Vec<BigInt> {
        let n = self.n;
        let mut c = vec![BigInt::zero(); n + 1];
        c[0] = BigInt::one();
        let mut mk = IntMatrix::zeros(n);
        for k in 1..=n {
            // M_k = A M_{k-1} + c_{k-1} I
            let mut next = self.mul(&mk);
            for i in 0..n {
                next.a[i * n + i] += &c[k - 1];
            }
            mk = next;
            let t = self.mul(&mk).trace();
            let (qt, r) = (-t).div_rem(&BigInt::from(k));
            debug_assert!(r.is_zero());
            c[k] = qt;
        }
        c
    }

    /// Exact inverse; panics unless det = ±1.
    pub fn inverse_unimodular(&self) -> IntMatrix {
        let n = self.n;
        let mut m: Vec<Q> = self.a.iter().map(|x| BigRational::from_integer(x.clone())).collect();
        let mut inv: Vec<Q> = IntMatrix::identity(n).a.into_iter().map(BigRational::from_integer).collect();
        for col in 0..n {
            let p = (col..n).find(|&r| !m[r * n + col].is_zero()).expect("singular matrix");
            if p != col {
                for c in 0..n {
                    m.swap(col * n + c, p * n + c);
                    inv.swap(col * n + c, p * n + c);
                }
            }
            let piv = m[col * n + col].clone();
            for c in 0..n {
                m[col * n + c] = &m[col * n + c] / &piv;
                inv[col * n + c] = &inv[col * n + c] / &piv;
            }
            for r in 0..n {
                if r == col || m[r * n + col].is_zero() {
                    continue;
                }
                let f = m[r * n + col].clone();
                for c in 0..n {
                    let a = &m[col * n + c] * &f;
                    m[r * n + c] -= a;
                    let b = &inv[col * n + c] * &f;
                    inv[r * n + c] -= b;
                }
            }
        }
        IntMatrix {
            n,
            a: inv
                .into_iter()
                .map(|x| {
                    assert!(x.is_integer(), "matrix is not unimodular");
                    x.to_integer()
                })
                .collect(),
        }
    }

    pub fn to_f64(&self) -> Mat<f64> {
        Mat::from_fn(self.n, self.n, |i, j| self.a[i * self.n + j].to_f64().unwrap_or(f64::INFINITY))
    }
}

impl fmt::Debug for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.rows().iter().map(|r| r.iter().map(|x| x.to_string()).collect::<Vec<_>>())).finish()
    }
}

impl Serialize for IntMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<String>> = self.rows().iter().map(|r| r.iter().map(|x| x.to_string()).collect()).collect();
        rows.serialize(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(rows: &[[i64; 3]]) -> IntMatrix {
        IntMatrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>())
    }

    #[test]
    fn det_and_inverse() {
        let a = m(&[[2, 1, 1], [1, 1, 0], [1, 0, 1]]);
        assert_eq!(a.det(), BigInt::from(0));
        let b = m(&[[1, 2, 0], [0, 1, 3], [0, 0, 1]]);
        assert_eq!(b.det(), BigInt::one());
        assert_eq!(b.mul(&b.inverse_unimodular()), IntMatrix::identity(3));
        let p = m(&[[0, 1, 0], [0, 0, 1], [1, 0, 0]]);
        assert_eq!(p.det(), BigInt::one());
    }

    #[test]
    fn charpoly_matches_hand_computation() {
        // [[2,1],[1,1]] has X² − 3X + 1
        let a = IntMatrix::from_rows(&[vec![2, 1], vec![1, 1]]);
        assert_eq!(a.charpoly(), vec![BigInt::from(1), BigInt::from(-3), BigInt::from(1)]);
    }

    #[test]
    fn pow_agrees_with_repeated_product() {
        let a = m(&[[1, 1, 0], [0, 1, 1], [1, 0, 1]]);
        let mut r = IntMatrix::identity(3);
        for _ in 0..13 {
            r = r.mul(&a);
        }
        assert_eq!(a.pow(13), r);
        assert_eq!(a.pow(0), IntMatrix::identity(3));
    }

    #[test]
    fn norms() {
        let a = m(&[[1, 5, 0], [2, 1, 1], [0, 0, 3]]);
        assert_eq!(a.sum_norm(), BigInt::from(13));
        assert_eq!(a.sup_norm(), BigInt::from(5));
        assert_eq!(a.row_sum_norm(), BigInt::from(6));
        assert_eq!(a.column_sums(), vec![BigInt::from(3), BigInt::from(6), BigInt::from(4)]);
    }
}

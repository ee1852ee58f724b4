//! Test-only reference arithmetic on plain nested vectors. Nothing here calls
//! into nalgebra, so it stays independent of the code under test.
#![allow(dead_code)]

use habdf_core::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type M = Vec<Vec<f64>>;
pub type V = Vec<f64>;

pub fn zeros(r: usize, c: usize) -> M {
    vec![vec![0.0; c]; r]
}

pub fn eye(n: usize) -> M {
    let mut m = zeros(n, n);
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn mul(a: &M, b: &M) -> M {
    let (r, k, c) = (a.len(), b.len(), b[0].len());
    let mut out = zeros(r, c);
    for i in 0..r {
        for j in 0..c {
            let mut s = 0.0;
            for t in 0..k {
                s += a[i][t] * b[t][j];
            }
            out[i][j] = s;
        }
    }
    out
}

pub fn mulv(a: &M, x: &V) -> V {
    a.iter()
        .map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum())
        .collect()
}

pub fn t(a: &M) -> M {
    let mut out = zeros(a[0].len(), a.len());
    for (i, row) in a.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            out[j][i] = *x;
        }
    }
    out
}

pub fn add(a: &M, b: &M) -> M {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x + y).collect())
        .collect()
}

pub fn sub(a: &M, b: &M) -> M {
    a.iter()
        .zip(b)
        .map(|(r, s)| r.iter().zip(s).map(|(x, y)| x - y).collect())
        .collect()
}

pub fn addv(a: &V, b: &V) -> V {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn subv(a: &V, b: &V) -> V {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn scale(a: &M, s: f64) -> M {
    a.iter()
        .map(|r| r.iter().map(|x| x * s).collect())
        .collect()
}

/// Gauss-Jordan inverse with partial pivoting.
pub fn inv(a: &M) -> M {
    let n = a.len();
    let mut aug: M = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&x, &y| aug[x][col].abs().total_cmp(&aug[y][col].abs()))
            .unwrap();
        aug.swap(col, piv);
        let p = aug[col][col];
        assert!(p.abs() > 1e-300, "singular matrix in oracle");
        for x in aug[col].iter_mut() {
            *x /= p;
        }
        for r in 0..n {
            if r != col {
                let f = aug[r][col];
                if f != 0.0 {
                    let pivot_row = aug[col].clone();
                    for (x, p) in aug[r].iter_mut().zip(&pivot_row) {
                        *x -= f * p;
                    }
                }
            }
        }
    }
    aug.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn to_m(m: &DMatrix<f64>) -> M {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

pub fn to_v(v: &DVector<f64>) -> V {
    v.iter().copied().collect()
}

pub fn from_m(m: &M) -> DMatrix<f64> {
    DMatrix::from_fn(m.len(), m[0].len(), |i, j| m[i][j])
}

pub fn from_v(v: &V) -> DVector<f64> {
    DVector::from_column_slice(v)
}

/// Textbook Kalman update: K = P C^T (C P C^T + R)^-1, P' = (I - K C) P.
pub fn naive_update(x: &V, p: &M, c: &M, r: &M, y: &V) -> (V, M) {
    let s = add(&mul(&mul(c, p), &t(c)), r);
    let k = mul(&mul(p, &t(c)), &inv(&s));
    let innov = subv(y, &mulv(c, x));
    let x2 = addv(x, &mulv(&k, &innov));
    let p2 = mul(&sub(&eye(x.len()), &mul(&k, c)), p);
    (x2, p2)
}

pub fn naive_predict(x: &V, p: &M, a: &M, q: &M) -> (V, M) {
    (mulv(a, x), add(&mul(&mul(a, p), &t(a)), q))
}

pub fn max_abs_diff_m(a: &M, b: &DMatrix<f64>) -> f64 {
    let mut worst: f64 = 0.0;
    for (i, row) in a.iter().enumerate() {
        for (j, x) in row.iter().enumerate() {
            worst = worst.max((x - b[(i, j)]).abs());
        }
    }
    worst
}

pub fn max_abs_diff_v(a: &V, b: &DVector<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_m(rng: &mut ChaCha8Rng, r: usize, c: usize, amp: f64) -> M {
    (0..r)
        .map(|_| (0..c).map(|_| rng.random_range(-amp..amp)).collect())
        .collect()
}

/// Random symmetric positive definite matrix `L L^T + floor I`.
pub fn rand_spd(rng: &mut ChaCha8Rng, n: usize, amp: f64, floor: f64) -> M {
    let l = rand_m(rng, n, n, amp);
    add(&mul(&l, &t(&l)), &scale(&eye(n), floor))
}

pub fn gaussian(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

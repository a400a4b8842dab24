#![allow(dead_code)]

use num_complex::Complex64;
use oqrw::ComplexMatrix as M;
use rand::Rng;

pub fn cx(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `d x d` matrix from `2 d²` reals (re, im interleaved, row-major).
pub fn matrix_from(vals: &[f64], d: usize) -> M {
    M::from_fn(d, d, |i, j| {
        let k = 2 * (i * d + j);
        cx(vals[k], vals[k + 1])
    })
}

/// `X X* / Tr(X X*)`.
pub fn density_from(vals: &[f64], d: usize) -> M {
    let x = matrix_from(vals, d);
    let m = &x * &x.adjoint();
    let tr: f64 = (0..d).map(|i| m[(i, i)].re).sum();
    m.scale_real(1.0 / tr)
}

/// Gram–Schmidt on the columns of a generic matrix.
pub fn unitary_from(vals: &[f64], d: usize) -> M {
    let x = matrix_from(vals, d);
    let mut cols: Vec<Vec<Complex64>> = Vec::new();
    for j in 0..d {
        let mut v: Vec<Complex64> = (0..d).map(|i| x[(i, j)]).collect();
        for _ in 0..2 {
            for q in &cols {
                let proj: Complex64 = q.iter().zip(&v).map(|(a, b)| a.conj() * b).sum();
                for (a, b) in v.iter_mut().zip(q) {
                    *a -= proj * b;
                }
            }
        }
        let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        cols.push(v.into_iter().map(|z| z / n).collect());
    }
    M::from_fn(d, d, |i, j| cols[j][i])
}

pub fn random_vals(rng: &mut impl Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

pub fn random_density(rng: &mut impl Rng, d: usize) -> M {
    density_from(&random_vals(rng, 2 * d * d), d)
}

pub fn random_unitary(rng: &mut impl Rng, d: usize) -> M {
    unitary_from(&random_vals(rng, 2 * d * d), d)
}

/// Row-stochastic matrix with some entries forced to zero.
pub fn random_stochastic(rng: &mut impl Rng, v: usize) -> Vec<Vec<f64>> {
    (0..v)
        .map(|_| {
            let mut row: Vec<f64> = (0..v)
                .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random_range(0.05..1.0) })
                .collect();
            if row.iter().all(|x| *x == 0.0) {
                row[rng.random_range(0..v)] = 1.0;
            }
            let s: f64 = row.iter().sum();
            row.iter().map(|x| x / s).collect()
        })
        .collect()
}

/// `μ P^n` by repeated row-vector products.
pub fn classical_law(p: &[Vec<f64>], mu: &[f64], n: usize) -> Vec<f64> {
    let mut cur = mu.to_vec();
    for _ in 0..n {
        let mut next = vec![0.0; cur.len()];
        for (j, row) in p.iter().enumerate() {
            for (i, pji) in row.iter().enumerate() {
                next[i] += cur[j] * pji;
            }
        }
        cur = next;
    }
    cur
}

/// Position law of the `(1/√3)` walk computed with plain 2x2 real arithmetic.
pub fn sqrt3_reference(n: usize) -> Vec<(i64, f64)> {
    type R2 = [[f64; 2]; 2];
    let s = 1.0 / 3f64.sqrt();
    let b: R2 = [[s, s], [0.0, s]];
    let c: R2 = [[s, 0.0], [-s, s]];
    let mul = |x: &R2, y: &R2| -> R2 {
        let mut o = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    o[i][j] += x[i][k] * y[k][j];
                }
            }
        }
        o
    };
    let tr = |x: &R2| [[x[0][0], x[1][0]], [x[0][1], x[1][1]]];
    let conj = |m: &R2, rho: &R2| mul(&mul(m, rho), &tr(m));
    let size = 2 * n + 1;
    let mut blocks = vec![[[0.0; 2]; 2]; size + 2];
    blocks[n + 1] = [[1.0, 0.0], [0.0, 0.0]];
    for _ in 0..n {
        let mut next = vec![[[0.0; 2]; 2]; size + 2];
        for k in 1..=size {
            let l = conj(&b, &blocks[k]);
            let r = conj(&c, &blocks[k]);
            for i in 0..2 {
                for j in 0..2 {
                    next[k - 1][i][j] += l[i][j];
                    next[k + 1][i][j] += r[i][j];
                }
            }
        }
        blocks = next;
    }
    blocks
        .iter()
        .enumerate()
        .map(|(k, m)| (k as i64 - n as i64 - 1, m[0][0] + m[1][1]))
        .filter(|(_, p)| *p > 1e-300)
        .collect()
}

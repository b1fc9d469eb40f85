//! Reference implementations on nested `Vec`s. Nothing here calls into the
//! library's numerics, so agreement with it is evidence rather than
//! tautology.
#![allow(dead_code)]

use dmlp_core::Matrix;
use rand::Rng;

pub type M = Vec<Vec<f64>>;

pub fn from_matrix(m: &Matrix) -> M {
    m.iter_rows().map(<[f64]>::to_vec).collect()
}

pub fn to_matrix(m: &M) -> Matrix {
    Matrix::from_rows(m).unwrap()
}

pub fn random(rng: &mut impl Rng, rows: usize, cols: usize, scale: f64) -> M {
    (0..rows)
        .map(|_| (0..cols).map(|_| rng.gen_range(-scale..scale)).collect())
        .collect()
}

pub fn transpose(a: &M) -> M {
    let cols = a.first().map_or(0, Vec::len);
    (0..cols).map(|j| a.iter().map(|r| r[j]).collect()).collect()
}

pub fn mul(a: &M, b: &M) -> M {
    let inner = b.len();
    let cols = b.first().map_or(0, Vec::len);
    a.iter()
        .map(|r| {
            assert_eq!(r.len(), inner);
            (0..cols).map(|j| (0..inner).map(|k| r[k] * b[k][j]).sum()).collect()
        })
        .collect()
}

/// Gauss-Jordan elimination with partial pivoting.
pub fn inverse(a: &M) -> M {
    let n = a.len();
    let mut aug: M = a
        .iter()
        .enumerate()
        .map(|(i, r)| {
            let mut row = r.clone();
            row.extend((0..n).map(|j| if i == j { 1.0 } else { 0.0 }));
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&x, &y| aug[x][col].abs().total_cmp(&aug[y][col].abs()))
            .unwrap();
        aug.swap(col, pivot);
        let p = aug[col][col];
        assert!(p.abs() > 1e-300, "singular matrix in oracle");
        for v in aug[col].iter_mut() {
            *v /= p;
        }
        let pivot_row = aug[col].clone();
        for (r, row) in aug.iter_mut().enumerate() {
            let f = row[col];
            if r != col && f != 0.0 {
                for (v, p) in row.iter_mut().zip(&pivot_row) {
                    *v -= f * p;
                }
            }
        }
    }
    aug.into_iter().map(|r| r[n..].to_vec()).collect()
}

pub fn softmax(row: &[f64], alpha: f64) -> Vec<f64> {
    let m = row.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(alpha * b));
    let e: Vec<f64> = row.iter().map(|&v| (alpha * v - m).exp()).collect();
    let z: f64 = e.iter().sum();
    e.into_iter().map(|v| v / z).collect()
}

pub fn softmax_all(y: &M, alpha: f64) -> M {
    y.iter().map(|r| softmax(r, alpha)).collect()
}

pub fn entropy(row: &[f64]) -> f64 {
    -softmax(row, 1.0)
        .iter()
        .filter(|&&q| q > 0.0)
        .map(|q| q * q.ln())
        .sum::<f64>()
}

fn gram(f: &M, lambda: f64) -> M {
    let mut g = mul(&transpose(f), f);
    for (i, row) in g.iter_mut().enumerate() {
        row[i] += lambda;
    }
    g
}

/// `(FᵀF + λI)⁻¹ Fᵀ S` through an explicit inverse.
pub fn ridge_explicit(f: &M, s: &M, lambda: f64) -> M {
    mul(&mul(&inverse(&gram(f, lambda)), &transpose(f)), s)
}

/// Minimizes `‖S − F w‖² + λ‖w‖²` column by column with conjugate gradients,
/// touching the objective only through its gradient `2(Fᵀ(Fw − s) + λw)`.
pub fn ridge_iterative(f: &M, s: &M, lambda: f64) -> M {
    let d = f[0].len();
    let c = s[0].len();
    let ft = transpose(f);
    let apply = |x: &[f64]| -> Vec<f64> {
        let fx: Vec<f64> = f.iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect();
        ft.iter()
            .zip(x)
            .map(|(r, xi)| r.iter().zip(&fx).map(|(a, b)| a * b).sum::<f64>() + lambda * xi)
            .collect()
    };
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut w = vec![vec![0.0; c]; d];
    for j in 0..c {
        let rhs: Vec<f64> = ft
            .iter()
            .map(|r| r.iter().zip(s).map(|(a, srow)| a * srow[j]).sum())
            .collect();
        let mut x = vec![0.0; d];
        for _restart in 0..8 {
            let ax = apply(&x);
            let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
            let mut p = r.clone();
            let mut rr = dot(&r, &r);
            for _ in 0..4 * d {
                if rr <= 1e-40 {
                    break;
                }
                let ap = apply(&p);
                let step = rr / dot(&p, &ap);
                for k in 0..d {
                    x[k] += step * p[k];
                    r[k] -= step * ap[k];
                }
                let next = dot(&r, &r);
                for k in 0..d {
                    p[k] = r[k] + next / rr * p[k];
                }
                rr = next;
            }
        }
        for k in 0..d {
            w[k][j] = x[k];
        }
    }
    w
}

/// Validation loss of predictions `p` against one-hot `y`.
pub fn val_loss(p: &M, y: &M, gamma: f64) -> f64 {
    let n = p.len() as f64;
    p.iter()
        .zip(y)
        .map(|(pr, yr)| pr.iter().zip(yr).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() + gamma * entropy(pr))
        .sum::<f64>()
        / n
}

#[derive(Clone, Copy)]
pub struct Hyper {
    pub alpha: f64,
    pub lambda: f64,
    pub gamma: f64,
}

/// Label logits → soft labels → ridge weights → validation predictions →
/// validation loss.
pub fn composed_loss(f: &M, y: &M, fv: &M, yv: &M, h: Hyper) -> f64 {
    let w = ridge_explicit(f, &softmax_all(y, h.alpha), h.lambda);
    val_loss(&mul(fv, &w), yv, h.gamma)
}

/// Central differences with step `h` on every entry of `x`.
pub fn central_diff(x: &M, h: f64, mut f: impl FnMut(&M) -> f64) -> M {
    let mut grad = vec![vec![0.0; x[0].len()]; x.len()];
    let mut probe = x.clone();
    for i in 0..x.len() {
        for j in 0..x[0].len() {
            let orig = probe[i][j];
            probe[i][j] = orig + h;
            let up = f(&probe);
            probe[i][j] = orig - h;
            let down = f(&probe);
            probe[i][j] = orig;
            grad[i][j] = (up - down) / (2.0 * h);
        }
    }
    grad
}

/// Mean cross entropy of `softmax(XW + b)` against `t` plus `γ`-weighted
/// prediction entropy.
pub fn classifier_loss(x: &M, w: &M, b: &[f64], t: &M, gamma: f64) -> f64 {
    let z: M = mul(x, w)
        .into_iter()
        .map(|r| r.iter().zip(b).map(|(a, c)| a + c).collect())
        .collect();
    let n = x.len() as f64;
    z.iter()
        .zip(t)
        .map(|(zr, tr)| {
            let q = softmax(zr, 1.0);
            -tr.iter().zip(&q).map(|(ti, qi)| ti * qi.ln()).sum::<f64>() + gamma * entropy(zr)
        })
        .sum::<f64>()
        / n
}

/// Worst violation of `|a − e| ≤ rel·|e|`, with entries where `|e| < floor`
/// compared against `abs` instead. Returns `(worst ratio, position)`; a
/// ratio ≤ 1 means every entry passes.
pub fn worst_mismatch(actual: &M, expected: &M, rel: f64, floor: f64, abs: f64) -> (f64, (usize, usize)) {
    let mut worst = (0.0, (0, 0));
    for (i, (ar, er)) in actual.iter().zip(expected).enumerate() {
        for (j, (&a, &e)) in ar.iter().zip(er).enumerate() {
            let ratio = if e.abs() < floor {
                (a - e).abs() / abs
            } else {
                (a - e).abs() / (rel * e.abs())
            };
            if ratio > worst.0 || ratio.is_nan() {
                worst = (if ratio.is_nan() { f64::INFINITY } else { ratio }, (i, j));
            }
        }
    }
    worst
}

pub fn max_abs_diff(a: &M, b: &M) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q).abs()))
        .fold(0.0, f64::max)
}

pub fn frobenius(a: &M) -> f64 {
    a.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
}

//! Independent reference implementations used only by the tests.
#![allow(dead_code, clippy::needless_range_loop)]

use giss_clime::linalg::DenseMatrix;
use giss_clime::rng::Stream;

/// All eigenvalues of a symmetric matrix by cyclic Jacobi rotations, ascending.
pub fn jacobi_eigenvalues(m: &DenseMatrix) -> Vec<f64> {
    let n = m.rows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| m.get(i, j)).collect()).collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    let mut ev: Vec<f64> = (0..n).map(|i| a[i][i]).collect();
    ev.sort_by(f64::total_cmp);
    ev
}

/// Solves a small dense system by Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-14 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i][j] * x[j]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    Some(x)
}

pub struct OracleSolution {
    pub support: Vec<usize>,
    pub beta: Vec<f64>,
    pub l1: f64,
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Smallest-ℓ1 least-squares fit among supports of size ≤ `max_size` whose
/// residual satisfies `|Σβ − e|_∞ ≤ tol`.
pub fn l1_oracle(sigma: &DenseMatrix, e: &[f64], max_size: usize, tol: f64) -> Option<OracleSolution> {
    let p = sigma.cols();
    let mut best: Option<OracleSolution> = None;
    for k in 1..=max_size {
        for s in subsets(p, k) {
            let gram: Vec<Vec<f64>> = s
                .iter()
                .map(|&a| s.iter().map(|&b| (0..p).map(|r| sigma.get(r, a) * sigma.get(r, b)).sum()).collect())
                .collect();
            let rhs: Vec<f64> = s.iter().map(|&a| (0..p).map(|r| sigma.get(r, a) * e[r]).sum()).collect();
            let Some(coef) = gauss_solve(gram, rhs) else { continue };
            let mut beta = vec![0.0; p];
            for (i, &j) in s.iter().enumerate() {
                beta[j] = coef[i];
            }
            let resid = (0..p)
                .map(|r| (e[r] - (0..p).map(|c| sigma.get(r, c) * beta[c]).sum::<f64>()).abs())
                .fold(0.0, f64::max);
            if resid > tol {
                continue;
            }
            let l1: f64 = beta.iter().map(|b| b.abs()).sum();
            // supersets of a feasible support tie up to rounding; keep the smaller one
            if best.as_ref().is_none_or(|b| l1 < b.l1 - 1e-12 * b.l1.max(1.0)) {
                let scale = beta.iter().fold(0.0f64, |m, v| m.max(v.abs()));
                let support = s.iter().copied().filter(|&j| beta[j].abs() > 1e-12 * scale).collect();
                best = Some(OracleSolution { support, beta, l1 });
            }
        }
    }
    best
}

/// Mutual coherence with `1/p`-scaled inner products, off-diagonal pairs.
pub fn coherence(sigma: &DenseMatrix) -> f64 {
    let p = sigma.cols();
    let mut mu: f64 = 0.0;
    for i in 0..p {
        for j in 0..p {
            if i != j {
                let d: f64 = (0..p).map(|k| sigma.get(k, i) * sigma.get(k, j)).sum();
                mu = mu.max(d.abs() / p as f64);
            }
        }
    }
    mu
}

pub struct Instance {
    pub sigma: DenseMatrix,
    pub beta: Vec<f64>,
    pub support: Vec<usize>,
    pub e: Vec<f64>,
}

/// Random SPD `p×p` matrix satisfying the incoherence bound for `s`, with an
/// `s`-sparse target and `e = Σβ*`.
pub fn incoherent_instance(seed: u64, p: usize, s: usize) -> Instance {
    let mut rng = Stream::new(seed);
    loop {
        let mut m = DenseMatrix::identity(p);
        for j in 0..p {
            for i in 0..j {
                let v = 0.2 * (2.0 * rng.uniform() - 1.0);
                m.set(i, j, v);
                m.set(j, i, v);
            }
        }
        let ev = jacobi_eigenvalues(&m);
        if ev[0] <= 0.05 || coherence(&m) >= 1.0 / (2.0 * s as f64 - 1.0) {
            continue;
        }
        let mut idx: Vec<usize> = (0..p).collect();
        for i in (1..p).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            idx.swap(i, j);
        }
        let mut support: Vec<usize> = idx[..s].to_vec();
        support.sort_unstable();
        let mut beta = vec![0.0; p];
        for &j in &support {
            let mag = 0.5 + 1.5 * rng.uniform();
            beta[j] = if rng.bernoulli(0.5) { mag } else { -mag };
        }
        let e: Vec<f64> = (0..p).map(|r| (0..p).map(|c| m.get(r, c) * beta[c]).sum()).collect();
        return Instance { sigma: m, beta, support, e };
    }
}

/// Random SPD matrix `AᵀA/p + shift·I`.
pub fn random_spd(rng: &mut Stream, p: usize, shift: f64) -> DenseMatrix {
    let a = DenseMatrix::from_fn(p, p, |_, _| rng.normal());
    let g = a.t_matmul(&a).unwrap().scale(1.0 / p as f64);
    let mut out = DenseMatrix::from_fn(p, p, |i, j| 0.5 * (g.get(i, j) + g.get(j, i)));
    for i in 0..p {
        out.set(i, i, out.get(i, i) + shift);
    }
    out
}

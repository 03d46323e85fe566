//! Independent oracles and instance generators shared by integration tests.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use robust_ot::DiscreteMeasure;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random measure with `n` distinct-ish atoms in `[0, scale)^d` and random weights.
pub fn random_measure(r: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> DiscreteMeasure {
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| r.random::<f64>() * scale).collect())
        .collect();
    let raw: Vec<f64> = (0..n).map(|_| 0.05 + r.random::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    DiscreteMeasure::new(pts, raw.iter().map(|w| w / s).collect()).unwrap()
}

/// Random uniform measure on `n` points in `[0, scale)^d`.
pub fn random_uniform(r: &mut ChaCha8Rng, n: usize, d: usize, scale: f64) -> DiscreteMeasure {
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..d).map(|_| r.random::<f64>() * scale).collect())
        .collect();
    DiscreteMeasure::uniform(pts).unwrap()
}

/// Random measure on a small integer grid, so two draws share atoms often.
pub fn random_grid_measure(r: &mut ChaCha8Rng, n: usize, grid: u32) -> DiscreteMeasure {
    let pts: Vec<Vec<f64>> = (0..n)
        .map(|_| vec![r.random_range(0..grid) as f64, r.random_range(0..grid) as f64])
        .collect();
    let raw: Vec<f64> = (0..n).map(|_| 0.05 + r.random::<f64>()).collect();
    let s: f64 = raw.iter().sum();
    DiscreteMeasure::new(pts, raw.iter().map(|w| w / s).collect()).unwrap()
}

pub fn dist_pow(a: &[f64], b: &[f64], p: f64) -> f64 {
    let d = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    d.powf(p)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask.count_ones() as usize == k {
            out.push((0..n).filter(|i| mask >> i & 1 == 1).collect());
        }
    }
    out
}

fn permutations(k: usize) -> Vec<Vec<usize>> {
    fn rec(cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == used.len() {
            out.push(cur.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                cur.push(i);
                rec(cur, used, out);
                cur.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; k], &mut out);
    out
}

/// Robust distance between uniform `n`-point clouds when `remove` atoms may
/// be dropped from each side: every pair of kept subsets, every matching.
pub fn brute_force_uniform(xs: &[Vec<f64>], ys: &[Vec<f64>], remove: usize, p: f64) -> f64 {
    let n = xs.len();
    assert_eq!(ys.len(), n);
    let k = n - remove;
    if k == 0 {
        return 0.0;
    }
    let perms = permutations(k);
    let subs = subsets(n, k);
    let mut best = f64::INFINITY;
    for s in &subs {
        for t in &subs {
            for perm in &perms {
                let c: f64 = (0..k).map(|a| dist_pow(&xs[s[a]], &ys[t[perm[a]]], p)).sum();
                best = best.min(c);
            }
        }
    }
    (best / k as f64).powf(1.0 / p)
}

fn solve_square(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..n {
                        a[r][c] -= f * a[col][c];
                    }
                    b[r] -= f * b[col];
                }
            }
        }
    }
    Some((0..n).map(|i| b[i] / a[i][i]).collect())
}

/// Minimum of `c·x` over `{x >= 0, A_ub x <= b_ub, A_eq x = b_eq}` by
/// enumerating every vertex. Only for tiny problems.
pub fn lp_vertex_min(c: &[f64], a_ub: &[Vec<f64>], b_ub: &[f64], a_eq: &[Vec<f64>], b_eq: &[f64]) -> Option<f64> {
    let nv = c.len();
    // inequality rows: x_k >= 0 written as -x_k <= 0, then A_ub
    let mut ineq: Vec<(Vec<f64>, f64)> = (0..nv)
        .map(|k| {
            let mut row = vec![0.0; nv];
            row[k] = -1.0;
            (row, 0.0)
        })
        .collect();
    ineq.extend(a_ub.iter().cloned().zip(b_ub.iter().copied()));
    let need = nv - a_eq.len();
    let m = ineq.len();
    let mut best: Option<f64> = None;
    let mut idx: Vec<usize> = (0..need).collect();
    loop {
        let mut a: Vec<Vec<f64>> = a_eq.to_vec();
        let mut b: Vec<f64> = b_eq.to_vec();
        for &k in &idx {
            a.push(ineq[k].0.clone());
            b.push(ineq[k].1);
        }
        if let Some(x) = solve_square(a, b) {
            let feasible = ineq
                .iter()
                .all(|(row, rhs)| row.iter().zip(&x).map(|(u, v)| u * v).sum::<f64>() <= rhs + 1e-9)
                && a_eq
                    .iter()
                    .zip(b_eq)
                    .all(|(row, rhs)| (row.iter().zip(&x).map(|(u, v)| u * v).sum::<f64>() - rhs).abs() <= 1e-9);
            if feasible {
                let v: f64 = c.iter().zip(&x).map(|(u, v)| u * v).sum();
                best = Some(best.map_or(v, |b: f64| b.min(v)));
            }
        }
        // next combination
        let mut i = need;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < m - need + i {
                idx[i] += 1;
                for k in i + 1..need {
                    idx[k] = idx[k - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Min-cost transportation value by vertex enumeration: rows ship at most
/// `src`, columns take at most `snk`, total flow `req`.
pub fn transport_lp(src: &[f64], snk: &[f64], cost: &[Vec<f64>], req: f64) -> Option<f64> {
    let (n, m) = (src.len(), snk.len());
    let c: Vec<f64> = cost.iter().flatten().copied().collect();
    let mut a_ub = Vec::new();
    let mut b_ub = Vec::new();
    for i in 0..n {
        let mut row = vec![0.0; n * m];
        for j in 0..m {
            row[i * m + j] = 1.0;
        }
        a_ub.push(row);
        b_ub.push(src[i]);
    }
    for j in 0..m {
        let mut row = vec![0.0; n * m];
        for i in 0..n {
            row[i * m + j] = 1.0;
        }
        a_ub.push(row);
        b_ub.push(snk[j]);
    }
    lp_vertex_min(&c, &a_ub, &b_ub, &[vec![1.0; n * m]], &[req])
}

/// `W_p^{εμ,εν}(μ, ν)^p` straight from the removal definition: kept
/// measures `μ' <= μ`, `ν' <= ν` of mass `1-εμ`, `1-εν`, rescaled and
/// coupled. Variables are the unnormalized coupling `γ` with marginals
/// `μ', ν'`; this only works for `εμ = εν`.
pub fn removal_lp(mu: &[f64], nu: &[f64], cost: &[Vec<f64>], eps: f64) -> Option<f64> {
    transport_lp(mu, nu, cost, 1.0 - eps).map(|v| v / (1.0 - eps))
}

pub fn cost_table(mu: &DiscreteMeasure, nu: &DiscreteMeasure, p: f64) -> Vec<Vec<f64>> {
    (0..mu.len())
        .map(|i| (0..nu.len()).map(|j| dist_pow(mu.point(i), nu.point(j), p)).collect())
        .collect()
}

/// Robust bottleneck distance of two 1D measures by Hall's condition: at a
/// threshold `t`, max flow = min over row subsets A of cap(rows \ A) + cap(N(A)),
/// with caps scaled by 1/(1-ε). Returns the smallest feasible pairwise distance.
pub fn hall_winf(mu: &DiscreteMeasure, nu: &DiscreteMeasure, eps: f64) -> f64 {
    let d = |i: usize, j: usize| (mu.point(i)[0] - nu.point(j)[0]).abs();
    let mut levels: Vec<f64> = (0..mu.len()).flat_map(|i| (0..nu.len()).map(move |j| (i, j))).map(|(i, j)| d(i, j)).collect();
    levels.sort_by(f64::total_cmp);
    let feasible = |t: f64| {
        let mut best = f64::INFINITY;
        for a in 0u32..(1 << mu.len()) {
            let rest: f64 = (0..mu.len()).filter(|i| a >> i & 1 == 0).map(|i| mu.weights()[i]).sum();
            let nbr: f64 = (0..nu.len())
                .filter(|&j| (0..mu.len()).any(|i| a >> i & 1 == 1 && d(i, j) <= t))
                .map(|j| nu.weights()[j])
                .sum();
            best = best.min((rest + nbr) / (1.0 - eps));
        }
        best >= 1.0 - 1e-9
    };
    levels.iter().copied().find(|&t| feasible(t)).unwrap()
}

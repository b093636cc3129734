//! Independent reference implementations used as test oracles. Nothing here
//! calls into the crate's numerical routines.
#![allow(dead_code)]

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use keysample_core::{Descriptor, Keyframe, Pose};

pub fn rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

/// Random planar walk with step lengths in `[lo, hi]`.
pub fn random_window(rng: &mut Xoshiro256PlusPlus, n: usize, dim: usize, lo: f64, hi: f64) -> Vec<Keyframe> {
    let mut x = [0.0f64; 3];
    let mut heading: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    (0..n)
        .map(|i| {
            if i > 0 {
                heading += rng.random_range(-0.8..0.8);
                let step = rng.random_range(lo..hi);
                x[0] += step * heading.cos();
                x[1] += step * heading.sin();
                x[2] += rng.random_range(-0.05..0.05);
            }
            let d: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            Keyframe::new(
                i as u64,
                Pose::from_position(x[0], x[1], x[2]),
                Descriptor::new(d).unwrap(),
            )
        })
        .collect()
}

pub fn dist3(a: &Pose, b: &Pose) -> f64 {
    let d = a.position - b.position;
    (d.x * d.x + d.y * d.y + d.z * d.z).sqrt()
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s.sqrt()
}

pub fn ref_redundancy(set: &[Keyframe]) -> f64 {
    let mut s = 0.0;
    for i in 0..set.len() - 1 {
        s += 1.0 / (1.0 + euclid(set[i].descriptor.values(), set[i + 1].descriptor.values()));
    }
    s / (set.len() - 1) as f64
}

/// Straight-line preservation: arc length, gradient, Gram matrix and
/// eigendecomposition via nalgebra, transform, mean consecutive distance.
pub fn ref_preservation(set: &[Keyframe]) -> f64 {
    let n = set.len();
    let m = set[0].descriptor.dim();
    let mut s = vec![0.0; n];
    for i in 1..n {
        s[i] = s[i - 1] + dist3(&set[i - 1].pose, &set[i].pose).max(1e-6);
    }
    let d = |i: usize, c: usize| set[i].descriptor.values()[c];
    let mut jac = DMatrix::<f64>::zeros(m, n);
    for c in 0..m {
        jac[(c, 0)] = (d(1, c) - d(0, c)) / (s[1] - s[0]);
        jac[(c, n - 1)] = (d(n - 1, c) - d(n - 2, c)) / (s[n - 1] - s[n - 2]);
        for i in 1..n - 1 {
            let h1 = s[i] - s[i - 1];
            let h2 = s[i + 1] - s[i];
            jac[(c, i)] =
                (h1 * h1 * d(i + 1, c) - h2 * h2 * d(i - 1, c) + (h2 * h2 - h1 * h1) * d(i, c)) / (h1 * h2 * (h1 + h2));
        }
    }
    let gram = jac.transpose() * &jac;
    let eig = SymmetricEigen::new(gram);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    // rows of V are eigenvectors in descending order, first significant
    // component positive
    let mut v = DMatrix::<f64>::zeros(n, n);
    let mut lam = vec![0.0; n];
    for (k, &src) in order.iter().enumerate() {
        let col = eig.eigenvectors.column(src);
        let sign = match col.iter().find(|c| c.abs() > 1e-12) {
            Some(c) if *c < 0.0 => -1.0,
            _ => 1.0,
        };
        for i in 0..n {
            v[(i, k)] = sign * col[i];
        }
        lam[k] = eig.eigenvalues[src].max(0.0);
    }
    let top = lam.iter().fold(0.0f64, |a, &l| a.max(l));
    for l in &mut lam {
        if *l <= 1e-12 * top {
            *l = 0.0;
        }
    }
    let dm = DMatrix::from_fn(n, m, d);
    let transformed = &v * dm;
    let mut total = 0.0;
    for i in 0..n - 1 {
        let mut acc = 0.0;
        for c in 0..m {
            let a = lam[i].sqrt() * transformed[(i, c)];
            let b = lam[i + 1].sqrt() * transformed[(i + 1, c)];
            acc += (a - b) * (a - b);
        }
        total += acc.sqrt();
    }
    -total / (n - 1) as f64
}

/// Feasible subsets by filtering the full power set.
pub fn naive_feasible(window: &[Keyframe], lo: f64, hi: f64) -> Vec<Vec<usize>> {
    let n = window.len();
    let mut out = Vec::new();
    for mask in 0u32..(1 << n) {
        if mask & 1 == 0 || mask.count_ones() < 2 {
            continue;
        }
        let idx: Vec<usize> = (0..n).filter(|i| mask >> i & 1 == 1).collect();
        let ok = idx.windows(2).all(|w| {
            let g = dist3(&window[w[0]].pose, &window[w[1]].pose);
            g >= lo && g <= hi
        });
        if ok {
            out.push(idx);
        }
    }
    out
}

//! Small numerical helpers shared by the families and the fitter.

use std::sync::OnceLock;

use statrs::function::gamma::{digamma, ln_gamma};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// ln(1 + e^x) without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 35.0 {
        x
    } else if x < -35.0 {
        x.exp()
    } else {
        x.exp().ln_1p()
    }
}

/// ln Γ(y + θ) − ln Γ(θ) for a non-negative integer `y`.
pub fn ln_gamma_ratio(y: f64, theta: f64) -> f64 {
    if y < 64.0 {
        (0..y as u64).map(|k| (theta + k as f64).ln()).sum()
    } else {
        ln_gamma(y + theta) - ln_gamma(theta)
    }
}

/// ψ(y + θ) − ψ(θ) for a non-negative integer `y`.
pub fn digamma_diff(y: f64, theta: f64) -> f64 {
    if y < 64.0 {
        (0..y as u64).map(|k| 1.0 / (theta + k as f64)).sum()
    } else {
        digamma(y + theta) - digamma(theta)
    }
}

pub fn ln_factorial(y: f64) -> f64 {
    ln_gamma(y + 1.0)
}

/// Nodes and weights for `n`-point Gauss–Hermite quadrature with weight e^{-x²}.
///
/// Eigenvalues of the Jacobi matrix seed the nodes; each is then polished by
/// Newton iteration on the orthonormal Hermite recurrence, which also yields
/// the weights.
pub fn gauss_hermite(n: usize) -> (Vec<f64>, Vec<f64>) {
    const PIM4: f64 = 0.751_125_544_464_942_5;
    let jacobi = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) == 1 {
            (i.max(j) as f64 / 2.0).sqrt()
        } else {
            0.0
        }
    });
    let mut seeds: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
    seeds.sort_by(|a, b| b.total_cmp(a));

    let nf = n as f64;
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for (i, &seed) in seeds.iter().enumerate().take(n.div_ceil(2)) {
        let mut z = seed;
        let mut pp = 1.0;
        for _ in 0..20 {
            let mut p1 = PIM4;
            let mut p2 = 0.0;
            for j in 1..=n {
                let jf = j as f64;
                let p3 = p2;
                p2 = p1;
                p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
            }
            pp = (2.0 * nf).sqrt() * p2;
            let z1 = z;
            z = z1 - p1 / pp;
            if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                break;
            }
        }
        x[i] = z;
        x[n - 1 - i] = -z;
        w[i] = 2.0 / (pp * pp);
        w[n - 1 - i] = w[i];
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

fn gh256() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_hermite(256))
}

/// E[f(Z)] for Z ~ N(mu, sigma²) by 256-point Gauss–Hermite quadrature.
pub fn normal_expectation(mu: f64, sigma: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (x, w) = gh256();
    let scale = std::f64::consts::SQRT_2 * sigma;
    x.iter()
        .zip(w)
        .map(|(&xi, &wi)| wi * f(mu + scale * xi))
        .sum::<f64>()
        / std::f64::consts::PI.sqrt()
}

/// 64-bit FNV-1a; stable across platforms and releases.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// SplitMix64 finalizer, used to derive independent stream seeds.
pub fn mix_seed(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#![allow(dead_code)]

use roomsim::geometry::{Triangle, Vec3};

/// One-sample Kolmogorov-Smirnov test against U(lo, hi); returns
/// (D, asymptotic p-value).
pub fn ks_uniform(samples: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    let mut xs: Vec<f64> = samples.iter().map(|x| (x - lo) / (hi - lo)).collect();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        let i = i as f64;
        d = d.max((i + 1.0) / n - x).max(x - i / n);
    }
    (d, kolmogorov_sf(d * n.sqrt()))
}

/// P(K > x) for the Kolmogorov distribution.
pub fn kolmogorov_sf(x: f64) -> f64 {
    if x < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..200 {
        let k = k as f64;
        let sign = if k as i64 % 2 == 1 { 1.0 } else { -1.0 };
        s += sign * (-2.0 * k * k * x * x).exp();
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Pearson chi-square p-value for equal expected counts.
pub fn chi_square_uniform(counts: &[u64]) -> f64 {
    use statrs::distribution::{ChiSquared, ContinuousCDF};
    let n: u64 = counts.iter().sum();
    let e = n as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

/// Two triangles covering the quad `c[0..4]` (in order around the edge),
/// wound so their normals point towards `toward`.
pub fn quad(c: [Vec3<f64>; 4], toward: Vec3<f64>, material_id: usize) -> Vec<Triangle<f64>> {
    let n = (c[1] - c[0]).cross(c[2] - c[0]);
    let flip = n.dot(toward - c[0]) < 0.0;
    let tri = |a: Vec3<f64>, b: Vec3<f64>, d: Vec3<f64>| {
        if flip {
            Triangle::new(a, d, b, material_id).unwrap()
        } else {
            Triangle::new(a, b, d, material_id).unwrap()
        }
    };
    vec![tri(c[0], c[1], c[2]), tri(c[0], c[2], c[3])]
}

pub fn v(x: f64, y: f64, z: f64) -> Vec3<f64> {
    Vec3::new(x, y, z)
}

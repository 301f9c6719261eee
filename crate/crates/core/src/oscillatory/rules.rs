//! Gauss-Kronrod (G7, K15) rule on [-1, 1] together with spectral
//! integration matrices on the same nodes.
//!
//! `KRONROD_PARTIAL[k][m]` is `∫_{-1}^{x_k} ℓ_m(x) dx` where `ℓ_m` is the
//! Lagrange basis polynomial through the fifteen Kronrod nodes. Applied to
//! node values it gives the running integral at every node, exact for
//! polynomials of degree 14. `GAUSS_PARTIAL` is the analogue on the seven
//! Gauss nodes.

use nalgebra::DMatrix;
use once_cell::sync::Lazy;

pub const KRONROD_NODES: [f64; 15] = [
    -0.991_455_371_120_812_6,
    -0.949_107_912_342_758_5,
    -0.864_864_423_359_769_1,
    -0.741_531_185_599_394_4,
    -0.586_087_235_467_691_1,
    -0.405_845_151_377_397_2,
    -0.207_784_955_007_898_5,
    0.0,
    0.207_784_955_007_898_5,
    0.405_845_151_377_397_2,
    0.586_087_235_467_691_1,
    0.741_531_185_599_394_4,
    0.864_864_423_359_769_1,
    0.949_107_912_342_758_5,
    0.991_455_371_120_812_6,
];

pub const KRONROD_WEIGHTS: [f64; 15] = [
    0.022_935_322_010_529_224,
    0.063_092_092_629_978_56,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_89,
    0.209_482_141_084_727_82,
    0.204_432_940_075_298_89,
    0.190_350_578_064_785_4,
    0.169_004_726_639_267_9,
    0.140_653_259_715_525_92,
    0.104_790_010_322_250_18,
    0.063_092_092_629_978_56,
    0.022_935_322_010_529_224,
];

/// Gauss weights for the nodes `KRONROD_NODES[1], [3], ..., [13]`.
pub const GAUSS_WEIGHTS: [f64; 7] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_64,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
    0.381_830_050_505_118_9,
    0.279_705_391_489_276_64,
    0.129_484_966_168_869_7,
];

/// Position of the i-th Gauss node inside the Kronrod node array.
#[inline]
pub const fn gauss_index(i: usize) -> usize {
    2 * i + 1
}

pub static KRONROD_PARTIAL: Lazy<[[f64; 15]; 15]> = Lazy::new(|| {
    let m = partial_integration_matrix(&KRONROD_NODES);
    let mut out = [[0.0; 15]; 15];
    for (k, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(k, j)];
        }
    }
    out
});

pub static GAUSS_PARTIAL: Lazy<[[f64; 7]; 7]> = Lazy::new(|| {
    let nodes: Vec<f64> = (0..7).map(|i| KRONROD_NODES[gauss_index(i)]).collect();
    let m = partial_integration_matrix(&nodes);
    let mut out = [[0.0; 7]; 7];
    for (k, row) in out.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = m[(k, j)];
        }
    }
    out
});

/// Legendre polynomials P_0..P_{n-1} at x.
fn legendre_all(x: f64, n: usize) -> Vec<f64> {
    let mut p = vec![0.0; n.max(2)];
    p[0] = 1.0;
    p[1] = x;
    for l in 1..n.saturating_sub(1) {
        let lf = l as f64;
        p[l + 1] = ((2.0 * lf + 1.0) * x * p[l] - lf * p[l - 1]) / (lf + 1.0);
    }
    p.truncate(n);
    p
}

/// S with S[k][m] = ∫_{-1}^{x_k} ℓ_m, built in the Legendre basis:
/// ∫_{-1}^{x} P_0 = x + 1 and ∫_{-1}^{x} P_n = (P_{n+1}(x) - P_{n-1}(x)) / (2n + 1).
fn partial_integration_matrix(nodes: &[f64]) -> DMatrix<f64> {
    let n = nodes.len();
    let vander = DMatrix::from_fn(n, n, |k, l| legendre_all(nodes[k], n)[l]);
    let integrated = DMatrix::from_fn(n, n, |k, l| {
        let p = legendre_all(nodes[k], n + 1);
        if l == 0 {
            nodes[k] + 1.0
        } else {
            (p[l + 1] - p[l - 1]) / (2.0 * l as f64 + 1.0)
        }
    });
    let inv = vander
        .try_inverse()
        .expect("Legendre-Vandermonde matrix on distinct nodes is invertible");
    integrated * inv
}

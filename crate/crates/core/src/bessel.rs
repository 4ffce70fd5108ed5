//! Modified Bessel function of the second kind `K_ν(x)` for real `ν >= 0` and `x > 0`.
//!
//! The order is split as `ν = μ + m` with `|μ| <= 1/2`. `K_μ` and `K_{μ+1}` come from Temme's
//! series for `x <= 2` and from Steed's continued fraction for `x > 2`; forward recurrence then
//! climbs to `K_ν`, which is stable for this function. Relative accuracy is close to machine
//! precision for `ν ∈ [0, 5]`, `x ∈ (0, 50]`.

use std::f64::consts::PI;

/// Taylor coefficients of `1/Γ(z) = Σ_{k>=1} c_k z^k`.
const RGAMMA: [f64; 26] = [
    1.0,
    0.577_215_664_901_532_9,
    -0.655_878_071_520_253_8,
    -0.042_002_635_034_095_2,
    0.166_538_611_382_291_5,
    -0.042_197_734_555_544_3,
    -0.009_621_971_527_877_0,
    0.007_218_943_246_663_0,
    -0.001_165_167_591_859_1,
    -0.000_215_241_674_114_9,
    0.000_128_050_282_388_2,
    -0.000_020_134_854_780_7,
    -0.000_001_250_493_482_1,
    0.000_001_133_027_232_0,
    -0.000_000_205_633_841_7,
    0.000_000_006_116_095_0,
    0.000_000_005_002_007_5,
    -0.000_000_001_181_274_6,
    0.000_000_000_104_342_7,
    0.000_000_000_007_782_3,
    -0.000_000_000_003_696_8,
    0.000_000_000_000_510_0,
    -0.000_000_000_000_020_6,
    -0.000_000_000_000_005_4,
    0.000_000_000_000_001_4,
    0.000_000_000_000_000_1,
];

/// `(Γ1(μ), Γ2(μ), 1/Γ(1+μ), 1/Γ(1-μ))` with
/// `Γ1 = (1/Γ(1-μ) - 1/Γ(1+μ)) / (2μ)` and `Γ2 = (1/Γ(1-μ) + 1/Γ(1+μ)) / 2`.
/// Both are even/odd parts of the same power series, so no cancellation occurs near 0.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    // 1/Γ(1+μ) = Σ c_k μ^{k-1}.
    let (mut even, mut odd) = (0.0, 0.0);
    let mu2 = mu * mu;
    // Horner over μ² for the two parity classes of k-1.
    for k in (0..RGAMMA.len()).rev() {
        if k % 2 == 0 {
            even = even * mu2 + RGAMMA[k];
        } else {
            odd = odd * mu2 + RGAMMA[k];
        }
    }
    // even = Σ_{k-1 even} c_k μ^{k-1}, odd·μ = Σ_{k-1 odd} c_k μ^{k-1}.
    let gampl = even + mu * odd;
    let gammi = even - mu * odd;
    (-odd, even, gampl, gammi)
}

/// `(K_μ(x), K_{μ+1}(x))` for `|μ| <= 1/2`.
fn k_pair(mu: f64, x: f64) -> (f64, f64) {
    const EPS: f64 = 1e-16;
    const MAX_ITER: usize = 10_000;
    if x <= 2.0 {
        let x2 = 0.5 * x;
        let pimu = PI * mu;
        let fact = if pimu.abs() < f64::EPSILON { 1.0 } else { pimu / pimu.sin() };
        let d = -x2.ln();
        let e = mu * d;
        let fact2 = if e.abs() < f64::EPSILON { 1.0 } else { e.sinh() / e };
        let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
        let mut ff = fact * (gam1 * e.cosh() + gam2 * fact2 * d);
        let mut sum = ff;
        let ee = e.exp();
        let mut p = 0.5 * ee / gampl;
        let mut q = 0.5 / (ee * gammi);
        let mut c = 1.0;
        let dd = x2 * x2;
        let mut sum1 = p;
        for i in 1..MAX_ITER {
            let fi = i as f64;
            ff = (fi * ff + p + q) / (fi * fi - mu * mu);
            c *= dd / fi;
            p /= fi - mu;
            q /= fi + mu;
            let del = c * ff;
            sum += del;
            sum1 += c * (p - fi * ff);
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        (sum, sum1 * 2.0 / x)
    } else {
        let mut b = 2.0 * (1.0 + x);
        let mut d = 1.0 / b;
        let mut delh = d;
        let mut h = d;
        let mut q1 = 0.0;
        let mut q2 = 1.0;
        let a1 = 0.25 - mu * mu;
        let mut q = a1;
        let mut c = a1;
        let mut a = -a1;
        let mut s = 1.0 + q * delh;
        for i in 2..MAX_ITER {
            let fi = i as f64;
            a -= 2.0 * (fi - 1.0);
            c = -a * c / fi;
            let qnew = (q1 - b * q2) / a;
            q1 = q2;
            q2 = qnew;
            q += c * qnew;
            b += 2.0;
            d = 1.0 / (b + a * d);
            delh = (b * d - 1.0) * delh;
            h += delh;
            let dels = q * delh;
            s += dels;
            if dels.abs() < EPS * s.abs() {
                break;
            }
        }
        h *= a1;
        let kmu = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
        let k1 = kmu * (mu + x + 0.5 - h) / x;
        (kmu, k1)
    }
}

/// `K_ν(x)`; `ν` may be negative (`K_{-ν} = K_ν`). Returns `+∞` at `x = 0` and NaN for `x < 0`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    if x.is_nan() || nu.is_nan() || x < 0.0 {
        return f64::NAN;
    }
    if x == 0.0 {
        return f64::INFINITY;
    }
    let nu = nu.abs();
    let m = (nu + 0.5).floor();
    let mu = nu - m;
    let (mut k0, mut k1) = k_pair(mu, x);
    let xi2 = 2.0 / x;
    for i in 1..=(m as usize) {
        let next = (mu + i as f64) * xi2 * k1 + k0;
        k0 = k1;
        k1 = next;
    }
    k0
}

//! Shapiro-Wilk W test using Royston's approximations for the coefficients
//! and for the null distribution of W (valid for 3 <= n <= 5000).

use statrs::distribution::{ContinuousCDF, Normal};

use super::regression::check_finite;
use crate::error::StatsError;

const C1: [f64; 6] = [0.0, 0.221157, -0.147981, -2.07119, 4.434685, -2.706056];
const C2: [f64; 6] = [0.0, 0.042981, -0.293762, -1.752461, 5.682633, -3.582633];
const C3: [f64; 4] = [0.544, -0.39978, 0.025054, -6.714e-4];
const C4: [f64; 4] = [1.3822, -0.77857, 0.062767, -0.0020322];
const C5: [f64; 4] = [-1.5861, -0.31082, -0.083751, 0.0038915];
const C6: [f64; 3] = [-0.4803, -0.082676, 0.0030302];
const G: [f64; 2] = [-2.273, 0.459];

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

/// Half of the antisymmetric coefficient vector, for the smallest order
/// statistics (positive values; the lower tail takes the negatives).
fn half_coefficients(n: usize) -> Vec<f64> {
    let nn2 = n / 2;
    if n == 3 {
        return vec![std::f64::consts::FRAC_1_SQRT_2];
    }
    let std_normal = Normal::standard();
    let an = n as f64;
    let m: Vec<f64> = (1..=nn2)
        .map(|i| std_normal.inverse_cdf((i as f64 - 0.375) / (an + 0.25)))
        .collect();
    let summ2 = 2.0 * m.iter().map(|v| v * v).sum::<f64>();
    let ssumm2 = summ2.sqrt();
    let rsn = 1.0 / an.sqrt();
    let a1 = poly(&C1, rsn) - m[0] / ssumm2;

    let mut a = vec![0.0; nn2];
    a[0] = a1;
    let (start, fac) = if n > 5 {
        let a2 = -m[1] / ssumm2 + poly(&C2, rsn);
        a[1] = a2;
        let fac = ((summ2 - 2.0 * m[0] * m[0] - 2.0 * m[1] * m[1])
            / (1.0 - 2.0 * a1 * a1 - 2.0 * a2 * a2))
            .sqrt();
        (2, fac)
    } else {
        let fac = ((summ2 - 2.0 * m[0] * m[0]) / (1.0 - 2.0 * a1 * a1)).sqrt();
        (1, fac)
    };
    for i in start..nn2 {
        a[i] = -m[i] / fac;
    }
    a
}

/// Returns `(W, p)`.
pub fn shapiro_wilk(sample: &[f64]) -> Result<(f64, f64), StatsError> {
    let n = sample.len();
    if !(3..=5000).contains(&n) {
        return Err(StatsError::SampleSize(n));
    }
    check_finite(sample)?;
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let range = x[n - 1] - x[0];
    if range <= 1e-19 * x[n - 1].abs().max(1.0) {
        return Err(StatsError::ConstantSample);
    }

    let half = half_coefficients(n);
    let mut coef = vec![0.0; n];
    for (i, a) in half.iter().enumerate() {
        coef[i] = -a;
        coef[n - 1 - i] = *a;
    }

    // W as the squared correlation between the coefficients and the ordered
    // sample, computed on range-scaled data.
    let xs: Vec<f64> = x.iter().map(|v| v / range).collect();
    let xbar = xs.iter().sum::<f64>() / n as f64;
    let cbar = coef.iter().sum::<f64>() / n as f64;
    let mut sxx = 0.0;
    let mut scc = 0.0;
    let mut scx = 0.0;
    for i in 0..n {
        let dx = xs[i] - xbar;
        let dc = coef[i] - cbar;
        sxx += dx * dx;
        scc += dc * dc;
        scx += dc * dx;
    }
    let ssassx = (scc * sxx).sqrt();
    let w1 = (ssassx - scx) * (ssassx + scx) / (scc * sxx);
    let w = (1.0 - w1).clamp(f64::MIN_POSITIVE, 1.0);

    Ok((w, p_value(w, w1, n)))
}

fn p_value(w: f64, w1: f64, n: usize) -> f64 {
    if n == 3 {
        let pi6 = 6.0 / std::f64::consts::PI;
        let stqr = std::f64::consts::FRAC_PI_3;
        return (pi6 * (w.sqrt().asin() - stqr)).clamp(0.0, 1.0);
    }
    if w1 <= 0.0 {
        return 1.0;
    }
    let an = n as f64;
    let mut y = w1.ln();
    let (m, s) = if n <= 11 {
        let gamma = poly(&G, an);
        if y >= gamma {
            return 1e-99;
        }
        y = -(gamma - y).ln();
        (poly(&C3, an), poly(&C4, an).exp())
    } else {
        let xx = an.ln();
        (poly(&C5, xx), poly(&C6, xx).exp())
    };
    Normal::new(m, s).map(|d| d.sf(y)).unwrap_or(f64::NAN)
}

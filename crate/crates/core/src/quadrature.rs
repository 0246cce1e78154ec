//! Adaptive quadrature, cumulative Simpson sums and monotone cubic interpolation.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];

// 7-point Gauss weights for the odd Kronrod abscissae XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

/// Maximum number of interval bisections in [`integrate`].
const MAX_SUBDIVISIONS: usize = 2_000;

/// Hard cap on the number of panels summed by [`integrate_to_infinity`].
pub const MAX_PANELS: usize = 10_000_000;

/// One Gauss-Kronrod 7/15 rule on `[a, b]`: returns (kronrod, |kronrod - gauss|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive Gauss-Kronrod quadrature of `f` over `[a, b]`.
///
/// Converges when the summed error estimate drops below
/// `max(rel_tol * |I|, abs_tol)`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, abs_tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let (v, e) = gk15(&f, a, b);
    let mut intervals = vec![(a, b, v, e)];
    let mut total = v;
    let mut err = e;
    for _ in 0..MAX_SUBDIVISIONS {
        if !total.is_finite() {
            return Err(Error::NonConvergent(format!("non-finite integral on [{a}, {b}]")));
        }
        if err <= (rel_tol * total.abs()).max(abs_tol) {
            return Ok(total);
        }
        // bisect the interval with the largest error estimate
        let (idx, _) = intervals.iter().enumerate().max_by(|x, y| x.1 .3.total_cmp(&y.1 .3)).expect("non-empty");
        let (lo, hi, v0, e0) = intervals.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        total += v1 + v2 - v0;
        err += e1 + e2 - e0;
        intervals.push((lo, mid, v1, e1));
        intervals.push((mid, hi, v2, e2));
    }
    // the running error sum accumulates rounding; recompute before giving up
    let err: f64 = intervals.iter().map(|i| i.3).sum();
    let total: f64 = intervals.iter().map(|i| i.2).sum();
    if err <= (rel_tol * total.abs()).max(abs_tol) {
        Ok(total)
    } else {
        Err(Error::NonConvergent(format!("error estimate {err:e} after {MAX_SUBDIVISIONS} subdivisions on [{a}, {b}]")))
    }
}

/// Integral of a nonnegative, eventually decaying `f` over `[a, ∞)`.
///
/// The half-line is cut into panels whose widths start at `first_width` and
/// double; summation stops once a panel contributes less than
/// `tol × accumulated sum`.
pub fn integrate_to_infinity<F: Fn(f64) -> f64>(f: F, a: f64, first_width: f64, tol: f64) -> Result<f64> {
    if !(first_width > 0.0) {
        return Err(Error::InvalidParameter(format!("panel width {first_width} must be positive")));
    }
    let mut sum = 0.0;
    let mut left = a;
    let mut width = first_width;
    for _ in 0..MAX_PANELS {
        let right = left + width;
        let panel = integrate(&f, left, right, 0.1 * tol, 0.0)?;
        sum += panel;
        if panel.abs() <= tol * sum.abs() {
            return Ok(sum);
        }
        left = right;
        width *= 2.0;
        if !left.is_finite() {
            break;
        }
    }
    Err(Error::NonConvergent(format!("tail of the integral from {a} did not decay (partial sum {sum:e})")))
}

/// Cumulative integral on a (possibly nonuniform) grid by composite Simpson:
/// each interval uses its endpoint values and the value at its midpoint.
pub fn cumulative_simpson(ts: &[f64], nodes: &[f64], mids: &[f64]) -> Vec<f64> {
    debug_assert_eq!(ts.len(), nodes.len());
    debug_assert_eq!(ts.len(), mids.len() + 1);
    let mut out = Vec::with_capacity(ts.len());
    let mut acc = 0.0;
    out.push(0.0);
    for k in 0..mids.len() {
        let h = ts[k + 1] - ts[k];
        acc += h / 6.0 * (nodes[k] + 4.0 * mids[k] + nodes[k + 1]);
        out.push(acc);
    }
    out
}

/// Piecewise cubic Hermite interpolant with Fritsch-Carlson slope limiting,
/// so monotone data give a monotone curve.
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    /// Builds the interpolant from nodal values and slope estimates (exact
    /// derivatives when available); slopes are limited where they would
    /// break monotonicity of an interval.
    pub fn with_slopes(xs: Vec<f64>, ys: Vec<f64>, mut slopes: Vec<f64>) -> Self {
        assert!(xs.len() >= 2 && xs.len() == ys.len() && ys.len() == slopes.len());
        for k in 0..xs.len() - 1 {
            let delta = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]);
            if delta == 0.0 {
                slopes[k] = 0.0;
                slopes[k + 1] = 0.0;
                continue;
            }
            if slopes[k] * delta < 0.0 {
                slopes[k] = 0.0;
            }
            if slopes[k + 1] * delta < 0.0 {
                slopes[k + 1] = 0.0;
            }
            let a = slopes[k] / delta;
            let b = slopes[k + 1] / delta;
            let r2 = a * a + b * b;
            if r2 > 9.0 {
                let s = 3.0 / r2.sqrt();
                slopes[k] = s * a * delta;
                slopes[k + 1] = s * b * delta;
            }
        }
        Self { xs, ys, slopes }
    }

    /// PCHIP-style interpolant with three-point slope estimates.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Self {
        let n = xs.len();
        assert!(n >= 2);
        let mut slopes = vec![0.0; n];
        for k in 0..n {
            slopes[k] = if k == 0 {
                (ys[1] - ys[0]) / (xs[1] - xs[0])
            } else if k == n - 1 {
                (ys[n - 1] - ys[n - 2]) / (xs[n - 1] - xs[n - 2])
            } else {
                let d0 = (ys[k] - ys[k - 1]) / (xs[k] - xs[k - 1]);
                let d1 = (ys[k + 1] - ys[k]) / (xs[k + 1] - xs[k]);
                if d0 * d1 <= 0.0 {
                    0.0
                } else {
                    let h0 = xs[k] - xs[k - 1];
                    let h1 = xs[k + 1] - xs[k];
                    // weighted harmonic mean
                    let w0 = 2.0 * h1 + h0;
                    let w1 = h1 + 2.0 * h0;
                    (w0 + w1) / (w0 / d0 + w1 / d1)
                }
            };
        }
        Self::with_slopes(xs, ys, slopes)
    }

    pub fn x_min(&self) -> f64 {
        self.xs[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.xs.last().expect("non-empty")
    }

    /// Evaluates the interpolant; `x` is clamped to the node range.
    pub fn eval(&self, x: f64) -> f64 {
        let x = x.clamp(self.x_min(), self.x_max());
        let k = match self.xs.binary_search_by(|probe| probe.total_cmp(&x)) {
            Ok(k) => return self.ys[k],
            Err(k) => k.saturating_sub(1).min(self.xs.len() - 2),
        };
        let h = self.xs[k + 1] - self.xs[k];
        let s = (x - self.xs[k]) / h;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.ys[k] + h * h10 * self.slopes[k] + h01 * self.ys[k + 1] + h * h11 * self.slopes[k + 1]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kronrod_rule_is_exact_for_high_degree_polynomials() {
        // 15-point Kronrod integrates degree 22 exactly
        let v = integrate(|x| x.powi(22), 0.0, 1.0, 1e-15, 0.0).unwrap();
        assert!((v - 1.0 / 23.0).abs() < 1e-15);
    }

    #[test]
    fn adaptive_handles_peaked_integrand() {
        let v = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12, 0.0).unwrap();
        let exact = 2.0 * (1.0f64 / 1e-2).atan() / 1e-2;
        assert!((v / exact - 1.0).abs() < 1e-11);
    }

    #[test]
    fn semi_infinite_exponential() {
        let v = integrate_to_infinity(|x| (-x).exp(), 0.0, 0.5, 1e-13).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        let v = integrate_to_infinity(|x| (-(x * x)).exp(), 0.0, 1e-3, 1e-13).unwrap();
        assert!((v - 0.5 * std::f64::consts::PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn non_decaying_tail_is_reported() {
        let r = integrate_to_infinity(|_| 1.0, 0.0, 1.0, 1e-10);
        assert!(matches!(r, Err(Error::NonConvergent(_))));
    }

    #[test]
    fn cumulative_simpson_exact_for_cubics() {
        let ts: Vec<f64> = (0..11).map(|k| (k as f64 * 0.3).exp() - 1.0).collect();
        let f = |t: f64| 1.0 + t - 2.0 * t * t + t * t * t;
        let nodes: Vec<f64> = ts.iter().map(|&t| f(t)).collect();
        let mids: Vec<f64> = ts.windows(2).map(|w| f(0.5 * (w[0] + w[1]))).collect();
        let cum = cumulative_simpson(&ts, &nodes, &mids);
        for (t, c) in ts.iter().zip(&cum) {
            let exact = t + t * t / 2.0 - 2.0 * t.powi(3) / 3.0 + t.powi(4) / 4.0;
            assert!((c - exact).abs() <= 1e-10 * exact.abs().max(1.0));
        }
    }

    #[test]
    fn monotone_cubic_reproduces_nodes_and_stays_monotone() {
        let xs = vec![0.0, 1.0, 2.0, 3.0, 4.0];
        let ys = vec![0.0, 0.1, 0.2, 5.0, 5.01];
        let m = MonotoneCubic::new(xs.clone(), ys.clone());
        for (x, y) in xs.iter().zip(&ys) {
            assert_eq!(m.eval(*x), *y);
        }
        let mut prev = m.eval(0.0);
        for k in 1..=400 {
            let v = m.eval(k as f64 * 0.01);
            assert!(v >= prev - 1e-15);
            prev = v;
        }
    }

    #[test]
    fn hermite_with_exact_slopes_is_fourth_order() {
        let f = |x: f64| x.sin();
        let err = |n: usize| {
            let xs: Vec<f64> = (0..=n).map(|k| k as f64 / n as f64).collect();
            let ys = xs.iter().map(|&x| f(x)).collect();
            let ds = xs.iter().map(|&x| x.cos()).collect();
            let m = MonotoneCubic::with_slopes(xs, ys, ds);
            (0..1000)
                .map(|k| (m.eval(k as f64 / 1000.0 + 3e-4) - f(k as f64 / 1000.0 + 3e-4)).abs())
                .fold(0.0, f64::max)
        };
        let ratio = err(10) / err(20);
        assert!(ratio > 12.0, "ratio {ratio}");
    }
}

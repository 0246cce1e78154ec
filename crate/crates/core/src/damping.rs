//! Damping coefficient `b(t) = (t+1)^(-β)` and the auxiliary functions built
//! on it: `b*`, `g`, `g'`, `G = ∫g` and `Γ = ∫1/g`.
//!
//! `g` solves `g' = b g - 1` with `g(0) = b*`. The forward ODE amplifies
//! errors by `exp(B(t))`, and the explicit formula cancels catastrophically,
//! so `g` is always evaluated from the tail integral
//!
//! ```text
//! g(t) = ∫₀^∞ exp(-[B(t+s) - B(t)]) ds,   B(t) = ∫₀ᵗ b,
//! ```
//!
//! and `g'` from its derivative `-∫₀^∞ (b(t+s) - b(t)) exp(-[B(t+s) - B(t)]) ds`,
//! which equals `b g - 1` without the subtraction.

use crate::error::{Error, Result};
use crate::quadrature::{cumulative_simpson, integrate_to_infinity, MonotoneCubic};

/// Functional form of the damping coefficient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DampingForm {
    /// `b(t) = (t+1)^(-β)`
    #[default]
    PowerLaw,
}

/// Damping coefficient family with exponent `β ∈ [-1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampingModel {
    pub beta: f64,
    pub form: DampingForm,
}

impl DampingModel {
    pub fn new(beta: f64) -> Result<Self> {
        if !(-1.0..1.0).contains(&beta) {
            return Err(Error::InvalidParameter(format!("beta = {beta} outside the admissible range [-1, 1)")));
        }
        Ok(Self { beta, form: DampingForm::PowerLaw })
    }

    /// `β = 0` is classical damping: accepted for cross-checks, but outside
    /// the range covered by the critical lifespan estimate.
    pub fn is_classical(&self) -> bool {
        self.beta == 0.0
    }

    pub fn b(&self, t: f64) -> f64 {
        (t + 1.0).powf(-self.beta)
    }

    pub fn db(&self, t: f64) -> f64 {
        -self.beta * (t + 1.0).powf(-self.beta - 1.0)
    }

    pub fn d2b(&self, t: f64) -> f64 {
        self.beta * (self.beta + 1.0) * (t + 1.0).powf(-self.beta - 2.0)
    }

    /// `B(t) = ∫₀ᵗ b(s) ds`.
    pub fn big_b(&self, t: f64) -> f64 {
        let a = 1.0 - self.beta;
        (a * t.ln_1p()).exp_m1() / a
    }

    /// `B(t+s) - B(t)` without cancellation.
    pub fn big_b_increment(&self, t: f64, s: f64) -> f64 {
        let a = 1.0 - self.beta;
        (t + 1.0).powf(a) * (a * (s / (t + 1.0)).ln_1p()).exp_m1() / a
    }

    /// `b(t+s) - b(t)` without cancellation.
    pub fn b_increment(&self, t: f64, s: f64) -> f64 {
        (t + 1.0).powf(-self.beta) * (-self.beta * (s / (t + 1.0)).ln_1p()).exp_m1()
    }
}

fn check_convergent(model: &DampingModel) -> Result<()> {
    if !(model.beta < 1.0) {
        return Err(Error::NonConvergent(format!(
            "beta = {} >= 1: B(t) grows at most logarithmically and the integral of exp(-B) may diverge",
            model.beta
        )));
    }
    Ok(())
}

/// `b* = ∫₀^∞ exp(-B(τ)) dτ`.
pub fn compute_b_star(model: &DampingModel, tol: f64) -> Result<f64> {
    check_convergent(model)?;
    if model.beta == 0.0 {
        return Ok(1.0);
    }
    integrate_to_infinity(|s| (-model.big_b(s)).exp(), 0.0, 0.5, tol)
}

/// `g(t)` by the tail integral.
pub fn compute_g(model: &DampingModel, t: f64, tol: f64) -> Result<f64> {
    check_convergent(model)?;
    if !(t >= 0.0) {
        return Err(Error::OutOfRange { what: "t", value: t, lo: 0.0, hi: f64::INFINITY });
    }
    if model.beta == 0.0 {
        return Ok(1.0);
    }
    let scale = 0.5 / model.b(t);
    integrate_to_infinity(|s| (-model.big_b_increment(t, s)).exp(), 0.0, scale, tol)
}

/// `g'(t) = b(t) g(t) - 1`, evaluated by the differentiated tail integral.
pub fn compute_gprime(model: &DampingModel, t: f64, tol: f64) -> Result<f64> {
    check_convergent(model)?;
    if model.beta == 0.0 {
        return Ok(0.0);
    }
    let scale = 0.5 / model.b(t);
    let v = integrate_to_infinity(|s| model.b_increment(t, s) * (-model.big_b_increment(t, s)).exp(), 0.0, scale, tol)?;
    Ok(-v)
}

/// Cached auxiliary curves on a geometric time grid `t_k + 1 = r^k`.
///
/// Immutable after [`build_aux`]; shared read-only between workers.
#[derive(Debug, Clone)]
pub struct AuxFunctions {
    pub model: DampingModel,
    pub b_star: f64,
    pub ts: Vec<f64>,
    pub g_grid: Vec<f64>,
    pub gprime_grid: Vec<f64>,
    pub big_g_grid: Vec<f64>,
    pub gamma_grid: Vec<f64>,
    pub t_max: f64,
    pub tol_quad: f64,
    g_interp: MonotoneCubic,
    gprime_interp: MonotoneCubic,
    big_g_interp: MonotoneCubic,
    gamma_interp: MonotoneCubic,
}

/// Geometric grid with `n` nodes on `[0, t_max]`.
pub fn geometric_grid(t_max: f64, n: usize) -> Vec<f64> {
    let span = t_max.ln_1p();
    let mut ts: Vec<f64> = (0..n).map(|k| (span * k as f64 / (n - 1) as f64).exp_m1()).collect();
    ts[n - 1] = t_max;
    ts
}

pub fn build_aux(model: DampingModel, t_max: f64, n_samples: usize, tol: f64) -> Result<AuxFunctions> {
    if !(t_max > 0.0) || !t_max.is_finite() {
        return Err(Error::InvalidParameter(format!("t_max = {t_max} must be positive and finite")));
    }
    if n_samples < 16 {
        return Err(Error::InvalidParameter(format!("n_samples = {n_samples} must be at least 16")));
    }
    let b_star = compute_b_star(&model, tol)?;
    let ts = geometric_grid(t_max, n_samples);
    let mids: Vec<f64> = ts.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();

    let g_grid = ts.iter().map(|&t| compute_g(&model, t, tol)).collect::<Result<Vec<_>>>()?;
    let gprime_grid = ts.iter().map(|&t| compute_gprime(&model, t, tol)).collect::<Result<Vec<_>>>()?;
    let g_mid = mids.iter().map(|&t| compute_g(&model, t, tol)).collect::<Result<Vec<_>>>()?;

    let big_g_grid = cumulative_simpson(&ts, &g_grid, &g_mid);
    let inv_nodes: Vec<f64> = g_grid.iter().map(|g| 1.0 / g).collect();
    let inv_mids: Vec<f64> = g_mid.iter().map(|g| 1.0 / g).collect();
    let gamma_grid = cumulative_simpson(&ts, &inv_nodes, &inv_mids);

    // g'' = b' g + b g'
    let gsecond: Vec<f64> = ts
        .iter()
        .zip(g_grid.iter().zip(&gprime_grid))
        .map(|(&t, (&g, &gp))| model.db(t) * g + model.b(t) * gp)
        .collect();

    Ok(AuxFunctions {
        model,
        b_star,
        g_interp: MonotoneCubic::with_slopes(ts.clone(), g_grid.clone(), gprime_grid.clone()),
        gprime_interp: MonotoneCubic::with_slopes(ts.clone(), gprime_grid.clone(), gsecond),
        big_g_interp: MonotoneCubic::with_slopes(ts.clone(), big_g_grid.clone(), g_grid.clone()),
        gamma_interp: MonotoneCubic::with_slopes(ts.clone(), gamma_grid.clone(), inv_nodes),
        ts,
        g_grid,
        gprime_grid,
        big_g_grid,
        gamma_grid,
        t_max,
        tol_quad: tol,
    })
}

impl AuxFunctions {
    fn check(&self, t: f64) -> Result<()> {
        if (0.0..=self.t_max).contains(&t) {
            Ok(())
        } else {
            Err(Error::OutOfRange { what: "t", value: t, lo: 0.0, hi: self.t_max })
        }
    }

    pub fn b(&self, t: f64) -> f64 {
        self.model.b(t)
    }

    pub fn g(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.g_interp.eval(t))
    }

    pub fn gprime(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.gprime_interp.eval(t))
    }

    /// `G(t) = ∫₀ᵗ g`.
    pub fn big_g(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.big_g_interp.eval(t))
    }

    /// `Γ(t) = ∫₀ᵗ 1/g`.
    pub fn gamma(&self, t: f64) -> Result<f64> {
        self.check(t)?;
        Ok(self.gamma_interp.eval(t))
    }

    /// Rows `(t, b, g, g', G, Γ, b g - 1)` at the grid nodes.
    pub fn rows(&self) -> impl Iterator<Item = [f64; 7]> + '_ {
        (0..self.ts.len()).map(move |k| {
            let t = self.ts[k];
            let b = self.model.b(t);
            [
                t,
                b,
                self.g_grid[k],
                self.gprime_grid[k],
                self.big_g_grid[k],
                self.gamma_grid[k],
                b * self.g_grid[k] - 1.0,
            ]
        })
    }
}

/// Tolerances for [`validate_asymptotics`].
#[derive(Debug, Clone, Copy)]
pub struct AsymptoticTolerances {
    /// bound on `|b g - 1|`
    pub bg: f64,
    /// admissible interval for `g' / (1/b)'`
    pub ratio: (f64, f64),
    /// half-width of the admissible band around the expected log-slopes
    pub slope: f64,
}

impl Default for AsymptoticTolerances {
    fn default() -> Self {
        Self { bg: 0.05, ratio: (0.8, 1.2), slope: 0.1 }
    }
}

/// Asymptotic diagnostics of the auxiliary functions at one time.
#[derive(Debug, Clone)]
pub struct AsymptoticReport {
    pub t: f64,
    pub bg_minus_1: f64,
    pub bg_pass: bool,
    /// `g'(t) / (-b'(t) b(t)^-2)`; `None` when `b' = 0` (classical damping).
    pub gprime_ratio: Option<f64>,
    pub ratio_pass: bool,
    /// Local slope of `log(G+1)` against `log(t+1)`, or against
    /// `log(log(t+1)+1)` when `β = -1`.
    pub g_slope: f64,
    pub g_slope_expected: f64,
    pub g_slope_pass: bool,
    /// Local slope of `log(Γ+1)` against `log(t+1)`.
    pub gamma_slope: f64,
    pub gamma_slope_expected: f64,
    pub gamma_slope_pass: bool,
}

impl AsymptoticReport {
    pub fn all_pass(&self) -> bool {
        self.bg_pass && self.ratio_pass && self.g_slope_pass && self.gamma_slope_pass
    }
}

pub fn validate_asymptotics(aux: &AuxFunctions, t_probe: f64, tols: AsymptoticTolerances) -> Result<AsymptoticReport> {
    if !(t_probe > 0.0) {
        return Err(Error::OutOfRange { what: "t_probe", value: t_probe, lo: 0.0, hi: aux.t_max });
    }
    let beta = aux.model.beta;
    let g = aux.g(t_probe)?;
    let gp = aux.gprime(t_probe)?;
    let big_g = aux.big_g(t_probe)?;
    let gamma = aux.gamma(t_probe)?;
    let b = aux.model.b(t_probe);
    let db = aux.model.db(t_probe);

    let bg_minus_1 = b * g - 1.0;
    let gprime_ratio = if db != 0.0 { Some(gp / (-db / (b * b))) } else { None };
    let ratio_pass = gprime_ratio.map_or(true, |r| r >= tols.ratio.0 && r <= tols.ratio.1);

    let tp1 = t_probe + 1.0;
    // d log(G+1) / d log(t+1) = (t+1) g / (G+1)
    let mut g_slope = tp1 * g / (big_g + 1.0);
    let g_slope_expected = if beta == -1.0 {
        // chain rule onto log(log(t+1)+1)
        g_slope *= tp1.ln() + 1.0;
        1.0
    } else {
        beta + 1.0
    };
    let gamma_slope = tp1 / g / (gamma + 1.0);
    let gamma_slope_expected = 1.0 - beta;

    Ok(AsymptoticReport {
        t: t_probe,
        bg_minus_1,
        bg_pass: bg_minus_1.abs() <= tols.bg,
        gprime_ratio,
        ratio_pass,
        g_slope,
        g_slope_expected,
        g_slope_pass: (g_slope - g_slope_expected).abs() <= tols.slope,
        gamma_slope,
        gamma_slope_expected,
        gamma_slope_pass: (gamma_slope - gamma_slope_expected).abs() <= tols.slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(beta: f64) -> DampingModel {
        DampingModel::new(beta).unwrap()
    }

    #[test]
    fn b_is_positive_and_derivatives_match_finite_differences() {
        for beta in [-1.0, -0.5, 0.0, 0.5, 0.9] {
            let m = model(beta);
            for t in [0.0, 0.3, 2.0, 40.0] {
                assert!(m.b(t) > 0.0);
                let h = 1e-4 * (t + 1.0);
                let t0 = t + 2.0 * h;
                let fd1 = (m.b(t0 + h) - m.b(t0 - h)) / (2.0 * h);
                let fd2 = (m.b(t0 + h) - 2.0 * m.b(t0) + m.b(t0 - h)) / (h * h);
                assert!((fd1 - m.db(t0)).abs() <= 1e-7 * m.db(t0).abs().max(1e-3));
                assert!((fd2 - m.d2b(t0)).abs() <= 1e-4 * m.d2b(t0).abs().max(1e-3));
            }
        }
    }

    #[test]
    fn beta_out_of_range_is_rejected() {
        assert!(DampingModel::new(1.0).is_err());
        assert!(DampingModel::new(-1.5).is_err());
        assert!(DampingModel::new(-1.0).is_ok());
    }

    #[test]
    fn b_star_nonconvergent_for_beta_at_least_one() {
        let m = DampingModel { beta: 1.2, form: DampingForm::PowerLaw };
        assert!(matches!(compute_b_star(&m, 1e-10), Err(Error::NonConvergent(_))));
    }

    #[test]
    fn classical_damping_has_unit_g() {
        let m = model(0.0);
        assert_eq!(compute_b_star(&m, 1e-12).unwrap(), 1.0);
        for t in [0.0, 1.0, 1e3] {
            assert_eq!(compute_g(&m, t, 1e-12).unwrap(), 1.0);
        }
    }

    #[test]
    fn increments_match_direct_differences() {
        let m = model(-0.5);
        let (t, s) = (3.0, 0.7);
        let direct = m.big_b(t + s) - m.big_b(t);
        assert!((m.big_b_increment(t, s) - direct).abs() < 1e-12);
        assert!((m.b_increment(t, s) - (m.b(t + s) - m.b(t))).abs() < 1e-13);
    }

    #[test]
    fn beta_half_has_closed_form() {
        // b = (t+1)^(-1/2) gives g(t) = sqrt(t+1) + 1/2 exactly
        let m = model(0.5);
        for t in [0.0, 1.0, 99.0, 1e3] {
            let g = compute_g(&m, t, 1e-12).unwrap();
            let exact = (t + 1.0f64).sqrt() + 0.5;
            assert!((g / exact - 1.0).abs() < 1e-11, "t={t} g={g}");
            let gp = compute_gprime(&m, t, 1e-12).unwrap();
            assert!((gp - 0.5 / (t + 1.0f64).sqrt()).abs() < 1e-11);
        }
    }

    #[test]
    fn aux_grid_invariants() {
        let aux = build_aux(model(-0.5), 100.0, 64, 1e-11).unwrap();
        assert!(aux.g_grid.iter().all(|&g| g > 0.0));
        assert_eq!(aux.big_g_grid[0], 0.0);
        assert_eq!(aux.gamma_grid[0], 0.0);
        assert!(aux.big_g_grid.windows(2).all(|w| w[1] > w[0]));
        assert!(aux.gamma_grid.windows(2).all(|w| w[1] > w[0]));
        assert!((aux.g_grid[0] - aux.b_star).abs() <= aux.tol_quad);
        for row in aux.rows() {
            let [_, _, _, gp, _, _, bgm1] = row;
            assert!((gp - bgm1).abs() < 1e-8, "g' = {gp}, bg-1 = {bgm1}");
        }
    }

    #[test]
    fn aux_rejects_out_of_range_queries() {
        let aux = build_aux(model(0.5), 10.0, 16, 1e-10).unwrap();
        assert!(matches!(aux.g(11.0), Err(Error::OutOfRange { .. })));
        assert!(matches!(validate_asymptotics(&aux, 20.0, AsymptoticTolerances::default()), Err(Error::OutOfRange { .. })));
        assert!(build_aux(model(0.5), 10.0, 8, 1e-10).is_err());
    }

    #[test]
    fn classical_validation_is_exact() {
        let aux = build_aux(model(0.0), 50.0, 32, 1e-12).unwrap();
        let r = validate_asymptotics(&aux, 10.0, AsymptoticTolerances::default()).unwrap();
        assert_eq!(r.bg_minus_1, 0.0);
        assert!(r.gprime_ratio.is_none());
        for &t in &aux.ts {
            assert!((aux.big_g(t).unwrap() - t).abs() <= 1e-12 * t.max(1.0));
            assert!((aux.gamma(t).unwrap() - t).abs() <= 1e-12 * t.max(1.0));
        }
    }
}

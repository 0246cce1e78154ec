//! Gaussian heat kernel `𝒢(τ, x) = (4πτ)^(-n/2) exp(-|x|²/4τ)` and its
//! τ-derivatives sampled on periodic grids.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::spectral::Spectral;

/// Admissibility factor: a kernel of time `τ` needs `L ≥ 8√τ`.
pub const ADMISSIBLE_WIDTHS: f64 = 8.0;

/// Uniform periodic grid on `[-L, L)ⁿ` with `N` points per axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    /// spatial dimension, 1 or 2
    pub dim: usize,
    /// half-width `L`
    pub half_width: f64,
    /// points per axis, a power of two
    pub points: usize,
}

impl Grid {
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::InvalidGrid(format!("dimension {dim} not in {{1, 2}}")));
        }
        if points < 32 || !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("{points} points per axis: need a power of two >= 32")));
        }
        if !(half_width > 0.0) || !half_width.is_finite() {
            return Err(Error::InvalidGrid(format!("half-width {half_width} must be positive")));
        }
        Ok(Self { dim, half_width, points })
    }

    pub fn dx(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// `dxⁿ`
    pub fn cell_volume(&self) -> f64 {
        self.dx().powi(self.dim as i32)
    }

    /// Total number of nodes, `Nⁿ`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Coordinate of node `j` along one axis.
    pub fn coord(&self, j: usize) -> f64 {
        -self.half_width + j as f64 * self.dx()
    }

    /// `|x|²` at flat index `idx`; node coordinates already are the minimal
    /// periodic images relative to the origin.
    pub fn radius_sq(&self, idx: usize) -> f64 {
        match self.dim {
            1 => self.coord(idx).powi(2),
            _ => {
                let (r, c) = (idx / self.points, idx % self.points);
                self.coord(r).powi(2) + self.coord(c).powi(2)
            }
        }
    }

    /// Iterator over `|x|²` at every node in storage order.
    pub fn radii_sq(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |idx| self.radius_sq(idx))
    }

    /// Discrete integral `Σ f dxⁿ`.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        values.iter().sum::<f64>() * self.cell_volume()
    }

    /// Fails with `DomainTooSmall` unless `L ≥ 8√τ`.
    pub fn check_admissible(&self, tau: f64) -> Result<()> {
        let required = ADMISSIBLE_WIDTHS * tau.sqrt();
        if self.half_width < required {
            Err(Error::DomainTooSmall { half_width: self.half_width, required })
        } else {
            Ok(())
        }
    }
}

/// Scalar field sampled at the nodes of a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl Field {
    pub fn zeros(grid: Grid) -> Self {
        Self { grid, values: vec![0.0; grid.len()] }
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64) -> f64) -> Self {
        Self { grid, values: grid.radii_sq().map(f).collect() }
    }

    pub fn integral(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Heat kernel (or one of its τ-derivatives) at kernel time `tau`.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelField {
    pub tau: f64,
    pub field: Field,
}

/// `𝒢(τ, x)` in closed form.
pub fn kernel_value(dim: usize, tau: f64, r2: f64) -> f64 {
    (4.0 * PI * tau).powf(-(dim as f64) / 2.0) * (-r2 / (4.0 * tau)).exp()
}

/// Multiplier `-n/2τ + |x|²/4τ²` with `∂τ𝒢 = multiplier · 𝒢`.
pub fn dt_multiplier(dim: usize, tau: f64, r2: f64) -> f64 {
    -(dim as f64) / (2.0 * tau) + r2 / (4.0 * tau * tau)
}

/// Multiplier `(2n+n²)/4τ² - (n+2)|x|²/4τ³ + |x|⁴/16τ⁴` with
/// `∂τ²𝒢 = multiplier · 𝒢`.
pub fn dtt_multiplier(dim: usize, tau: f64, r2: f64) -> f64 {
    let n = dim as f64;
    (2.0 * n + n * n) / (4.0 * tau * tau) - (n + 2.0) * r2 / (4.0 * tau.powi(3)) + r2 * r2 / (16.0 * tau.powi(4))
}

fn sample(grid: Grid, tau: f64, multiplier: impl Fn(f64) -> f64) -> Result<KernelField> {
    if !(tau > 0.0) {
        return Err(Error::InvalidParameter(format!("kernel time {tau} must be positive")));
    }
    grid.check_admissible(tau)?;
    let field = Field::from_fn(grid, |r2| multiplier(r2) * kernel_value(grid.dim, tau, r2));
    Ok(KernelField { tau, field })
}

pub fn gaussian(grid: Grid, tau: f64) -> Result<KernelField> {
    sample(grid, tau, |_| 1.0)
}

pub fn gaussian_dt(grid: Grid, tau: f64) -> Result<KernelField> {
    sample(grid, tau, |r2| dt_multiplier(grid.dim, tau, r2))
}

pub fn gaussian_dtt(grid: Grid, tau: f64) -> Result<KernelField> {
    sample(grid, tau, |r2| dtt_multiplier(grid.dim, tau, r2))
}

/// Periodic convolution scaled by `dxⁿ`, computed through the DFT.
pub fn convolve(a: &Field, b: &Field) -> Result<Field> {
    if a.grid != b.grid {
        return Err(Error::GridMismatch);
    }
    let mut spectral = Spectral::new(a.grid);
    Ok(Field { grid: a.grid, values: spectral.convolve(&a.values, &b.values) })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid1(l: f64, n: usize) -> Grid {
        Grid::new(1, l, n).unwrap()
    }

    fn value_at(k: &KernelField, x: f64) -> f64 {
        let g = k.field.grid;
        let j = ((x + g.half_width) / g.dx()).round() as usize;
        assert!((g.coord(j) - x).abs() < 1e-12);
        k.field.values[j]
    }

    #[test]
    fn closed_form_values() {
        let g = grid1(16.0, 1024);
        let k = gaussian(g, 2.0).unwrap();
        assert!((value_at(&k, 0.0) - 0.199_471_140_200_716_35).abs() < 1e-12);
        let k = gaussian(g, 1.0).unwrap();
        assert!((value_at(&k, 2.0) - 0.103_776_874_355_148_7).abs() < 1e-12);
        let d = gaussian_dt(g, 1.0).unwrap();
        assert!((value_at(&d, 0.0) + 0.141_047_395_886_939_07).abs() < 1e-12);
        let dd = gaussian_dtt(g, 1.0).unwrap();
        assert!((value_at(&dd, 0.0) - 0.211_571_093_830_408_6).abs() < 1e-12);
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(3, 1.0, 64).is_err());
        assert!(Grid::new(1, 1.0, 16).is_err());
        assert!(Grid::new(1, 1.0, 100).is_err());
        assert!(Grid::new(2, -1.0, 64).is_err());
    }

    #[test]
    fn small_domain_is_rejected() {
        let g = grid1(7.9, 256);
        assert!(matches!(gaussian(g, 1.0), Err(Error::DomainTooSmall { .. })));
        assert!(gaussian(grid1(8.0, 256), 1.0).is_ok());
        assert!(gaussian(g, 0.0).is_err());
    }

    #[test]
    fn mismatched_grids_do_not_convolve() {
        let a = Field::zeros(grid1(10.0, 64));
        let b = Field::zeros(grid1(10.0, 128));
        assert_eq!(convolve(&a, &b), Err(Error::GridMismatch));
    }

    #[test]
    fn impulse_is_the_identity() {
        let g = grid1(10.0, 256);
        let f = Field::from_fn(g, |r2| (-r2).exp() * (1.0 + r2));
        let mut delta = Field::zeros(g);
        delta.values[g.points / 2] = 1.0 / g.dx();
        let c = convolve(&f, &delta).unwrap();
        for (x, y) in c.values.iter().zip(&f.values) {
            assert!((x - y).abs() < 1e-10);
        }
    }

    #[test]
    fn two_dimensional_semigroup() {
        let g = Grid::new(2, 16.0, 128).unwrap();
        let a = gaussian(g, 0.5).unwrap().field;
        let b = gaussian(g, 1.5).unwrap().field;
        let c = convolve(&a, &b).unwrap();
        let exact = gaussian(g, 2.0).unwrap().field;
        let err = c.values.iter().zip(&exact.values).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(err < 1e-8, "err {err}");
        assert!((exact.integral() - 1.0).abs() < 1e-8);
    }
}

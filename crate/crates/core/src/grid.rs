//! Grids, wavenumber tables, and dealias masks.
//!
//! The horizontal box is `[-L/2, L/2)^2` with `N` collocation points per
//! axis and wavenumbers `2*pi*j/L`. The vertical direction is the unit
//! layer `[0,1)`: periodic fields are stored as-is with wavenumbers
//! `2*pi*n`; stress-free fields are stored on the doubled period `[0,2)`
//! (even reflection for `u1,u2`, odd for `u3,theta`), which turns the
//! cosine/sine series into one periodic transform with wavenumbers `pi*n`.

use crate::error::{Error, Result};

/// Vertical boundary conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bc {
    Periodic,
    StressFree,
}

impl Bc {
    pub fn as_str(self) -> &'static str {
        match self {
            Bc::Periodic => "periodic",
            Bc::StressFree => "stress-free",
        }
    }
}

/// User-facing grid description.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSpec {
    /// Horizontal box side length.
    pub l: f64,
    /// Horizontal collocation points per axis (even, >= 8).
    pub n: usize,
    /// Vertical collocation points on the unit layer (even, >= 4).
    pub nv: usize,
    pub bc: Bc,
    /// Dealias fraction as a rational `(num, den)` in `(0, 1]`.
    pub dealias_fraction: (u32, u32),
}

impl GridSpec {
    pub fn new(l: f64, n: usize, nv: usize, bc: Bc) -> GridSpec {
        GridSpec { l, n, nv, bc, dealias_fraction: (2, 3) }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.l > 0.0) {
            return Err(Error::InvalidSpec(format!("L must be positive, got {}", self.l)));
        }
        if self.n < 8 || self.n % 2 != 0 {
            return Err(Error::InvalidSpec(format!("N must be even and >= 8, got {}", self.n)));
        }
        if self.nv < 4 || self.nv % 2 != 0 {
            return Err(Error::InvalidSpec(format!("Nv must be even and >= 4, got {}", self.nv)));
        }
        let (p, q) = self.dealias_fraction;
        if p == 0 || q == 0 || p > q {
            return Err(Error::InvalidSpec(format!(
                "dealias fraction must be rational in (0,1], got {}/{}",
                p, q
            )));
        }
        Ok(())
    }
}

/// Derived grid: wavenumber tables and dealias masks for the stored layout.
///
/// Stored vertical planes: `nz = nv` (periodic) or `2*nv` (stress-free,
/// doubled period).
#[derive(Debug, Clone)]
pub struct Grid {
    pub spec: GridSpec,
    pub nz: usize,
    /// Horizontal wavenumbers by storage index (0, 1, .., -1 wrap order).
    pub kx: Vec<f64>,
    pub ky: Vec<f64>,
    /// Vertical wavenumbers by storage index.
    pub kz: Vec<f64>,
    /// Per-axis dealias keep flags.
    pub keep_x: Vec<bool>,
    pub keep_y: Vec<bool>,
    pub keep_z: Vec<bool>,
}

/// Signed wavenumber index for storage index `j` on an axis of `n` points.
#[inline]
pub fn signed_index(j: usize, n: usize) -> i64 {
    if j < n / 2 {
        j as i64
    } else {
        j as i64 - n as i64
    }
}

/// Storage index for a signed wavenumber index.
#[inline]
pub fn storage_index(s: i64, n: usize) -> usize {
    if s >= 0 {
        s as usize
    } else {
        (s + n as i64) as usize
    }
}

pub fn make_grid(spec: GridSpec) -> Result<Grid> {
    spec.validate()?;
    let n = spec.n;
    let (nz, vertical_period) = match spec.bc {
        Bc::Periodic => (spec.nv, 1.0),
        Bc::StressFree => (2 * spec.nv, 2.0),
    };
    let kh_unit = 2.0 * std::f64::consts::PI / spec.l;
    let kz_unit = 2.0 * std::f64::consts::PI / vertical_period;
    let kx: Vec<f64> = (0..n).map(|j| kh_unit * signed_index(j, n) as f64).collect();
    let ky = kx.clone();
    let kz: Vec<f64> = (0..nz).map(|j| kz_unit * signed_index(j, nz) as f64).collect();

    let (p, q) = spec.dealias_fraction;
    // Unmatched Nyquist modes break Hermitian pairing and (stress-free)
    // parity, so the mask never keeps them even at fraction 1. At exactly
    // 2/3 the quadratic rule must be strict (3K < axis length), otherwise
    // products of the two edge modes alias back onto the edge.
    let cutoff = |axis: usize| {
        let nyquist = axis / 2;
        let mut k = ((p as usize * nyquist) / q as usize).min(nyquist - 1);
        if 3 * p == 2 * q && 3 * k >= axis && k > 0 {
            k -= 1;
        }
        k
    };
    let ch = cutoff(n) as i64;
    let cz = cutoff(nz) as i64;
    let keep_h: Vec<bool> = (0..n).map(|j| signed_index(j, n).abs() <= ch).collect();
    let keep_z: Vec<bool> = (0..nz).map(|j| signed_index(j, nz).abs() <= cz).collect();

    Ok(Grid { spec, nz, kx, ky, kz, keep_x: keep_h.clone(), keep_y: keep_h, keep_z })
}

impl Grid {
    pub fn nx(&self) -> usize {
        self.spec.n
    }
    pub fn ny(&self) -> usize {
        self.spec.n
    }

    /// Horizontal coordinates of collocation points, `[-L/2, L/2)`.
    pub fn xs(&self) -> Vec<f64> {
        let n = self.spec.n;
        let dx = self.spec.l / n as f64;
        (0..n).map(|j| -0.5 * self.spec.l + j as f64 * dx).collect()
    }

    /// Vertical coordinates of stored planes (`[0,1)` periodic, `[0,2)` doubled).
    pub fn zs(&self) -> Vec<f64> {
        let dz = match self.spec.bc {
            Bc::Periodic => 1.0 / self.nz as f64,
            Bc::StressFree => 2.0 / self.nz as f64,
        };
        (0..self.nz).map(|j| j as f64 * dz).collect()
    }

    /// Horizontal cell area.
    pub fn cell_area(&self) -> f64 {
        let dx = self.spec.l / self.spec.n as f64;
        dx * dx
    }

    /// Vertical step of stored planes.
    pub fn dz(&self) -> f64 {
        match self.spec.bc {
            Bc::Periodic => 1.0 / self.nz as f64,
            Bc::StressFree => 2.0 / self.nz as f64,
        }
    }

    /// True if the mode survives the dealias mask.
    #[inline]
    pub fn keep(&self, iz: usize, iy: usize, ix: usize) -> bool {
        self.keep_z[iz] && self.keep_y[iy] && self.keep_x[ix]
    }

    /// Wavevector of a stored mode.
    #[inline]
    pub fn wavevector(&self, iz: usize, iy: usize, ix: usize) -> [f64; 3] {
        [self.kx[ix], self.ky[iy], self.kz[iz]]
    }

    /// Number of stored modes (and collocation points).
    pub fn n_modes(&self) -> usize {
        self.spec.n * self.spec.n * self.nz
    }

    /// Smallest positive horizontal wavenumber.
    pub fn kh_min(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.spec.l
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wavenumbers_unit_box() {
        let g = make_grid(GridSpec::new(2.0 * std::f64::consts::PI, 8, 4, Bc::Periodic)).unwrap();
        let got: Vec<i64> = g.kx.iter().map(|k| k.round() as i64).collect();
        assert_eq!(got, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        for (j, k) in g.kx.iter().enumerate() {
            assert!((k - signed_index(j, 8) as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn odd_n_rejected() {
        assert!(make_grid(GridSpec::new(2.0 * std::f64::consts::PI, 7, 4, Bc::Periodic)).is_err());
        assert!(make_grid(GridSpec::new(-1.0, 8, 4, Bc::Periodic)).is_err());
        assert!(make_grid(GridSpec::new(1.0, 8, 3, Bc::Periodic)).is_err());
    }

    #[test]
    fn dealias_two_thirds_keeps_two_of_four() {
        // N=8: indices {-4..3}, Nyquist 4, keep |j| <= floor(2/3*4) = 2.
        let g = make_grid(GridSpec::new(2.0 * std::f64::consts::PI, 8, 4, Bc::Periodic)).unwrap();
        let kept: Vec<i64> =
            (0..8).filter(|&j| g.keep_x[j]).map(|j| signed_index(j, 8)).collect();
        let mut kept_sorted = kept.clone();
        kept_sorted.sort();
        assert_eq!(kept_sorted, vec![-2, -1, 0, 1, 2]);
    }

    #[test]
    fn stress_free_doubles_vertical() {
        let g = make_grid(GridSpec::new(10.0, 8, 4, Bc::StressFree)).unwrap();
        assert_eq!(g.nz, 8);
        // Doubled period 2: wavenumbers pi*n.
        assert!((g.kz[1] - std::f64::consts::PI).abs() < 1e-12);
        let gp = make_grid(GridSpec::new(10.0, 8, 4, Bc::Periodic)).unwrap();
        assert!((gp.kz[1] - 2.0 * std::f64::consts::PI).abs() < 1e-12);
    }
}

//! Field containers and the spectral toolbox: transforms, vertical-mean
//! decomposition, derivatives, curls, weighted norms, and moments.

use std::sync::Arc;

use ndarray::{Array3, Array4, Axis};

use crate::error::Result;
use crate::exec::{self, Exec};
use crate::fft::Transform;
use crate::grid::{Bc, Grid, GridSpec};
use crate::C64;

/// Grid plus transform plans; shared by every field on the grid.
pub struct Domain {
    pub grid: Grid,
    pub fft: Transform,
    /// Horizontal-plane transform for 2D diagnostics.
    pub fft2: Transform,
    pub exec: Exec,
}

impl Domain {
    pub fn new(spec: GridSpec, exec: Exec) -> Result<Arc<Domain>> {
        let grid = crate::grid::make_grid(spec)?;
        let fft = Transform::new(grid.nx(), grid.ny(), grid.nz);
        let fft2 = Transform::new(grid.nx(), grid.ny(), 1);
        Ok(Arc::new(Domain { grid, fft, fft2, exec }))
    }
}

/// Reference frame tag, diagnostic metadata only.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameTag {
    Stationary,
    Rotating,
}

/// Vertical parity of a component on the doubled stress-free grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Parities of the state vector `(u1, u2, u3, theta)`.
pub const STATE_PARITY: [Parity; 4] = [Parity::Even, Parity::Even, Parity::Odd, Parity::Odd];
/// Parities of a vorticity vector `(w1, w2, w3)`.
pub const VORTICITY_PARITY: [Parity; 3] = [Parity::Odd, Parity::Odd, Parity::Even];

/// Complex Fourier coefficients over `(component, kz, ky, kx)`.
pub struct SpectralField {
    pub data: Array4<C64>,
    pub domain: Arc<Domain>,
    pub frame: FrameTag,
    /// Component parities; used only for stress-free grids.
    pub parity: Vec<Parity>,
}

/// Real collocation values over `(component, z, y, x)`.
pub struct PhysicalField {
    pub data: Array4<f64>,
    pub domain: Arc<Domain>,
}

impl Clone for SpectralField {
    fn clone(&self) -> Self {
        SpectralField {
            data: self.data.clone(),
            domain: Arc::clone(&self.domain),
            frame: self.frame,
            parity: self.parity.clone(),
        }
    }
}

impl SpectralField {
    pub fn zeros(domain: &Arc<Domain>, parity: &[Parity]) -> SpectralField {
        let g = &domain.grid;
        SpectralField {
            data: Array4::default((parity.len(), g.nz, g.ny(), g.nx())),
            domain: Arc::clone(domain),
            frame: FrameTag::Stationary,
            parity: parity.to_vec(),
        }
    }

    /// Four-component state field.
    pub fn state(domain: &Arc<Domain>) -> SpectralField {
        Self::zeros(domain, &STATE_PARITY)
    }

    pub fn ncomp(&self) -> usize {
        self.data.dim().0
    }

    pub fn same_shape(&self) -> SpectralField {
        SpectralField {
            data: Array4::default(self.data.dim()),
            domain: Arc::clone(&self.domain),
            frame: self.frame,
            parity: self.parity.clone(),
        }
    }

    /// Linear update `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        assert_eq!(self.data.dim(), other.data.dim());
        let lhs = self.data.as_slice_mut().unwrap();
        let rhs = other.data.as_slice().unwrap();
        let chunk = 1 << 14;
        let rhs_ptr = rhs.as_ptr() as usize;
        exec::for_each_slice_chunk(self.domain.exec, lhs, chunk, move |i, c| {
            let r = unsafe { (rhs_ptr as *const C64).add(i * chunk) };
            for (j, v) in c.iter_mut().enumerate() {
                *v += a * unsafe { *r.add(j) };
            }
        });
    }

    pub fn scale(&mut self, a: f64) {
        for v in self.data.iter_mut() {
            *v *= a;
        }
    }

    /// Zero every coefficient outside the dealias mask.
    pub fn dealias(&mut self) {
        let g = self.domain.grid.clone();
        let (nc, nz, ny, nx) = self.data.dim();
        let data = self.data.as_slice_mut().unwrap();
        exec::for_each_slice_chunk(self.domain.exec, data, ny * nx, |plane_idx, chunk| {
            let iz = plane_idx % nz;
            let _ic = plane_idx / nz;
            debug_assert!(_ic < nc);
            if !g.keep_z[iz] {
                chunk.fill(C64::default());
                return;
            }
            for (idx, v) in chunk.iter_mut().enumerate() {
                let (iy, ix) = (idx / nx, idx % nx);
                if !(g.keep_y[iy] && g.keep_x[ix]) {
                    *v = C64::default();
                }
            }
        });
    }

    /// Enforce the stress-free component parities (no-op on periodic grids).
    pub fn parity_project(&mut self) {
        if self.domain.grid.spec.bc != Bc::StressFree {
            return;
        }
        let (nc, nz, ny, nx) = self.data.dim();
        for c in 0..nc {
            let sign = match self.parity[c] {
                Parity::Even => 1.0,
                Parity::Odd => -1.0,
            };
            for iz in 0..=nz / 2 {
                let jz = (nz - iz) % nz;
                for iy in 0..ny {
                    for ix in 0..nx {
                        if jz == iz {
                            // Self-paired plane: odd components vanish.
                            if sign < 0.0 {
                                self.data[[c, iz, iy, ix]] = C64::default();
                            }
                            continue;
                        }
                        let a = self.data[[c, iz, iy, ix]];
                        let b = self.data[[c, jz, iy, ix]];
                        let half = 0.5 * (a + sign * b);
                        self.data[[c, iz, iy, ix]] = half;
                        self.data[[c, jz, iy, ix]] = sign * half;
                    }
                }
            }
        }
    }

    /// Max deviation from the component parity constraints.
    pub fn parity_residual(&self) -> f64 {
        if self.domain.grid.spec.bc != Bc::StressFree {
            return 0.0;
        }
        let (nc, nz, ny, nx) = self.data.dim();
        let mut worst = 0.0f64;
        for c in 0..nc {
            let sign = match self.parity[c] {
                Parity::Even => 1.0,
                Parity::Odd => -1.0,
            };
            for iz in 0..nz {
                let jz = (nz - iz) % nz;
                for iy in 0..ny {
                    for ix in 0..nx {
                        let r = (self.data[[c, iz, iy, ix]]
                            - sign * self.data[[c, jz, iy, ix]])
                        .norm();
                        worst = worst.max(r);
                    }
                }
            }
        }
        worst
    }

    /// Max deviation from Hermitian symmetry (realness of the physical field).
    pub fn hermitian_residual(&self) -> f64 {
        let (nc, nz, ny, nx) = self.data.dim();
        let mut worst = 0.0f64;
        for c in 0..nc {
            for iz in 0..nz {
                let jz = (nz - iz) % nz;
                for iy in 0..ny {
                    let jy = (ny - iy) % ny;
                    for ix in 0..nx {
                        let jx = (nx - ix) % nx;
                        let r = (self.data[[c, iz, iy, ix]].conj()
                            - self.data[[c, jz, jy, jx]])
                        .norm();
                        worst = worst.max(r);
                    }
                }
            }
        }
        worst
    }

    /// Max of `|k . u_hat|` over modes, normalized by `|k||u_hat|` where sensible.
    pub fn divergence_residual(&self) -> f64 {
        assert!(self.ncomp() >= 3);
        let g = &self.domain.grid;
        let (_, nz, ny, nx) = self.data.dim();
        let mut worst = 0.0f64;
        let mut scale = 0.0f64;
        for iz in 0..nz {
            for iy in 0..ny {
                for ix in 0..nx {
                    let [kx, ky, kz] = g.wavevector(iz, iy, ix);
                    let u = [
                        self.data[[0, iz, iy, ix]],
                        self.data[[1, iz, iy, ix]],
                        self.data[[2, iz, iy, ix]],
                    ];
                    let div = kx * u[0] + ky * u[1] + kz * u[2];
                    worst = worst.max(div.norm());
                    let kn = (kx * kx + ky * ky + kz * kz).sqrt();
                    scale = scale.max(kn * u.iter().map(|c| c.norm()).fold(0.0, f64::max));
                }
            }
        }
        if scale > 0.0 {
            worst / scale
        } else {
            worst
        }
    }

    /// `L^2(box)` squared norm via Parseval (integral over the unit layer).
    pub fn l2sq(&self) -> f64 {
        let l = self.domain.grid.spec.l;
        let sum: f64 = self.data.iter().map(|c| c.norm_sqr()).sum();
        l * l * sum
    }

    /// `H^1` squared norm: `sum (1+|k|^2) |v_hat|^2 * L^2`.
    pub fn h1sq(&self) -> f64 {
        let g = &self.domain.grid;
        let (nc, nz, ny, nx) = self.data.dim();
        let mut sum = 0.0;
        for c in 0..nc {
            for iz in 0..nz {
                for iy in 0..ny {
                    for ix in 0..nx {
                        let [kx, ky, kz] = g.wavevector(iz, iy, ix);
                        let k2 = kx * kx + ky * ky + kz * kz;
                        sum += (1.0 + k2) * self.data[[c, iz, iy, ix]].norm_sqr();
                    }
                }
            }
        }
        g.spec.l * g.spec.l * sum
    }

    /// Squared norm of the gradient, `sum |k|^2 |v_hat|^2 * L^2`.
    pub fn gradsq(&self) -> f64 {
        self.h1sq() - self.l2sq()
    }
}

/// Physical to spectral; zero mode equals the spatial mean.
pub fn to_spectral(p: &PhysicalField) -> SpectralField {
    to_spectral_with_parity(p, &default_parity(p.data.dim().0))
}

pub fn to_spectral_with_parity(p: &PhysicalField, parity: &[Parity]) -> SpectralField {
    let mut out = SpectralField::zeros(&p.domain, parity);
    let exec = p.domain.exec;
    for c in 0..p.data.dim().0 {
        let mut comp = out.data.index_axis_mut(Axis(0), c);
        let mut buf = comp.to_owned();
        p.domain.fft.forward(p.data.index_axis(Axis(0), c), &mut buf, exec);
        comp.assign(&buf);
    }
    out
}

/// Spectral to physical collocation values.
pub fn to_physical(s: &SpectralField) -> PhysicalField {
    let g = &s.domain.grid;
    let (nc, nz, ny, nx) = s.data.dim();
    debug_assert_eq!((nz, ny, nx), (g.nz, g.ny(), g.nx()));
    let mut out = PhysicalField {
        data: Array4::zeros((nc, nz, ny, nx)),
        domain: Arc::clone(&s.domain),
    };
    let mut work = Array3::default((nz, ny, nx));
    for c in 0..nc {
        let mut view = out.data.index_axis_mut(Axis(0), c);
        s.domain
            .fft
            .inverse(s.data.index_axis(Axis(0), c), &mut work, &mut view, s.domain.exec);
    }
    out
}

fn default_parity(nc: usize) -> Vec<Parity> {
    match nc {
        4 => STATE_PARITY.to_vec(),
        3 => VORTICITY_PARITY.to_vec(),
        n => vec![Parity::Even; n],
    }
}

/// Barotropic projection `Q v`: keep only the vertical-mean (n = 0) planes.
pub fn vertical_mean(s: &SpectralField) -> SpectralField {
    let mut out = s.same_shape();
    out.data
        .index_axis_mut(Axis(1), 0)
        .assign(&s.data.index_axis(Axis(1), 0));
    out
}

/// Baroclinic part `(1 - Q) v = v - Qv`.
pub fn baroclinic_part(s: &SpectralField) -> SpectralField {
    let mut out = s.clone();
    out.data.index_axis_mut(Axis(1), 0).fill(C64::default());
    out
}

/// Spectral curl of the velocity components: `w_hat = i k x u_hat`.
pub fn curl(s: &SpectralField) -> SpectralField {
    assert!(s.ncomp() >= 3, "curl needs velocity components");
    let g = s.domain.grid.clone();
    let mut out = SpectralField::zeros(&s.domain, &VORTICITY_PARITY);
    let (nz, ny, nx) = (g.nz, g.ny(), g.nx());
    for iz in 0..nz {
        for iy in 0..ny {
            for ix in 0..nx {
                let [kx, ky, kz] = g.wavevector(iz, iy, ix);
                let u = [
                    s.data[[0, iz, iy, ix]],
                    s.data[[1, iz, iy, ix]],
                    s.data[[2, iz, iy, ix]],
                ];
                let i = C64::new(0.0, 1.0);
                out.data[[0, iz, iy, ix]] = i * (ky * u[2] - kz * u[1]);
                out.data[[1, iz, iy, ix]] = i * (kz * u[0] - kx * u[2]);
                out.data[[2, iz, iy, ix]] = i * (kx * u[1] - ky * u[0]);
            }
        }
    }
    out
}

/// Component-wise spectral derivative along axis `axis` (0 = x1, 1 = x2, 2 = x3).
pub fn derivative(s: &SpectralField, axis: usize) -> SpectralField {
    let g = s.domain.grid.clone();
    let mut out = s.clone();
    let (nc, nz, ny, nx) = out.data.dim();
    for c in 0..nc {
        for iz in 0..nz {
            for iy in 0..ny {
                for ix in 0..nx {
                    let k = g.wavevector(iz, iy, ix)[axis];
                    out.data[[c, iz, iy, ix]] *= C64::new(0.0, k);
                }
            }
        }
    }
    out
}

/// Integral moments of the barotropic part.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// Integral of the barotropic vertical vorticity (0 for any torus field).
    pub a: f64,
    /// Integral of the barotropic vertical velocity.
    pub b1: f64,
    /// Integral of the barotropic temperature.
    pub b2: f64,
}

/// Moments from the zero-mode coefficients.
pub fn moments(s: &SpectralField) -> Moments {
    assert_eq!(s.ncomp(), 4);
    let g = &s.domain.grid;
    let area = g.spec.l * g.spec.l;
    // curl2 of u_h at the zero horizontal mode: i(k1 u2 - k2 u1) = 0 there.
    let kx0 = g.kx[0];
    let ky0 = g.ky[0];
    let a = (C64::new(0.0, 1.0)
        * (kx0 * s.data[[1, 0, 0, 0]] - ky0 * s.data[[0, 0, 0, 0]]))
        .re
        * area;
    Moments {
        a,
        b1: s.data[[2, 0, 0, 0]].re * area,
        b2: s.data[[3, 0, 0, 0]].re * area,
    }
}

/// Weighted `L^p(m)` norm by physical quadrature: trapezoid over the unit
/// vertical layer, rectangle rule horizontally, weight `(1+|x_h|^2)^{m/2}`.
/// Components enter through the pointwise Euclidean magnitude. `p = None`
/// means the weighted sup (max over collocation points).
pub fn weighted_norm(p: &PhysicalField, m: f64, lp: Option<f64>) -> f64 {
    let g = &p.domain.grid;
    let (nc, nz, ny, nx) = p.data.dim();
    let xs = g.xs();
    // Vertical quadrature weights over [0,1].
    let (planes, wz): (Vec<usize>, Vec<f64>) = match g.spec.bc {
        Bc::Periodic => ((0..nz).collect(), vec![1.0 / nz as f64; nz]),
        Bc::StressFree => {
            let nv = g.spec.nv;
            let mut planes = Vec::with_capacity(nv + 1);
            let mut w = Vec::with_capacity(nv + 1);
            for j in 0..=nv {
                planes.push(j % nz);
                w.push(if j == 0 || j == nv { 0.5 / nv as f64 } else { 1.0 / nv as f64 });
            }
            (planes, w)
        }
    };
    let da = g.cell_area();
    let mut acc = 0.0f64;
    let mut sup = 0.0f64;
    for (pi, &iz) in planes.iter().enumerate() {
        for iy in 0..ny {
            for ix in 0..nx {
                let r2 = xs[ix] * xs[ix] + xs[iy] * xs[iy];
                let w = (1.0 + r2).powf(0.5 * m);
                let mag2: f64 = (0..nc).map(|c| p.data[[c, iz, iy, ix]].powi(2)).sum();
                let val = w * mag2.sqrt();
                match lp {
                    Some(q) => acc += wz[pi] * da * val.powf(q),
                    None => sup = sup.max(val),
                }
            }
        }
    }
    match lp {
        Some(q) => acc.powf(1.0 / q),
        None => sup,
    }
}

/// Weighted norm of a spectral field (transforms first).
pub fn weighted_norm_spec(s: &SpectralField, m: f64, lp: Option<f64>) -> f64 {
    weighted_norm(&to_physical(s), m, lp)
}

// ---------------------------------------------------------------------------
// 2D horizontal fields (barotropic diagnostics).
// ---------------------------------------------------------------------------

/// Complex coefficients of a horizontal field, `(component, ky, kx)`.
pub struct Spec2 {
    pub data: Array3<C64>,
    pub domain: Arc<Domain>,
}

/// Real collocation values of a horizontal field.
pub struct Phys2 {
    pub data: Array3<f64>,
    pub domain: Arc<Domain>,
}

impl Clone for Spec2 {
    fn clone(&self) -> Self {
        Spec2 { data: self.data.clone(), domain: Arc::clone(&self.domain) }
    }
}

impl Spec2 {
    pub fn zeros(domain: &Arc<Domain>, nc: usize) -> Spec2 {
        let g = &domain.grid;
        Spec2 { data: Array3::default((nc, g.ny(), g.nx())), domain: Arc::clone(domain) }
    }

    pub fn ncomp(&self) -> usize {
        self.data.dim().0
    }

    pub fn l2sq(&self) -> f64 {
        let l = self.domain.grid.spec.l;
        l * l * self.data.iter().map(|c| c.norm_sqr()).sum::<f64>()
    }

    pub fn dealias(&mut self) {
        let g = self.domain.grid.clone();
        for ((_, iy, ix), v) in self.data.indexed_iter_mut() {
            if !(g.keep_y[iy] && g.keep_x[ix]) {
                *v = C64::default();
            }
        }
    }
}

pub fn to_physical2(s: &Spec2) -> Phys2 {
    let g = &s.domain.grid;
    let (nc, ny, nx) = s.data.dim();
    let mut out = Phys2 {
        data: Array3::zeros((nc, ny, nx)),
        domain: Arc::clone(&s.domain),
    };
    let mut work = Array3::default((1, ny, nx));
    for c in 0..nc {
        let spec3 = s
            .data
            .index_axis(Axis(0), c)
            .to_owned()
            .into_shape_with_order((1, ny, nx))
            .unwrap();
        let mut flat = out.data.index_axis_mut(Axis(0), c);
        let mut view3 = flat
            .view_mut()
            .into_shape_with_order((1, ny, nx))
            .unwrap();
        s.domain.fft2.inverse(spec3.view(), &mut work, &mut view3, s.domain.exec);
    }
    let _ = g;
    out
}

pub fn to_spectral2(p: &Phys2) -> Spec2 {
    let (nc, ny, nx) = p.data.dim();
    let mut out = Spec2::zeros(&p.domain, nc);
    for c in 0..nc {
        let phys3 = p
            .data
            .index_axis(Axis(0), c)
            .to_owned()
            .into_shape_with_order((1, ny, nx))
            .unwrap();
        let mut buf = Array3::default((1, ny, nx));
        p.domain.fft2.forward(phys3.view(), &mut buf, p.domain.exec);
        out.data
            .index_axis_mut(Axis(0), c)
            .assign(&buf.index_axis(Axis(0), 0));
    }
    out
}

/// Horizontal skew gradient of a scalar: `(d2 f, -d1 f)`.
pub fn skew_gradient(f: &Spec2) -> Spec2 {
    assert_eq!(f.ncomp(), 1);
    let g = f.domain.grid.clone();
    let mut out = Spec2::zeros(&f.domain, 2);
    let (ny, nx) = (g.ny(), g.nx());
    let i = C64::new(0.0, 1.0);
    for iy in 0..ny {
        for ix in 0..nx {
            let v = f.data[[0, iy, ix]];
            out.data[[0, iy, ix]] = i * g.ky[iy] * v;
            out.data[[1, iy, ix]] = -i * g.kx[ix] * v;
        }
    }
    out
}

/// 2D curl of a horizontal vector: `d1 g2 - d2 g1`.
pub fn curl2(g2: &Spec2) -> Spec2 {
    assert_eq!(g2.ncomp(), 2);
    let g = g2.domain.grid.clone();
    let mut out = Spec2::zeros(&g2.domain, 1);
    let i = C64::new(0.0, 1.0);
    for iy in 0..g.ny() {
        for ix in 0..g.nx() {
            out.data[[0, iy, ix]] =
                i * (g.kx[ix] * g2.data[[1, iy, ix]] - g.ky[iy] * g2.data[[0, iy, ix]]);
        }
    }
    out
}

/// Horizontal divergence residual of a 2D vector field.
pub fn div2_residual(g2: &Spec2) -> f64 {
    let g = g2.domain.grid.clone();
    let mut worst = 0.0f64;
    for iy in 0..g.ny() {
        for ix in 0..g.nx() {
            let d = g.kx[ix] * g2.data[[0, iy, ix]] + g.ky[iy] * g2.data[[1, iy, ix]];
            worst = worst.max(d.norm());
        }
    }
    worst
}

/// Weighted `L^p(m)` norm of a 2D field by horizontal quadrature.
pub fn weighted_norm2(p: &Phys2, m: f64, lp: Option<f64>) -> f64 {
    let g = &p.domain.grid;
    let (nc, ny, nx) = p.data.dim();
    let xs = g.xs();
    let da = g.cell_area();
    let mut acc = 0.0f64;
    let mut sup = 0.0f64;
    for iy in 0..ny {
        for ix in 0..nx {
            let r2 = xs[ix] * xs[ix] + xs[iy] * xs[iy];
            let w = (1.0 + r2).powf(0.5 * m);
            let mag2: f64 = (0..nc).map(|c| p.data[[c, iy, ix]].powi(2)).sum();
            let val = w * mag2.sqrt();
            match lp {
                Some(q) => acc += da * val.powf(q),
                None => sup = sup.max(val),
            }
        }
    }
    match lp {
        Some(q) => acc.powf(1.0 / q),
        None => sup,
    }
}

/// Extract the barotropic plane of one component as a 2D spectral field.
pub fn barotropic_plane(s: &SpectralField, comp: usize) -> Spec2 {
    let mut out = Spec2::zeros(&s.domain, 1);
    out.data
        .index_axis_mut(Axis(0), 0)
        .assign(&s.data.index_axis(Axis(0), comp).index_axis(Axis(0), 0));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{storage_index, GridSpec};

    fn dom(n: usize, nv: usize, bc: Bc) -> Arc<Domain> {
        Domain::new(GridSpec::new(2.0 * std::f64::consts::PI, n, nv, bc), Exec::Seq).unwrap()
    }

    fn random_state(domain: &Arc<Domain>, seed: u64) -> SpectralField {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let g = &domain.grid;
        let mut phys = PhysicalField {
            data: Array4::zeros((4, g.nz, g.ny(), g.nx())),
            domain: Arc::clone(domain),
        };
        for v in phys.data.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let mut s = to_spectral(&phys);
        s.dealias();
        s.parity_project();
        s
    }

    #[test]
    fn round_trip_dealised_field() {
        let d = dom(16, 8, Bc::Periodic);
        let s = random_state(&d, 1);
        let p = to_physical(&s);
        let s2 = to_spectral(&p);
        let err: f64 = s
            .data
            .iter()
            .zip(s2.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        let scale = s.data.iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(err / scale < 1e-12, "round trip {err}");
    }

    #[test]
    fn vertical_mean_is_projection() {
        let d = dom(16, 8, Bc::Periodic);
        let s = random_state(&d, 2);
        let q = vertical_mean(&s);
        let qq = vertical_mean(&q);
        let err: f64 = q
            .data
            .iter()
            .zip(qq.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max);
        assert!(err < 1e-15);
        // Q v + (1-Q) v = v exactly.
        let b = baroclinic_part(&s);
        let sum_err = s
            .data
            .iter()
            .zip(q.data.iter().zip(b.data.iter()))
            .map(|(v, (a, c))| (v - (a + c)).norm())
            .fold(0.0, f64::max);
        assert!(sum_err == 0.0);
        // Q (1-Q) = 0.
        assert!(vertical_mean(&b).data.iter().map(|c| c.norm()).fold(0.0, f64::max) == 0.0);
    }

    #[test]
    fn x3_independent_field_has_no_baroclinic_part() {
        let d = dom(16, 8, Bc::Periodic);
        let g = &d.grid;
        let mut phys = PhysicalField {
            data: Array4::zeros((4, g.nz, g.ny(), g.nx())),
            domain: Arc::clone(&d),
        };
        let xs = g.xs();
        for c in 0..4 {
            for iz in 0..g.nz {
                for iy in 0..g.ny() {
                    for ix in 0..g.nx() {
                        phys.data[[c, iz, iy, ix]] = (xs[ix] + 0.3 * c as f64).sin() * xs[iy].cos();
                    }
                }
            }
        }
        let s = to_spectral(&phys);
        let b = baroclinic_part(&s);
        assert!(b.data.iter().map(|c| c.norm()).fold(0.0, f64::max) < 1e-13);
    }

    #[test]
    fn sine_in_x3_has_no_vertical_mean() {
        let d = dom(16, 8, Bc::Periodic);
        let g = &d.grid;
        let mut phys = PhysicalField {
            data: Array4::zeros((4, g.nz, g.ny(), g.nx())),
            domain: Arc::clone(&d),
        };
        let zs = g.zs();
        for iz in 0..g.nz {
            let v = (2.0 * std::f64::consts::PI * zs[iz]).sin();
            for iy in 0..g.ny() {
                for ix in 0..g.nx() {
                    phys.data[[2, iz, iy, ix]] = v;
                }
            }
        }
        let s = to_spectral(&phys);
        let q = vertical_mean(&s);
        assert!(q.data.iter().map(|c| c.norm()).fold(0.0, f64::max) < 1e-14);
    }

    #[test]
    fn curl_of_gradient_vanishes_and_div_curl_zero() {
        let d = dom(16, 8, Bc::Periodic);
        let s = random_state(&d, 3);
        // gradient field: u = grad f built from component 0 of s.
        let mut grad = SpectralField::zeros(&d, &STATE_PARITY);
        let g = &d.grid;
        for iz in 0..g.nz {
            for iy in 0..g.ny() {
                for ix in 0..g.nx() {
                    let [kx, ky, kz] = g.wavevector(iz, iy, ix);
                    let f = s.data[[0, iz, iy, ix]];
                    let i = C64::new(0.0, 1.0);
                    grad.data[[0, iz, iy, ix]] = i * kx * f;
                    grad.data[[1, iz, iy, ix]] = i * ky * f;
                    grad.data[[2, iz, iy, ix]] = i * kz * f;
                }
            }
        }
        let w = curl(&grad);
        assert!(w.data.iter().map(|c| c.norm()).fold(0.0, f64::max) < 1e-12);
        let w2 = curl(&s);
        assert!(w2.divergence_residual() < 1e-13);
    }

    #[test]
    fn single_mode_curl_matches_hand_value() {
        // u_hat = (0,1,0) at k=(1,0,0) -> w_hat = (0,0,i).
        let d = dom(16, 8, Bc::Periodic);
        let mut s = SpectralField::state(&d);
        s.data[[1, 0, 0, 1]] = C64::new(1.0, 0.0);
        let w = curl(&s);
        assert!((w.data[[2, 0, 0, 1]] - C64::new(0.0, 1.0)).norm() < 1e-15);
        assert!(w.data[[0, 0, 0, 1]].norm() < 1e-15);
        assert!(w.data[[1, 0, 0, 1]].norm() < 1e-15);
    }

    #[test]
    fn skew_gradient_is_divergence_free() {
        let d = dom(16, 4, Bc::Periodic);
        let mut f = Spec2::zeros(&d, 1);
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        for v in f.data.iter_mut() {
            *v = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let gvec = skew_gradient(&f);
        assert!(div2_residual(&gvec) < 1e-12);
    }

    #[test]
    fn parseval_matches_quadrature() {
        let d = dom(16, 8, Bc::Periodic);
        let s = random_state(&d, 4);
        let p = to_physical(&s);
        let plain = weighted_norm(&p, 0.0, Some(2.0));
        let spectral = s.l2sq().sqrt();
        assert!(
            (plain - spectral).abs() / spectral < 1e-10,
            "parseval {plain} vs {spectral}"
        );
    }

    #[test]
    fn moments_of_zero_and_baroclinic_fields_vanish() {
        let d = dom(16, 8, Bc::Periodic);
        let z = SpectralField::state(&d);
        let m = moments(&z);
        assert_eq!((m.a, m.b1, m.b2), (0.0, 0.0, 0.0));
        let s = random_state(&d, 5);
        let b = baroclinic_part(&s);
        let mb = moments(&b);
        assert!(mb.a.abs() < 1e-14 && mb.b1.abs() < 1e-14 && mb.b2.abs() < 1e-14);
    }

    #[test]
    fn stress_free_parity_preserved_by_operators() {
        let d = dom(16, 4, Bc::StressFree);
        let s = random_state(&d, 6);
        assert!(s.parity_residual() < 1e-13);
        let w = curl(&s);
        assert!(w.parity_residual() < 1e-12, "curl parity {}", w.parity_residual());
        let q = vertical_mean(&s);
        assert!(q.parity_residual() < 1e-13);
        // u3, theta have no vertical mean under odd parity.
        assert!(q.data[[2, 0, 0, 0]].norm() < 1e-14);
        assert!(q.data[[3, 0, 0, 0]].norm() < 1e-14);
    }

    #[test]
    fn weighted_l1_of_unit_gaussian_is_one() {
        // phi0 has integral 1; m=0, p=1 quadrature on a large box.
        let spec = GridSpec::new(24.0, 64, 4, Bc::Periodic);
        let d = Domain::new(spec, Exec::Seq).unwrap();
        let g = &d.grid;
        let xs = g.xs();
        let mut phys = PhysicalField {
            data: Array4::zeros((1, g.nz, g.ny(), g.nx())),
            domain: Arc::clone(&d),
        };
        for iz in 0..g.nz {
            for iy in 0..g.ny() {
                for ix in 0..g.nx() {
                    let r2 = xs[ix] * xs[ix] + xs[iy] * xs[iy];
                    phys.data[[0, iz, iy, ix]] =
                        (1.0 / (4.0 * std::f64::consts::PI)) * (-r2 / 4.0).exp();
                }
            }
        }
        let l1 = weighted_norm(&phys, 0.0, Some(1.0));
        assert!((l1 - 1.0).abs() < 1e-6, "l1 {l1}");
    }

    #[test]
    fn weighted_l2_m2_matches_radial_quadrature_oracle() {
        // |phi0|_{L2(m=2)}: 1D radial quadrature of (1+r^2)^2 phi0^2 2 pi r,
        // refined until converged; closed form sqrt(13/(8 pi)).
        let spec = GridSpec::new(30.0, 96, 4, Bc::Periodic);
        let d = Domain::new(spec, Exec::Seq).unwrap();
        let g = &d.grid;
        let xs = g.xs();
        let mut phys = PhysicalField {
            data: Array4::zeros((1, g.nz, g.ny(), g.nx())),
            domain: Arc::clone(&d),
        };
        for iz in 0..g.nz {
            for iy in 0..g.ny() {
                for ix in 0..g.nx() {
                    let r2 = xs[ix] * xs[ix] + xs[iy] * xs[iy];
                    phys.data[[0, iz, iy, ix]] =
                        (1.0 / (4.0 * std::f64::consts::PI)) * (-r2 / 4.0).exp();
                }
            }
        }
        let got = weighted_norm(&phys, 2.0, Some(2.0));
        // Radial Simpson oracle.
        let f = |r: f64| {
            let phi = (1.0 / (4.0 * std::f64::consts::PI)) * (-r * r / 4.0).exp();
            (1.0 + r * r).powi(2) * phi * phi * 2.0 * std::f64::consts::PI * r
        };
        let (r_max, n) = (25.0, 200_000);
        let h = r_max / n as f64;
        let mut acc = f(0.0) + f(r_max);
        for i in 1..n {
            acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let oracle = (acc * h / 3.0).sqrt();
        assert!((got - oracle).abs() < 1e-6, "{got} vs oracle {oracle}");
        let closed = (13.0 / (8.0 * std::f64::consts::PI)).sqrt();
        assert!((oracle - closed).abs() < 1e-10, "oracle vs closed form");
    }

    #[test]
    fn storage_index_round_trip() {
        for n in [8usize, 16] {
            for j in 0..n {
                let s = crate::grid::signed_index(j, n);
                assert_eq!(storage_index(s, n), j);
            }
        }
    }
}

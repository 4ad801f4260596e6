//! Complex 3D/2D transforms built from 1D rustfft plans.
//!
//! Forward transforms normalize by the point count so the zero coefficient
//! equals the spatial mean; inverse transforms are unnormalized. Plans are
//! shared (`Arc<dyn Fft>` is thread-safe); per-line scratch lives in the
//! worker, so one `Transform` can serve any number of threads.
//!
//! Horizontal collocation points run over `[-L/2, L/2)`, so spectral
//! coefficients relative to `exp(i k x)` pick up the half-box shift
//! `exp(i k L/2) = (-1)^j` per horizontal index: an exact checkerboard sign,
//! applied on the spectral side. Stored coefficients are therefore true
//! `exp(i k x)` amplitudes about the box center.

use std::sync::Arc;

use ndarray::{Array3, ArrayView3, ArrayViewMut3};
use rustfft::{Fft, FftDirection, FftPlanner};

use crate::exec::{self, Exec};
use crate::C64;

pub struct Transform {
    nx: usize,
    ny: usize,
    nz: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    fwd_z: Arc<dyn Fft<f64>>,
    inv_z: Arc<dyn Fft<f64>>,
}

impl Transform {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Transform {
        let mut planner = FftPlanner::new();
        Transform {
            nx,
            ny,
            nz,
            fwd_x: planner.plan_fft(nx, FftDirection::Forward),
            inv_x: planner.plan_fft(nx, FftDirection::Inverse),
            fwd_y: planner.plan_fft(ny, FftDirection::Forward),
            inv_y: planner.plan_fft(ny, FftDirection::Inverse),
            fwd_z: planner.plan_fft(nz, FftDirection::Forward),
            inv_z: planner.plan_fft(nz, FftDirection::Inverse),
        }
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.nz, self.ny, self.nx)
    }

    /// In-place transform along the contiguous x axis; one batched call
    /// per chunk of lines.
    fn pass_x(&self, data: &mut [C64], fft: &Arc<dyn Fft<f64>>, exec: Exec) {
        let nx = self.nx;
        let lines_per_task = LINES_PER_TASK.max(1);
        let scratch_len = fft.get_inplace_scratch_len();
        exec::for_each_slice_chunk(exec, data, nx * lines_per_task, |_, chunk| {
            let mut scratch = vec![C64::default(); scratch_len];
            fft.process_with_scratch(chunk, &mut scratch);
        });
    }

    /// In-place transform along a strided axis. Lines `l` of block `b`
    /// start at `b * len * stride + l` with entries spaced `stride` apart;
    /// consecutive lines are gathered into a contiguous tile so the FFT
    /// runs batched and the copies stream through memory.
    fn pass_strided(
        &self,
        data: &mut [C64],
        fft: &Arc<dyn Fft<f64>>,
        len: usize,
        stride: usize,
        exec: Exec,
    ) {
        let blocks = data.len() / (len * stride);
        let tiles_per_block = stride.div_ceil(TILE);
        let scratch_len = fft.get_inplace_scratch_len();
        let ptr = SendPtr(data.as_mut_ptr());
        exec::for_each_chunk(exec, blocks * tiles_per_block, |task| {
            let b = task / tiles_per_block;
            let t = task % tiles_per_block;
            let l0 = t * TILE;
            let tl = TILE.min(stride - l0);
            let base = b * len * stride + l0;
            let mut buf = vec![C64::default(); tl * len];
            let mut scratch = vec![C64::default(); scratch_len];
            unsafe {
                let p = ptr.get();
                // Gather: tile rows are contiguous in memory per i.
                for i in 0..len {
                    let src = p.add(base + i * stride);
                    for l in 0..tl {
                        *buf.get_unchecked_mut(l * len + i) = *src.add(l);
                    }
                }
                fft.process_with_scratch(&mut buf, &mut scratch);
                for i in 0..len {
                    let dst = p.add(base + i * stride);
                    for l in 0..tl {
                        *dst.add(l) = *buf.get_unchecked(l * len + i);
                    }
                }
            }
        });
    }

    /// Full 3D transform of one component, in place on a contiguous
    /// `(nz, ny, nx)` buffer.
    fn transform3_inplace(&self, data: &mut [C64], forward: bool, exec: Exec) {
        let (nx, ny, nz) = (self.nx, self.ny, self.nz);
        assert_eq!(data.len(), nx * ny * nz);
        let (fx, fy, fz) = if forward {
            (&self.fwd_x, &self.fwd_y, &self.fwd_z)
        } else {
            (&self.inv_x, &self.inv_y, &self.inv_z)
        };
        self.pass_x(data, fx, exec);
        self.pass_strided(data, fy, ny, nx, exec);
        if nz > 1 {
            self.pass_strided(data, fz, nz, nx * ny, exec);
        }
        if forward {
            let scale = 1.0 / (nx * ny * nz) as f64;
            exec::for_each_slice_chunk(exec, data, nx * ny, |_, chunk| {
                for (idx, v) in chunk.iter_mut().enumerate() {
                    let (iy, ix) = (idx / nx, idx % nx);
                    let s = if (ix + iy) % 2 == 0 { scale } else { -scale };
                    *v *= s;
                }
            });
        }
    }

    /// Undo the half-box checkerboard before an inverse pass.
    fn checkerboard(&self, data: &mut [C64], exec: Exec) {
        let nx = self.nx;
        exec::for_each_slice_chunk(exec, data, nx * self.ny, |_, chunk| {
            for (idx, v) in chunk.iter_mut().enumerate() {
                let (iy, ix) = (idx / nx, idx % nx);
                if (ix + iy) % 2 == 1 {
                    *v = -*v;
                }
            }
        });
    }

    /// Physical (real) to spectral coefficients of one component.
    pub fn forward(&self, phys: ArrayView3<'_, f64>, out: &mut Array3<C64>, exec: Exec) {
        assert_eq!(phys.dim(), (self.nz, self.ny, self.nx));
        assert_eq!(out.dim(), (self.nz, self.ny, self.nx));
        {
            let o = out.as_slice_mut().expect("contiguous");
            let p = phys.as_slice().expect("contiguous");
            for (dst, src) in o.iter_mut().zip(p.iter()) {
                *dst = C64::new(*src, 0.0);
            }
        }
        self.transform3_inplace(out.as_slice_mut().unwrap(), true, exec);
    }

    /// Spectral coefficients to physical (real) values of one component.
    ///
    /// Requires a caller-provided complex work buffer of the grid size.
    pub fn inverse(
        &self,
        spec: ArrayView3<'_, C64>,
        work: &mut Array3<C64>,
        out: &mut ArrayViewMut3<'_, f64>,
        exec: Exec,
    ) {
        assert_eq!(spec.dim(), (self.nz, self.ny, self.nx));
        work.assign(&spec);
        self.checkerboard(work.as_slice_mut().unwrap(), exec);
        self.transform3_inplace(work.as_slice_mut().unwrap(), false, exec);
        let w = work.as_slice().unwrap();
        let o = out.as_slice_mut().expect("contiguous");
        for (dst, src) in o.iter_mut().zip(w.iter()) {
            *dst = src.re;
        }
    }

    /// Spectral to physical keeping complex values (diagnostic path).
    pub fn inverse_complex(&self, spec: ArrayView3<'_, C64>, work: &mut Array3<C64>, exec: Exec) {
        work.assign(&spec);
        self.checkerboard(work.as_slice_mut().unwrap(), exec);
        self.transform3_inplace(work.as_slice_mut().unwrap(), false, exec);
    }
}

const LINES_PER_TASK: usize = 64;
const TILE: usize = 64;

#[derive(Clone, Copy)]
struct SendPtr(*mut C64);
unsafe impl Send for SendPtr {}
unsafe impl Sync for SendPtr {}

impl SendPtr {
    #[inline(always)]
    fn get(&self) -> *mut C64 {
        self.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array3;

    fn round_trip(exec: Exec) {
        let (nz, ny, nx) = (4, 8, 8);
        let t = Transform::new(nx, ny, nz);
        let mut rng = 1u64;
        let mut next = move || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        let phys = Array3::from_shape_fn((nz, ny, nx), |_| next());
        let mut spec = Array3::default((nz, ny, nx));
        t.forward(phys.view(), &mut spec, exec);
        let mut work = Array3::default((nz, ny, nx));
        let mut back = Array3::zeros((nz, ny, nx));
        t.inverse(spec.view(), &mut work, &mut back.view_mut(), exec);
        let err = phys
            .iter()
            .zip(back.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0f64, f64::max);
        assert!(err < 1e-12, "round trip error {err}");
    }

    #[test]
    fn round_trip_seq() {
        round_trip(Exec::Seq);
    }

    #[cfg(feature = "parallel")]
    #[test]
    fn round_trip_par_matches_seq_bitwise() {
        let (nz, ny, nx) = (4, 16, 16);
        let t = Transform::new(nx, ny, nz);
        let phys = Array3::from_shape_fn((nz, ny, nx), |(k, j, i)| {
            ((i * 31 + j * 17 + k * 7) as f64 * 0.61803).sin()
        });
        let mut s1 = Array3::default((nz, ny, nx));
        let mut s2 = Array3::default((nz, ny, nx));
        t.forward(phys.view(), &mut s1, Exec::Seq);
        t.forward(phys.view(), &mut s2, Exec::Par);
        assert!(s1.iter().zip(s2.iter()).all(|(a, b)| a == b));
    }

    #[test]
    fn constant_field_is_pure_mean() {
        let (nz, ny, nx) = (4, 8, 8);
        let t = Transform::new(nx, ny, nz);
        let phys = Array3::from_elem((nz, ny, nx), 2.5f64);
        let mut spec = Array3::default((nz, ny, nx));
        t.forward(phys.view(), &mut spec, Exec::Seq);
        assert!((spec[[0, 0, 0]].re - 2.5).abs() < 1e-13);
        assert!(spec[[0, 0, 0]].im.abs() < 1e-13);
        let rest: f64 = spec.iter().skip(1).map(|c| c.norm()).sum();
        assert!(rest < 1e-12);
    }

    #[test]
    fn cosine_splits_into_two_modes() {
        // f = cos(x) on L=2pi: coefficients 1/2 at kx = +-1.
        let (nz, ny, nx) = (4, 8, 8);
        let t = Transform::new(nx, ny, nz);
        let l = 2.0 * std::f64::consts::PI;
        let phys = Array3::from_shape_fn((nz, ny, nx), |(_, _, i)| {
            (-0.5 * l + i as f64 * l / nx as f64).cos()
        });
        let mut spec = Array3::default((nz, ny, nx));
        t.forward(phys.view(), &mut spec, Exec::Seq);
        assert!((spec[[0, 0, 1]].re - 0.5).abs() < 1e-13);
        assert!((spec[[0, 0, nx - 1]].re - 0.5).abs() < 1e-13);
        assert!(spec[[0, 0, 1]].im.abs() < 1e-13);
    }
}

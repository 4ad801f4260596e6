//! The linear skeleton: Helmholtz projection, the Coriolis/buoyancy skew
//! operator and its per-mode eigenstructure, geostrophic and band
//! projectors, exact per-mode propagators, and the rotating-frame change of
//! variables.
//!
//! Restricted to the divergence-free subspace at a mode `k`, the skew
//! operator `P J_eta P` acts on the orthonormal triple
//! `{toroidal, poloidal, theta}` as the cross product with the axis
//! `(|k_h|, 0, eta*k3)/|k_eta|`, scaled by `|k_eta|/|k|`. The exact
//! propagator is therefore a Rodrigues rotation times viscous decay, which
//! conserves the L2 norm exactly when `nu = 0`.


use crate::error::{Error, Result};
use crate::exec;
use crate::field::{Spec2, SpectralField};
use crate::grid::Bc;
use crate::C64;

/// Physical parameters of the rotating stratified system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysParams {
    /// Rotation rate.
    pub omega: f64,
    /// Buoyancy coupling (Brunt-Vaisala frequency times sqrt(g)).
    pub gamma: f64,
    /// Viscosity (= thermal diffusivity).
    pub nu: f64,
}

impl PhysParams {
    pub fn new(omega: f64, gamma: f64) -> PhysParams {
        PhysParams { omega, gamma, nu: 1.0 }
    }

    /// Ratio `eta = Omega / Gamma`; requires a nonzero buoyancy coupling
    /// unless the rotation also vanishes.
    pub fn eta(&self) -> f64 {
        if self.gamma != 0.0 {
            self.omega / self.gamma
        } else {
            assert_eq!(self.omega, 0.0, "eta undefined: Gamma = 0 with Omega != 0");
            0.0
        }
    }
}

/// Per-wavevector eigenstructure of the skew operator.
#[derive(Debug, Clone)]
pub struct ModeFrame {
    pub k: [f64; 3],
    pub a_g: [C64; 4],
    pub a_0: [C64; 4],
    pub a_plus: [C64; 4],
    pub a_minus: [C64; 4],
    pub p_eta: f64,
}

const I: C64 = C64::new(0.0, 1.0);

/// Vertical wavenumber of integer index `n` under the given boundary
/// conditions (`2*pi*n` periodic, `pi*n` stress-free).
pub fn vertical_wavenumber(n: i64, bc: Bc) -> f64 {
    match bc {
        Bc::Periodic => 2.0 * std::f64::consts::PI * n as f64,
        Bc::StressFree => std::f64::consts::PI * n as f64,
    }
}

/// Eigenframe at wavevector `(k1, k2, k3)`; `k3` is the vertical factor.
pub fn frame_from_wavevector(k1: f64, k2: f64, k3: f64, eta: f64) -> Result<ModeFrame> {
    let kh2 = k1 * k1 + k2 * k2;
    let k2n = kh2 + k3 * k3;
    if k2n == 0.0 {
        return Err(Error::ZeroWavevector);
    }
    let kh = kh2.sqrt();
    let kn = k2n.sqrt();
    if kh == 0.0 {
        // Degenerate line k_h = 0: analytic limits.
        let sg = {
            let s = eta * k3;
            if s > 0.0 {
                1.0
            } else if s < 0.0 {
                -1.0
            } else {
                1.0
            }
        };
        let se = if eta < 0.0 { -1.0 } else { 1.0 };
        let r = 0.5f64.sqrt();
        return Ok(ModeFrame {
            k: [k1, k2, k3],
            a_g: [C64::default(), C64::default(), C64::default(), I * sg],
            a_0: [C64::default(), C64::default(), I * k3.signum(), C64::default()],
            a_plus: [C64::new(r, 0.0), C64::new(0.0, -r * se), C64::default(), C64::default()],
            a_minus: [C64::new(r, 0.0), C64::new(0.0, r * se), C64::default(), C64::default()],
            p_eta: eta.abs(),
        });
    }
    let keta = (kh2 + (eta * k3) * (eta * k3)).sqrt();
    // Real orthonormal triple spanning the divergence-free 4-space:
    // toroidal, poloidal, temperature axis.
    let t4 = [-k2 / kh, k1 / kh, 0.0, 0.0];
    let p4 = [-k1 * k3 / (kh * kn), -k2 * k3 / (kh * kn), kh / kn, 0.0];
    let e4 = [0.0, 0.0, 0.0, 1.0];
    let mut a_g = [C64::default(); 4];
    let mut a_plus = [C64::default(); 4];
    let ct = eta * k3 / keta;
    let cp = kh / keta;
    for i in 0..4 {
        a_g[i] = I * (kh * t4[i] + eta * k3 * e4[i]) / keta;
        a_plus[i] = (C64::new(p4[i], 0.0) + I * ct * t4[i] - I * cp * e4[i])
            * C64::new(0.5f64.sqrt(), 0.0);
    }
    let a_0 = [I * k1 / kn, I * k2 / kn, I * k3 / kn, C64::default()];
    let a_minus = [a_plus[0].conj(), a_plus[1].conj(), a_plus[2].conj(), a_plus[3].conj()];
    Ok(ModeFrame { k: [k1, k2, k3], a_g, a_0, a_plus, a_minus, p_eta: keta / kn })
}

/// Eigenframe for horizontal wavevector `k_h` and vertical index `n`.
pub fn mode_frame(k1: f64, k2: f64, n: i64, params: &PhysParams, bc: Bc) -> Result<ModeFrame> {
    frame_from_wavevector(k1, k2, vertical_wavenumber(n, bc), params.eta())
}

/// Matrix of `P J_eta P` at a mode, in the representation matching the
/// boundary conditions: exponential vertical basis for periodic fields,
/// cosine/sine coefficients (`u_h` cosine, `u3, theta` sine) for
/// stress-free, which conjugates the periodic matrix by `diag(1,1,i,i)`.
pub fn pjp_matrix(k1: f64, k2: f64, n: i64, params: &PhysParams, bc: Bc) -> Result<[[C64; 4]; 4]> {
    let k3 = vertical_wavenumber(n, bc);
    let m = pjp_real(k1, k2, k3, params.eta())?;
    match bc {
        Bc::Periodic => Ok(m),
        Bc::StressFree => {
            let b = [C64::new(1.0, 0.0), C64::new(1.0, 0.0), I, I];
            let mut out = [[C64::default(); 4]; 4];
            for r in 0..4 {
                for c in 0..4 {
                    out[r][c] = b[r] * m[r][c] * b[c].conj();
                }
            }
            Ok(out)
        }
    }
}

/// `P J_eta P` in the exponential representation (real entries).
pub fn pjp_real(k1: f64, k2: f64, k3: f64, eta: f64) -> Result<[[C64; 4]; 4]> {
    let kh2 = k1 * k1 + k2 * k2;
    let k2n = kh2 + k3 * k3;
    if k2n == 0.0 {
        return Err(Error::ZeroWavevector);
    }
    let r = |x: f64| C64::new(x / k2n, 0.0);
    Ok([
        [r(0.0), r(-eta * k3 * k3), r(eta * k2 * k3), r(k1 * k3)],
        [r(eta * k3 * k3), r(0.0), r(-eta * k1 * k3), r(k2 * k3)],
        [r(-eta * k2 * k3), r(eta * k1 * k3), r(0.0), r(-kh2)],
        [r(-k1 * k3), r(-k2 * k3), r(kh2), r(0.0)],
    ])
}

/// Leray/Helmholtz projection: remove the gradient part of the velocity,
/// leave the temperature untouched. Identity at `k = 0`.
pub fn helmholtz_project(s: &mut SpectralField) {
    assert!(s.ncomp() >= 3);
    let g = s.domain.grid.clone();
    let (nc, nz, ny, nx) = s.data.dim();
    debug_assert!(nc >= 3);
    let cstride = nz * ny * nx;
    let data = s.data.as_slice_mut().unwrap();
    let ptr = SendPtrC(data.as_mut_ptr());
    exec::for_each_chunk(s.domain.exec, nz * ny, |row| {
        let (iz, iy) = (row / ny, row % ny);
        let base = (iz * ny + iy) * nx;
        for ix in 0..nx {
            let [kx, ky, kz] = g.wavevector(iz, iy, ix);
            let k2 = kx * kx + ky * ky + kz * kz;
            if k2 == 0.0 {
                continue;
            }
            unsafe {
                let p = ptr.get();
                let u0 = *p.add(base + ix);
                let u1 = *p.add(cstride + base + ix);
                let u2 = *p.add(2 * cstride + base + ix);
                let proj = (kx * u0 + ky * u1 + kz * u2) / k2;
                *p.add(base + ix) = u0 - kx * proj;
                *p.add(cstride + base + ix) = u1 - ky * proj;
                *p.add(2 * cstride + base + ix) = u2 - kz * proj;
            }
        }
    });
}

/// Geostrophic projection `S`: per mode, keep the component along `a_g`.
/// The `k = 0` mode carries no geostrophic content and is zeroed.
pub fn geostrophic_project(s: &SpectralField, params: &PhysParams) -> SpectralField {
    let eta = params.eta();
    let mut out = s.same_shape();
    let g = s.domain.grid.clone();
    let (_, nz, ny, nx) = s.data.dim();
    for iz in 0..nz {
        for iy in 0..ny {
            for ix in 0..nx {
                let [kx, ky, kz] = g.wavevector(iz, iy, ix);
                if kx == 0.0 && ky == 0.0 && kz == 0.0 {
                    continue;
                }
                let fr = frame_from_wavevector(kx, ky, kz, eta).unwrap();
                let v = [
                    s.data[[0, iz, iy, ix]],
                    s.data[[1, iz, iy, ix]],
                    s.data[[2, iz, iy, ix]],
                    s.data[[3, iz, iy, ix]],
                ];
                let mut coef = C64::default();
                for i in 0..4 {
                    coef += v[i] * fr.a_g[i].conj();
                }
                for i in 0..4 {
                    out.data[[i, iz, iy, ix]] = coef * fr.a_g[i];
                }
            }
        }
    }
    out
}

/// Complement `(1 - S)`.
pub fn ageostrophic_part(s: &SpectralField, params: &PhysParams) -> SpectralField {
    let mut out = s.clone();
    let sg = geostrophic_project(s, params);
    out.axpy(-1.0, &sg);
    out
}

/// Smooth low-pass cutoff profile: 1 on [0,1], 0 on [2,inf).
pub fn chi(r: f64) -> f64 {
    fn bump(s: f64) -> f64 {
        if s > 0.0 {
            (-1.0 / s).exp()
        } else {
            0.0
        }
    }
    if r <= 1.0 {
        1.0
    } else if r >= 2.0 {
        0.0
    } else {
        let a = bump(2.0 - r);
        let b = bump(r - 1.0);
        a / (a + b)
    }
}

/// Band projector `P_R`: multiply each mode by `chi(|k|/R)`.
pub fn band_project(s: &SpectralField, r_cut: f64) -> SpectralField {
    assert!(r_cut > 0.0);
    let mut out = s.clone();
    let g = s.domain.grid.clone();
    let (nc, nz, ny, nx) = out.data.dim();
    for iz in 0..nz {
        for iy in 0..ny {
            for ix in 0..nx {
                let [kx, ky, kz] = g.wavevector(iz, iy, ix);
                let kn = (kx * kx + ky * ky + kz * kz).sqrt();
                let w = chi(kn / r_cut);
                if w != 1.0 {
                    for c in 0..nc {
                        out.data[[c, iz, iy, ix]] *= w;
                    }
                }
            }
        }
    }
    out
}

/// Exact propagator of the linear system over `dt`, applied per mode.
///
/// `exp((-nu |k|^2 I - Gamma P J_eta P) dt)`: viscous decay times a
/// Rodrigues rotation of the `(toroidal, poloidal, theta)` components about
/// the axis `(Gamma |k_h|, 0, Omega k3)`, with the longitudinal part left to
/// decay. The `k = 0` mode rotates the horizontal-mean and
/// `(u3, theta)`-mean pairs at rates `Omega` and `Gamma`.
pub fn apply_propagator(s: &mut SpectralField, params: &PhysParams, dt: f64) {
    assert_eq!(s.ncomp(), 4);
    let g = s.domain.grid.clone();
    let (omega, gamma, nu) = (params.omega, params.gamma, params.nu);
    let (_, nz, ny, nx) = s.data.dim();
    let cstride = nz * ny * nx;
    let data = s.data.as_slice_mut().unwrap();
    let ptr = SendPtrC(data.as_mut_ptr());
    exec::for_each_chunk(s.domain.exec, nz * ny, |row| {
        let (iz, iy) = (row / ny, row % ny);
        let base = (iz * ny + iy) * nx;
        for ix in 0..nx {
            let [kx, ky, kz] = g.wavevector(iz, iy, ix);
            let idx = base + ix;
            let v = unsafe {
                [
                    *ptr.get().add(idx),
                    *ptr.get().add(cstride + idx),
                    *ptr.get().add(2 * cstride + idx),
                    *ptr.get().add(3 * cstride + idx),
                ]
            };
            let out = propagate_mode(v, kx, ky, kz, omega, gamma, nu, dt);
            unsafe {
                *ptr.get().add(idx) = out[0];
                *ptr.get().add(cstride + idx) = out[1];
                *ptr.get().add(2 * cstride + idx) = out[2];
                *ptr.get().add(3 * cstride + idx) = out[3];
            }
        }
    });
}

/// Single-mode propagator action; the scalar core of [`apply_propagator`].
#[inline]
pub fn propagate_mode(
    v: [C64; 4],
    kx: f64,
    ky: f64,
    kz: f64,
    omega: f64,
    gamma: f64,
    nu: f64,
    dt: f64,
) -> [C64; 4] {
    let kh2 = kx * kx + ky * ky;
    let k2 = kh2 + kz * kz;
    if k2 == 0.0 {
        // Means: block rotations at rates Omega and Gamma.
        let (so, co) = (omega * dt).sin_cos();
        let (sg, cg) = (gamma * dt).sin_cos();
        return [
            co * v[0] + so * v[1],
            -so * v[0] + co * v[1],
            cg * v[2] + sg * v[3],
            -sg * v[2] + cg * v[3],
        ];
    }
    let decay = (-nu * k2 * dt).exp();
    if kh2 == 0.0 {
        // Horizontal-mean column: inertial rotation of (u1, u2) at rate
        // Omega; u3 (zero if solenoidal) and theta only decay.
        let (so, co) = (omega * dt).sin_cos();
        return [
            decay * (co * v[0] + so * v[1]),
            decay * (-so * v[0] + co * v[1]),
            decay * v[2],
            decay * v[3],
        ];
    }
    let kh = kh2.sqrt();
    let kn = k2.sqrt();
    // Orthonormal triple (t, p, e4) and longitudinal direction.
    let t4 = [-ky / kh, kx / kh, 0.0];
    let p4 = [-kx * kz / (kh * kn), -ky * kz / (kh * kn), kh / kn];
    let vl = (kx * v[0] + ky * v[1] + kz * v[2]) / kn;
    let mut vt = C64::default();
    let mut vp = C64::default();
    for i in 0..3 {
        vt += t4[i] * v[i];
        vp += p4[i] * v[i];
    }
    let v4 = v[3];
    let ax = gamma * kh;
    let az = omega * kz;
    let rate = (ax * ax + az * az).sqrt() / kn;
    let (vt, vp, v4) = if rate > 0.0 {
        let wt = ax / (rate * kn);
        let we = az / (rate * kn);
        let phi = -rate * dt;
        let (sp, cp) = phi.sin_cos();
        // Rodrigues rotation of (vt, vp, v4) about (wt, 0, we).
        let dotw = wt * vt + we * v4;
        let cross = [-we * vp, we * vt - wt * v4, wt * vp];
        (
            vt * cp + cross[0] * sp + wt * dotw * (1.0 - cp),
            vp * cp + cross[1] * sp,
            v4 * cp + cross[2] * sp + we * dotw * (1.0 - cp),
        )
    } else {
        (vt, vp, v4)
    };
    [
        decay * (vl * kx / kn + vt * t4[0] + vp * p4[0]),
        decay * (vl * ky / kn + vt * t4[1] + vp * p4[1]),
        decay * (vl * kz / kn + vt * t4[2] + vp * p4[2]),
        decay * v4,
    ]
}

/// Propagator as a dense per-mode matrix (column-by-column application);
/// the structured path behind [`apply_propagator`], exposed for oracles.
pub fn linear_propagator(
    k1: f64,
    k2: f64,
    n: i64,
    params: &PhysParams,
    dt: f64,
    bc: Bc,
) -> [[C64; 4]; 4] {
    let kz = vertical_wavenumber(n, bc);
    let mut m = [[C64::default(); 4]; 4];
    for col in 0..4 {
        let mut e = [C64::default(); 4];
        e[col] = C64::new(1.0, 0.0);
        let out = propagate_mode(e, k1, k2, kz, params.omega, params.gamma, params.nu, dt);
        for (row, val) in out.iter().enumerate() {
            m[row][col] = *val;
        }
    }
    m
}

/// Full per-mode generator `-nu |k|^2 I - Gamma (P J_eta P)` in the
/// exponential representation; reference input for matrix-exponential
/// oracles.
pub fn generator_matrix(k1: f64, k2: f64, kz: f64, params: &PhysParams) -> [[C64; 4]; 4] {
    let k2n = k1 * k1 + k2 * k2 + kz * kz;
    let mut m = if k2n == 0.0 {
        [[C64::default(); 4]; 4]
    } else {
        let pjp = pjp_real(k1, k2, kz, params.eta()).unwrap();
        let mut out = [[C64::default(); 4]; 4];
        for r in 0..4 {
            for c in 0..4 {
                out[r][c] = -params.gamma * pjp[r][c];
            }
        }
        out
    };
    if k2n == 0.0 {
        // Means evolve by -J_{Omega,Gamma}.
        m[0][1] = C64::new(params.omega, 0.0);
        m[1][0] = C64::new(-params.omega, 0.0);
        m[2][3] = C64::new(params.gamma, 0.0);
        m[3][2] = C64::new(-params.gamma, 0.0);
    }
    for r in 0..4 {
        m[r][r] -= params.nu * k2n;
    }
    m
}

/// Dense 4x4 matrix exponential by scaling and squaring with a Taylor core.
/// Reference oracle; not used in the propagation hot path.
pub fn dense_expm(m: &[[C64; 4]; 4]) -> [[C64; 4]; 4] {
    let norm: f64 = m
        .iter()
        .map(|row| row.iter().map(|c| c.norm()).sum::<f64>())
        .fold(0.0, f64::max);
    let s = norm.log2().ceil().max(0.0) as u32 + 6;
    let scale = (0.5f64).powi(s as i32);
    let a: Vec<Vec<C64>> = m
        .iter()
        .map(|row| row.iter().map(|c| c * scale).collect())
        .collect();
    let mut result = identity();
    let mut term = identity();
    for j in 1..24 {
        term = matmul(&term, &a);
        let f = 1.0 / (j as f64);
        for r in 0..4 {
            for c in 0..4 {
                term[r][c] *= f;
                result[r][c] += term[r][c];
            }
        }
    }
    for _ in 0..s {
        let v: Vec<Vec<C64>> = result.iter().map(|r| r.to_vec()).collect();
        result = matmul_sq(&v);
    }
    result
}

fn identity() -> [[C64; 4]; 4] {
    let mut m = [[C64::default(); 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = C64::new(1.0, 0.0);
    }
    m
}

fn matmul(a: &[[C64; 4]; 4], b: &[Vec<C64>]) -> [[C64; 4]; 4] {
    let mut out = [[C64::default(); 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            let mut acc = C64::default();
            for t in 0..4 {
                acc += a[r][t] * b[t][c];
            }
            out[r][c] = acc;
        }
    }
    out
}

fn matmul_sq(a: &[Vec<C64>]) -> [[C64; 4]; 4] {
    let mut out = [[C64::default(); 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            let mut acc = C64::default();
            for t in 0..4 {
                acc += a[r][t] * a[t][c];
            }
            out[r][c] = acc;
        }
    }
    out
}

/// Rotating-frame change of variables on the barotropic skew-gradient pair:
/// `(w_h, Theta) -> (cos a * w_h + sin a * Theta, -sin a * w_h + cos a * Theta)`.
pub fn rotate_frame(wh: &mut Spec2, theta: &mut Spec2, angle: f64) {
    assert_eq!(wh.data.dim(), theta.data.dim());
    let (s, c) = angle.sin_cos();
    for (a, b) in wh.data.iter_mut().zip(theta.data.iter_mut()) {
        let (wa, tb) = (*a, *b);
        *a = c * wa + s * tb;
        *b = -s * wa + c * tb;
    }
}

/// Rotate a plain pair of scalars (mean values) by the frame angle.
pub fn rotate_pair(u3: f64, theta: f64, angle: f64) -> (f64, f64) {
    let (s, c) = angle.sin_cos();
    (c * u3 + s * theta, -s * u3 + c * theta)
}

#[derive(Clone, Copy)]
struct SendPtrC(*mut C64);
unsafe impl Send for SendPtrC {}
unsafe impl Sync for SendPtrC {}

impl SendPtrC {
    #[inline(always)]
    fn get(&self) -> *mut C64 {
        self.0
    }
}

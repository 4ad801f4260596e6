//! Analytic reference library: the Gaussian vortex pair, the explicit
//! oscillating vortex family, Hermite functions with their spectral
//! projections, and the self-similar change of variables.

use std::sync::Arc;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::exec;
use crate::field::{Domain, Phys2, Spec2};
use crate::C64;

const FOUR_PI: f64 = 4.0 * std::f64::consts::PI;

/// Gaussian vorticity profile, `phi0(xi) = exp(-|xi|^2/4) / (4 pi)`.
pub fn oseen_phi0(xi: [f64; 2]) -> f64 {
    let r2 = xi[0] * xi[0] + xi[1] * xi[1];
    (-0.25 * r2).exp() / FOUR_PI
}

/// Swirl velocity of the Gaussian vortex:
/// `(1 - exp(-|xi|^2/4)) / (2 pi |xi|^2) * (-xi2, xi1)`, with the removable
/// singularity filled in at the origin. Satisfies `curl2 u = phi0`.
pub fn oseen_velocity(xi: [f64; 2]) -> [f64; 2] {
    let g = oseen_swirl_factor(xi[0] * xi[0] + xi[1] * xi[1]);
    [-g * xi[1], g * xi[0]]
}

/// Scalar factor `g(q) = (1 - exp(-q/4)) / (2 pi q)` with `q = |xi|^2`.
fn oseen_swirl_factor(q: f64) -> f64 {
    if q < 1e-3 {
        let s = 0.25 * q;
        (1.0 - s / 2.0 + s * s / 6.0 - s * s * s / 24.0 + s * s * s * s / 120.0)
            / (8.0 * std::f64::consts::PI)
    } else {
        -(-0.25 * q).exp_m1() / (2.0 * std::f64::consts::PI * q)
    }
}

/// Derivative of the swirl factor with respect to `q`.
fn oseen_swirl_factor_prime(q: f64) -> f64 {
    if q < 1e-3 {
        let s = 0.25 * q;
        (-0.5 + s / 3.0 - s * s / 8.0 + s * s * s / 30.0) / (32.0 * std::f64::consts::PI)
    } else {
        let s = 0.25 * q;
        // (1+s) e^{-s} - 1 = expm1(-s) + s e^{-s}, avoiding cancellation.
        ((-s).exp_m1() + s * (-s).exp()) / (2.0 * std::f64::consts::PI * q * q)
    }
}

/// Amplitudes of the explicit vortex family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VortexParams {
    /// Circulation of the barotropic vorticity.
    pub a: f64,
    /// Integral of the barotropic vertical velocity at `t = 0`.
    pub b1: f64,
    /// Integral of the barotropic temperature at `t = 0`.
    pub b2: f64,
    /// Oscillation frequency of the `(u3, theta)` pair.
    pub gamma: f64,
}

impl VortexParams {
    pub fn new(a: f64, b1: f64, b2: f64, gamma: f64) -> VortexParams {
        VortexParams { a, b1, b2, gamma }
    }

    /// Oscillator amplitudes at time `t`:
    /// `(B1 cos(Gamma t) + B2 sin(Gamma t), -B1 sin(Gamma t) + B2 cos(Gamma t))`.
    pub fn oscillator(&self, t: f64) -> (f64, f64) {
        let (s, c) = (self.gamma * t).sin_cos();
        (self.b1 * c + self.b2 * s, -self.b1 * s + self.b2 * c)
    }
}

/// Pointwise values and horizontal gradients of the vortex family.
#[derive(Debug, Clone, Copy)]
pub struct VortexEval {
    pub omega3: f64,
    pub u: [f64; 3],
    pub theta: f64,
    /// `grad[comp][axis]` for components `(u1, u2, u3, theta)`.
    pub grad: [[f64; 2]; 4],
}

/// Evaluate the explicit vortex family at unscaled time `t` and point `x`.
///
/// `omega3 = A/(1+t) phi0(x/s)`, `u_h = A/s u0(x/s)`, and the `(u3, theta)`
/// pair carries the Gaussian profile with amplitudes rotating at rate
/// `gamma`, all with `s = sqrt(1+t)`. Exact solution of the barotropic
/// system: the swirl is azimuthal while every profile is radial, so
/// advection vanishes identically.
pub fn vortex_eval(p: &VortexParams, t: f64, x: [f64; 2]) -> VortexEval {
    let s2 = 1.0 + t;
    let s = s2.sqrt();
    let xi = [x[0] / s, x[1] / s];
    let q = xi[0] * xi[0] + xi[1] * xi[1];
    let phi = (-0.25 * q).exp() / FOUR_PI;
    let g = oseen_swirl_factor(q);
    let gp = oseen_swirl_factor_prime(q);
    let (c, d) = p.oscillator(t);
    let amp = 1.0 / s2;

    let omega3 = p.a * amp * phi;
    let u1 = p.a / s * (-g * xi[1]);
    let u2 = p.a / s * (g * xi[0]);
    let u3 = amp * c * phi;
    let theta = amp * d * phi;

    // d(xi_j)/d(x_j) = 1/s throughout.
    let du1 = [
        p.a / s2 * (-2.0 * xi[0] * xi[1] * gp),
        p.a / s2 * (-g - 2.0 * xi[1] * xi[1] * gp),
    ];
    let du2 = [
        p.a / s2 * (g + 2.0 * xi[0] * xi[0] * gp),
        p.a / s2 * (2.0 * xi[0] * xi[1] * gp),
    ];
    let dphi = [-0.5 * xi[0] * phi, -0.5 * xi[1] * phi];
    let du3 = [amp * c * dphi[0] / s, amp * c * dphi[1] / s];
    let dth = [amp * d * dphi[0] / s, amp * d * dphi[1] / s];

    VortexEval {
        omega3,
        u: [u1, u2, u3],
        theta,
        grad: [du1, du2, du3, dth],
    }
}

// ---------------------------------------------------------------------------
// Hermite functions and projections.
// ---------------------------------------------------------------------------

/// Coefficients of the 1D polynomial `p_a` with
/// `d^a/dx^a exp(-x^2/4) = p_a(x) exp(-x^2/4)`.
fn hermite_p_coeffs(order: usize) -> Vec<f64> {
    let mut p = vec![1.0f64];
    for _ in 0..order {
        // p_{a+1} = p_a' - (x/2) p_a.
        let mut next = vec![0.0; p.len() + 1];
        for (i, &c) in p.iter().enumerate() {
            if i >= 1 {
                next[i - 1] += c * i as f64;
            }
            next[i + 1] -= 0.5 * c;
        }
        p = next;
    }
    p
}

fn poly_eval(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &a| acc * x + a)
}

fn factorial(n: usize) -> f64 {
    (1..=n).map(|i| i as f64).product()
}

/// Hermite eigenfunction `phi_alpha = d^alpha phi0`.
pub fn phi_alpha(alpha: (usize, usize), xi: [f64; 2]) -> f64 {
    let p1 = hermite_p_coeffs(alpha.0);
    let p2 = hermite_p_coeffs(alpha.1);
    poly_eval(&p1, xi[0]) * poly_eval(&p2, xi[1]) * (-0.25 * (xi[0] * xi[0] + xi[1] * xi[1])).exp()
        / FOUR_PI
}

/// Dual Hermite polynomial `H_alpha`, biorthogonal to `phi_beta`:
/// `H_alpha = (2^{|alpha|} / alpha!) e^{|xi|^2/4} d^alpha e^{-|xi|^2/4}`.
pub fn hermite_polynomial(alpha: (usize, usize), xi: [f64; 2]) -> f64 {
    let p1 = hermite_p_coeffs(alpha.0);
    let p2 = hermite_p_coeffs(alpha.1);
    let norm = 2f64.powi((alpha.0 + alpha.1) as i32) / (factorial(alpha.0) * factorial(alpha.1));
    norm * poly_eval(&p1, xi[0]) * poly_eval(&p2, xi[1])
}

/// Quadrature coefficient `int H_alpha f dxi` of a gridded 2D scalar.
pub fn hermite_coeff(f: &Phys2, alpha: (usize, usize)) -> f64 {
    assert_eq!(f.data.dim().0, 1);
    let g = &f.domain.grid;
    let xs = g.xs();
    let da = g.cell_area();
    let mut acc = 0.0;
    for iy in 0..g.ny() {
        for ix in 0..g.nx() {
            acc += hermite_polynomial(alpha, [xs[ix], xs[iy]]) * f.data[[0, iy, ix]];
        }
    }
    acc * da
}

/// Spectral projection `P_n f = sum_{|alpha| <= n} (int H_alpha f) phi_alpha`
/// and its complement. Errors when the weighted quadrature mass in the
/// outer band of the box is not negligible (unresolved tail).
pub fn hermite_projection(f: &Phys2, order: usize) -> Result<(Phys2, Phys2)> {
    hermite_projection_tol(f, order, 1e-4)
}

/// [`hermite_projection`] with an explicit tail-mass tolerance: the ratio
/// of weighted quadrature mass in the outer 20% ring to the total.
pub fn hermite_projection_tol(f: &Phys2, order: usize, tol: f64) -> Result<(Phys2, Phys2)> {
    assert_eq!(f.data.dim().0, 1);
    let g = &f.domain.grid;
    let xs = g.xs();
    let da = g.cell_area();
    // Tail guard: |H f| mass in the outer 20% ring vs total, at the highest
    // order used by the projection.
    let edge = 0.8 * 0.5 * g.spec.l;
    let mut total = 0.0;
    let mut tail = 0.0;
    for iy in 0..g.ny() {
        for ix in 0..g.nx() {
            let h = hermite_polynomial((order, order), [xs[ix], xs[iy]]).abs();
            let v = h * f.data[[0, iy, ix]].abs() * da;
            total += v;
            if xs[ix].abs() > edge || xs[iy].abs() > edge {
                tail += v;
            }
        }
    }
    if total > 1e-300 && tail / total > tol {
        return Err(Error::TailMass { mass: tail / total, tol });
    }

    let mut proj = Phys2 {
        data: ndarray::Array3::zeros(f.data.dim()),
        domain: Arc::clone(&f.domain),
    };
    for a1 in 0..=order {
        for a2 in 0..=(order - a1) {
            let c = hermite_coeff(f, (a1, a2));
            for iy in 0..g.ny() {
                for ix in 0..g.nx() {
                    proj.data[[0, iy, ix]] += c * phi_alpha((a1, a2), [xs[ix], xs[iy]]);
                }
            }
        }
    }
    let mut comp = Phys2 {
        data: f.data.clone(),
        domain: Arc::clone(&f.domain),
    };
    comp.data -= &proj.data;
    Ok((proj, comp))
}

// ---------------------------------------------------------------------------
// Self-similar variables.
// ---------------------------------------------------------------------------

/// Evaluate a band-limited 2D spectral field at uniformly scaled points:
/// returns `amp * f(scale * xi)` on the target grid. Errors when the scaled
/// points leave the source box.
pub fn scaled_resample(f: &Spec2, scale: f64, amp: f64, target: &Arc<Domain>) -> Result<Phys2> {
    assert_eq!(f.data.dim().0, 1);
    let src = &f.domain.grid;
    let tgt = &target.grid;
    let needed = scale * 0.5 * tgt.spec.l;
    let avail = 0.5 * src.spec.l;
    if needed > avail * (1.0 + 1e-12) {
        return Err(Error::Extrapolation { needed, avail });
    }
    let (ny_s, nx_s) = (src.ny(), src.nx());
    let (ny_t, nx_t) = (tgt.ny(), tgt.nx());
    let xs_t = tgt.xs();
    // Phase matrices e^{i k (scale xi)}.
    let ey = Array2::from_shape_fn((ny_s, ny_t), |(m, j)| {
        C64::from_polar(1.0, src.ky[m] * scale * xs_t[j])
    });
    let ex = Array2::from_shape_fn((nx_s, nx_t), |(m, j)| {
        C64::from_polar(1.0, src.kx[m] * scale * xs_t[j])
    });
    // Contract the y index first: T[m_x][j_y] = sum_my C[m_y][m_x] Ey[m_y][j_y].
    let mut t = Array2::<C64>::default((nx_s, ny_t));
    {
        let tslice = t.as_slice_mut().unwrap();
        exec::for_each_slice_chunk(f.domain.exec, tslice, ny_t, |mx, row| {
            for my in 0..ny_s {
                let c = f.data[[0, my, mx]];
                if c == C64::default() {
                    continue;
                }
                for (jy, v) in row.iter_mut().enumerate() {
                    *v += c * ey[[my, jy]];
                }
            }
        });
    }
    let mut out = Phys2 {
        data: ndarray::Array3::zeros((1, ny_t, nx_t)),
        domain: Arc::clone(target),
    };
    {
        let oslice = out.data.as_slice_mut().unwrap();
        exec::for_each_slice_chunk(f.domain.exec, oslice, nx_t, |jy, row| {
            for mx in 0..nx_s {
                let tv = t[[mx, jy]];
                if tv == C64::default() {
                    continue;
                }
                for (jx, v) in row.iter_mut().enumerate() {
                    *v += (tv * ex[[mx, jx]]).re;
                }
            }
        });
    }
    for v in out.data.iter_mut() {
        *v *= amp;
    }
    Ok(out)
}

/// Barotropic snapshot in laboratory variables.
pub struct BarotropicSnapshot {
    pub omega3: Spec2,
    pub u3: Spec2,
    pub theta: Spec2,
    pub t: f64,
}

/// The same snapshot in self-similar variables on a `xi`-grid.
pub struct ScaledSnapshot {
    pub w3: Phys2,
    pub u3: Phys2,
    pub theta: Phys2,
    pub tau: f64,
}

/// Transform to scaling variables: `xi = x/sqrt(1+t)`, `tau = log(1+t)`,
/// vorticity amplified by `(1+t)`, velocity and temperature by `sqrt(1+t)`.
pub fn to_scaled(snap: &BarotropicSnapshot, xi_domain: &Arc<Domain>) -> Result<ScaledSnapshot> {
    let s2 = 1.0 + snap.t;
    let s = s2.sqrt();
    Ok(ScaledSnapshot {
        w3: scaled_resample(&snap.omega3, s, s2, xi_domain)?,
        u3: scaled_resample(&snap.u3, s, s, xi_domain)?,
        theta: scaled_resample(&snap.theta, s, s, xi_domain)?,
        tau: s2.ln(),
    })
}

/// Invert the scaling transform back onto a laboratory grid.
pub fn from_scaled(scaled: &ScaledSnapshot, x_domain: &Arc<Domain>) -> Result<BarotropicSnapshot> {
    let s2 = scaled.tau.exp();
    let s = s2.sqrt();
    let w3 = crate::field::to_spectral2(&scaled.w3);
    let u3 = crate::field::to_spectral2(&scaled.u3);
    let th = crate::field::to_spectral2(&scaled.theta);
    let back = |f: &Spec2, amp: f64| -> Result<Spec2> {
        let phys = scaled_resample(f, 1.0 / s, amp, x_domain)?;
        Ok(crate::field::to_spectral2(&phys))
    };
    Ok(BarotropicSnapshot {
        omega3: back(&w3, 1.0 / s2)?,
        u3: back(&u3, 1.0 / s)?,
        theta: back(&th, 1.0 / s)?,
        t: s2 - 1.0,
    })
}

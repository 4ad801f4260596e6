//! Acceptance criteria: one runner per criterion, each returning the
//! checks it performed. The `acceptance` integration test target and the
//! CLI `verify` verb both drive these.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::TimeSeries;
use crate::dynamics::{self, Formulation, SimState, Stepper, StepperConfig};
use crate::error::Result;
use crate::exec::Exec;
use crate::experiment::{self, Check};
use crate::field::{to_spectral, to_spectral2, Domain, Phys2, PhysicalField};
use crate::grid::{Bc, GridSpec};
use crate::linops::{self, PhysParams};
use crate::reference;
use crate::C64;

/// Result of one acceptance criterion.
#[derive(Debug, Clone)]
pub struct CriterionResult {
    pub id: usize,
    pub name: String,
    pub checks: Vec<Check>,
}

impl CriterionResult {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn summary(&self) -> String {
        let detail = self
            .checks
            .iter()
            .map(|c| {
                format!(
                    "\n    [{}] {} -- {}",
                    if c.passed { "pass" } else { "FAIL" },
                    c.name,
                    c.detail
                )
            })
            .collect::<String>();
        format!(
            "criterion {:2} [{}] {}{}",
            self.id,
            if self.passed() { "PASS" } else { "FAIL" },
            self.name,
            detail
        )
    }
}

pub const CRITERIA: &[(usize, &str)] = &[
    (1, "eigenstructure suite"),
    (2, "propagator vs dense matrix exponential"),
    (3, "exact vortex tracking and oscillation"),
    (4, "convergence rate toward the Gaussian vortex"),
    (5, "baroclinic decay rates"),
    (6, "moment conservation"),
    (7, "dispersive sweep"),
    (8, "global small-geostrophic regime"),
    (9, "Hermite and scaling suite"),
    (10, "infrastructure"),
];

pub fn run_criterion(id: usize, seed: u64, exec: Exec) -> Result<CriterionResult> {
    let name = CRITERIA
        .iter()
        .find(|(i, _)| *i == id)
        .map(|(_, n)| n.to_string())
        .unwrap_or_else(|| "unknown".into());
    let checks = match id {
        1 => eigenstructure_suite(seed),
        2 => propagator_suite(seed),
        3 => {
            let mut c = experiment::run_experiment("oseen_track", seed, exec)?.checks;
            c.extend(experiment::run_experiment("oscillator", seed, exec)?.checks);
            c
        }
        4 => experiment::run_experiment("perturbed_vortex_rates", seed, exec)?.checks,
        5 => experiment::run_experiment("baroclinic_decay", seed, exec)?.checks,
        6 => moment_conservation(seed, exec)?,
        7 => experiment::run_experiment("dispersive_sweep", seed, exec)?.checks,
        8 => experiment::run_experiment("global_small_qg", seed, exec)?.checks,
        9 => hermite_scaling_suite(exec)?,
        10 => infrastructure_suite(seed, exec)?,
        other => {
            return Err(crate::error::Error::Validation(format!(
                "no acceptance criterion {other}"
            )))
        }
    };
    Ok(CriterionResult { id, name, checks })
}

pub fn run_all(seed: u64, exec: Exec) -> Result<Vec<CriterionResult>> {
    (1..=10).map(|id| run_criterion(id, seed, exec)).collect()
}

// ---------------------------------------------------------------------------
// Criterion 1.
// ---------------------------------------------------------------------------

fn eigenstructure_suite(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(101));
    let mut worst = 0.0f64;
    let trials = 10_000;
    for trial in 0..trials {
        let bc = if trial % 2 == 0 { Bc::Periodic } else { Bc::StressFree };
        let (k1, k2, n, eta) = match trial % 5 {
            // Degenerate lines appear throughout the sweep.
            0 => (0.0, 0.0, rng.gen_range(1..5), rng.gen_range(-4.0..4.0)),
            1 => (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), 0, rng.gen_range(-4.0..4.0)),
            2 => (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0), rng.gen_range(-4..5), 0.0),
            _ => (
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-4.0..4.0),
                rng.gen_range(-4..5),
                rng.gen_range(-4.0..4.0),
            ),
        };
        if k1 == 0.0 && k2 == 0.0 && n == 0 {
            continue;
        }
        let kz = linops::vertical_wavenumber(n, bc);
        let fr = linops::frame_from_wavevector(k1, k2, kz, eta).unwrap();
        let m = linops::pjp_real(k1, k2, kz, eta).unwrap();
        let basis = [fr.a_g, fr.a_0, fr.a_plus, fr.a_minus];
        for (i, a) in basis.iter().enumerate() {
            for (j, b) in basis.iter().enumerate() {
                let dot: C64 = a.iter().zip(b.iter()).map(|(x, y)| x * y.conj()).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - expect).norm());
            }
        }
        for i in 0..4 {
            worst = worst.max((fr.a_minus[i] - fr.a_plus[i].conj()).norm());
        }
        let apply = |v: &[C64; 4]| {
            let mut out = [C64::default(); 4];
            for r in 0..4 {
                for c in 0..4 {
                    out[r] += m[r][c] * v[c];
                }
            }
            out
        };
        let zero = apply(&fr.a_g);
        worst = worst.max(zero.iter().map(|c| c.norm()).fold(0.0, f64::max));
        let plus = apply(&fr.a_plus);
        let minus = apply(&fr.a_minus);
        for i in 0..4 {
            worst = worst.max((plus[i] - C64::new(0.0, fr.p_eta) * fr.a_plus[i]).norm());
            worst = worst.max((minus[i] + C64::new(0.0, fr.p_eta) * fr.a_minus[i]).norm());
        }
    }
    vec![Check::new(
        "orthonormality, conjugacy, and eigen-identities over 1e4 random (k, eta, bc) <= 1e-12",
        worst <= 1e-12,
        format!("max residual {worst:.3e} over {trials} draws"),
    )]
}

// ---------------------------------------------------------------------------
// Criterion 2.
// ---------------------------------------------------------------------------

fn propagator_suite(seed: u64) -> Vec<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(202));
    let mut worst_oracle = 0.0f64;
    let mut worst_group = 0.0f64;
    let mut worst_norm = 0.0f64;
    for trial in 0..2000 {
        let bc = if trial % 2 == 0 { Bc::Periodic } else { Bc::StressFree };
        let params = PhysParams {
            omega: rng.gen_range(-30.0..30.0),
            gamma: rng.gen_range(0.1..10.0) * if trial % 3 == 0 { -1.0 } else { 1.0 },
            nu: rng.gen_range(0.0..2.0),
        };
        let (k1, k2, n) = match trial % 4 {
            0 => (0.0, 0.0, rng.gen_range(1..4)),
            1 => (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), 0),
            2 => (0.0, 0.0, 0),
            _ => (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3..4)),
        };
        let dt = rng.gen_range(0.0..0.25);
        let kz = linops::vertical_wavenumber(n, bc);
        let gen = linops::generator_matrix(k1, k2, kz, &params);
        let mut scaled = gen;
        for row in scaled.iter_mut() {
            for v in row.iter_mut() {
                *v *= dt;
            }
        }
        let oracle = linops::dense_expm(&scaled);
        let fast = linops::linear_propagator(k1, k2, n, &params, dt, bc);
        for r in 0..4 {
            for c in 0..4 {
                worst_oracle = worst_oracle.max((oracle[r][c] - fast[r][c]).norm());
            }
        }
        // Group property and inviscid isometry on a random solenoidal vector.
        let mut v = [C64::default(); 4];
        for x in v.iter_mut() {
            *x = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        }
        let k2n = k1 * k1 + k2 * k2 + kz * kz;
        if k2n > 0.0 {
            let proj = (k1 * v[0] + k2 * v[1] + kz * v[2]) / k2n;
            v[0] -= k1 * proj;
            v[1] -= k2 * proj;
            v[2] -= kz * proj;
        }
        let dt2 = rng.gen_range(0.0..0.25);
        let once = linops::propagate_mode(
            linops::propagate_mode(v, k1, k2, kz, params.omega, params.gamma, params.nu, dt),
            k1,
            k2,
            kz,
            params.omega,
            params.gamma,
            params.nu,
            dt2,
        );
        let both = linops::propagate_mode(
            v,
            k1,
            k2,
            kz,
            params.omega,
            params.gamma,
            params.nu,
            dt + dt2,
        );
        for i in 0..4 {
            worst_group = worst_group.max((once[i] - both[i]).norm());
        }
        let inviscid =
            linops::propagate_mode(v, k1, k2, kz, params.omega, params.gamma, 0.0, dt);
        let n0: f64 = v.iter().map(|c| c.norm_sqr()).sum();
        let n1: f64 = inviscid.iter().map(|c| c.norm_sqr()).sum();
        worst_norm = worst_norm.max((n0.sqrt() - n1.sqrt()).abs());
    }
    vec![
        Check::new(
            "propagator matches dense matrix exponential per mode <= 1e-10",
            worst_oracle <= 1e-10,
            format!("max entry error {worst_oracle:.3e}"),
        ),
        Check::new(
            "group property E(a) E(b) = E(a+b) <= 1e-10",
            worst_group <= 1e-10,
            format!("max error {worst_group:.3e}"),
        ),
        Check::new(
            "inviscid norm conservation <= 1e-10",
            worst_norm <= 1e-10,
            format!("max drift {worst_norm:.3e}"),
        ),
    ]
}

// ---------------------------------------------------------------------------
// Criterion 6.
// ---------------------------------------------------------------------------

fn moment_conservation(seed: u64, exec: Exec) -> Result<Vec<Check>> {
    let domain = Domain::new(GridSpec::new(20.0, 64, 8, Bc::Periodic), exec)?;
    let params = PhysParams { omega: 4.0, gamma: 3.0, nu: 1.0 };
    // Mixed content: barotropic flow, baroclinic band, nonzero means.
    let mut v = crate::scenario::random_baroclinic_band(&domain, seed.wrapping_add(66), 6.3, 9.0, &params)?;
    {
        let l2 = v.l2sq().sqrt();
        assert!(l2 > 0.0, "empty baroclinic band");
        v.scale(0.5 / l2);
    }
    let mut bt = crate::scenario::random_barotropic_band(&domain, seed.wrapping_add(67), 0.3, 3.0)?;
    {
        let l2 = bt.l2sq().sqrt();
        bt.scale(0.5 / l2);
    }
    v.axpy(1.0, &bt);
    let area = 20.0 * 20.0;
    v.data[[2, 0, 0, 0]] = C64::new(0.8 / area, 0.0);
    v.data[[3, 0, 0, 0]] = C64::new(-0.3 / area, 0.0);
    let mut state = SimState {
        v,
        t: 0.0,
        formulation: Formulation::Full,
        background: None,
        params,
    };
    let m0 = state.moments();
    let mut stepper = Stepper::new(&domain, StepperConfig { dt: 0.01, linear_only: false });
    let mut worst_rate = 0.0f64;
    dynamics::run(&mut state, &mut stepper, 2.0, 0.1, |st| {
        if st.t == 0.0 {
            return Ok(());
        }
        let m = st.moments();
        let (b1, b2) = linops::rotate_pair(m.b1, m.b2, -params.gamma * st.t);
        let drift = (b1 - m0.b1).abs().max((b2 - m0.b2).abs()).max(m.a.abs());
        worst_rate = worst_rate.max(drift / st.t);
        Ok(())
    })?;
    Ok(vec![Check::new(
        "vorticity integral and derotated (u3, theta) means conserved to 1e-8 per unit time",
        worst_rate <= 1e-8,
        format!("max drift rate {worst_rate:.3e}"),
    )])
}

// ---------------------------------------------------------------------------
// Criterion 9.
// ---------------------------------------------------------------------------

fn hermite_scaling_suite(exec: Exec) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    let lab = Domain::new(GridSpec::new(40.0, 128, 4, Bc::Periodic), exec)?;
    let g = &lab.grid;
    let xs = g.xs();

    // P0 phi0 = phi0.
    let mut f = Phys2 {
        data: ndarray::Array3::zeros((1, g.ny(), g.nx())),
        domain: Arc::clone(&lab),
    };
    for iy in 0..g.ny() {
        for ix in 0..g.nx() {
            f.data[[0, iy, ix]] = reference::oseen_phi0([xs[ix], xs[iy]]);
        }
    }
    let (proj, _) = reference::hermite_projection(&f, 0)?;
    let p0_err = proj
        .data
        .iter()
        .zip(f.data.iter())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    checks.push(Check::new(
        "P0 phi0 = phi0",
        p0_err <= 1e-8,
        format!("max pointwise error {p0_err:.3e}"),
    ));

    // Biorthogonality over |alpha|, |beta| <= 3.
    let mut worst = 0.0f64;
    for b1 in 0..=3usize {
        for b2 in 0..=3usize {
            for iy in 0..g.ny() {
                for ix in 0..g.nx() {
                    f.data[[0, iy, ix]] = reference::phi_alpha((b1, b2), [xs[ix], xs[iy]]);
                }
            }
            for a1 in 0..=3usize {
                for a2 in 0..=3usize {
                    let c = reference::hermite_coeff(&f, (a1, a2));
                    let expect = if (a1, a2) == (b1, b2) { 1.0 } else { 0.0 };
                    worst = worst.max((c - expect).abs());
                }
            }
        }
    }
    checks.push(Check::new(
        "Hermite biorthogonality <= 1e-8 for |alpha|, |beta| <= 3",
        worst <= 1e-8,
        format!("max residual {worst:.3e}"),
    ));

    // Heat-flow eigen decay: evolving phi_alpha under pure 2D diffusion and
    // rescaling leaves amplitude exp(-|alpha| tau / 2) on the coefficient
    // against H_alpha.
    let mut worst_rel = 0.0f64;
    for &alpha in &[(0usize, 0usize), (1, 0), (0, 1), (1, 1), (2, 0), (0, 2)] {
        for iy in 0..g.ny() {
            for ix in 0..g.nx() {
                f.data[[0, iy, ix]] = reference::phi_alpha(alpha, [xs[ix], xs[iy]]);
            }
        }
        let spec0 = to_spectral2(&f);
        for &tau in &[0.5f64, 1.0, 2.0] {
            let t = tau.exp() - 1.0;
            // Exact heat evolution of the 2D field.
            let mut spec = spec0.clone();
            for ((_, iy, ix), v) in spec.data.indexed_iter_mut() {
                let k2 = g.kx[ix] * g.kx[ix] + g.ky[iy] * g.ky[iy];
                *v *= (-k2 * t).exp();
            }
            let lxi = 40.0 / (1.0 + t).sqrt();
            let xi_dom = Domain::new(GridSpec::new(lxi, 128, 4, Bc::Periodic), exec)?;
            let snap = reference::BarotropicSnapshot {
                omega3: spec,
                u3: crate::field::Spec2::zeros(&lab, 1),
                theta: crate::field::Spec2::zeros(&lab, 1),
                t,
            };
            let scaled = reference::to_scaled(&snap, &xi_dom)?;
            let amp = reference::hermite_coeff(&scaled.w3, alpha);
            let want = (-0.5 * (alpha.0 + alpha.1) as f64 * tau).exp();
            worst_rel = worst_rel.max((amp - want).abs() / want);
        }
    }
    checks.push(Check::new(
        "heat-flow eigenvalue decay exp(-|alpha| tau / 2) within 1% for |alpha| <= 2",
        worst_rel <= 0.01,
        format!("max relative amplitude error {worst_rel:.3e}"),
    ));
    Ok(checks)
}

// ---------------------------------------------------------------------------
// Criterion 10.
// ---------------------------------------------------------------------------

fn infrastructure_suite(seed: u64, exec: Exec) -> Result<Vec<Check>> {
    let mut checks = Vec::new();

    // Transform round trip on dealiased random data.
    {
        let domain = Domain::new(GridSpec::new(17.0, 64, 8, Bc::Periodic), exec)?;
        let g = &domain.grid;
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(7));
        let mut phys = PhysicalField {
            data: ndarray::Array4::zeros((4, g.nz, g.ny(), g.nx())),
            domain: Arc::clone(&domain),
        };
        for v in phys.data.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let mut s = to_spectral(&phys);
        s.dealias();
        let p = crate::field::to_physical(&s);
        let s2 = to_spectral(&p);
        let scale = s.data.iter().map(|c| c.norm()).fold(0.0, f64::max);
        let err = s
            .data
            .iter()
            .zip(s2.data.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
            / scale;
        checks.push(Check::new(
            "transform round trip <= 1e-12 relative",
            err <= 1e-12,
            format!("relative error {err:.3e}"),
        ));
    }

    // Snapshot IO bit-exactness.
    {
        let dir = std::env::temp_dir().join("bvxl_acceptance_snapshot");
        std::fs::create_dir_all(&dir)?;
        let domain = Domain::new(GridSpec::new(11.0, 16, 4, Bc::StressFree), exec)?;
        let params = PhysParams { omega: 2.0, gamma: 4.0, nu: 1.0 };
        let mut v = crate::scenario::random_baroclinic_band(&domain, seed, 3.2, 6.0, &params)?;
        v.parity_project();
        let state = SimState {
            v,
            t: 0.75,
            formulation: Formulation::Full,
            background: None,
            params,
        };
        let path = dir.join("acc.bvxl");
        crate::snapshot::save_snapshot(&state, &path)?;
        let loaded = crate::snapshot::load_snapshot(&path, exec)?;
        let exact = state
            .v
            .data
            .iter()
            .zip(loaded.v.data.iter())
            .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits());
        checks.push(Check::new(
            "snapshot round trip bit-exact",
            exact && loaded.t == state.t,
            format!("t {} -> {}", state.t, loaded.t),
        ));
        std::fs::remove_dir_all(&dir).ok();
    }

    // Run determinism: identical series bytes across repeated runs.
    {
        let run_once = |exec: Exec| -> Result<Vec<u8>> {
            let domain = Domain::new(GridSpec::new(17.0, 32, 4, Bc::Periodic), exec)?;
            let params = PhysParams { omega: 5.0, gamma: 2.0, nu: 1.0 };
            let mut v =
                crate::scenario::random_baroclinic_band(&domain, seed.wrapping_add(3), 6.3, 8.0, &params)?;
            {
                let l2 = v.l2sq().sqrt();
                v.scale(0.4 / l2);
            }
            let mut state = SimState {
                v,
                t: 0.0,
                formulation: Formulation::Full,
                background: None,
                params,
            };
            let mut stepper = Stepper::new(&domain, StepperConfig { dt: 0.01, linear_only: false });
            let mut ts = TimeSeries::new("l2");
            dynamics::run(&mut state, &mut stepper, 0.2, 0.02, |st| {
                ts.push(st.t, st.v.l2sq());
                Ok(())
            })?;
            let mut art = experiment::Artifacts::default();
            art.name = "determinism".into();
            art.series.push(ts);
            let dir = std::env::temp_dir().join(format!(
                "bvxl_det_{}_{:?}",
                std::process::id(),
                std::thread::current().id()
            ));
            experiment::write_artifacts(&art, &dir)?;
            let bytes = std::fs::read(dir.join("series.csv"))?;
            std::fs::remove_dir_all(&dir).ok();
            Ok(bytes)
        };
        let a = run_once(exec)?;
        let b = run_once(exec)?;
        let seq = run_once(Exec::Seq)?;
        checks.push(Check::new(
            "repeated runs emit byte-identical series",
            a == b,
            format!("{} bytes", a.len()),
        ));
        checks.push(Check::new(
            "series bytes independent of thread count",
            a == seq,
            "parallel vs sequential execution",
        ));
    }

    // Temporal order of the stepper.
    {
        let domain = Domain::new(GridSpec::new(2.0 * std::f64::consts::PI, 24, 4, Bc::Periodic), exec)?;
        let params = PhysParams { omega: 1.0, gamma: 1.0, nu: 0.05 };
        let v0 = {
            // Baroclinic modes on the unit layer start at |k| = 2 pi.
            let mut v = crate::scenario::random_baroclinic_band(&domain, seed.wrapping_add(4), 6.3, 9.0, &params)?;
            let mut bt = crate::scenario::random_barotropic_band(&domain, seed.wrapping_add(5), 1.0, 3.0)?;
            let l2 = v.l2sq().sqrt();
            assert!(l2 > 0.0, "empty baroclinic band");
            v.scale(0.3 / l2);
            let l2 = bt.l2sq().sqrt();
            assert!(l2 > 0.0, "empty barotropic band");
            bt.scale(0.3 / l2);
            v.axpy(1.0, &bt);
            v
        };
        let solve = |dt: f64| -> Result<crate::field::SpectralField> {
            let mut state = SimState {
                v: v0.clone(),
                t: 0.0,
                formulation: Formulation::Full,
                background: None,
                params,
            };
            let mut stepper = Stepper::new(&domain, StepperConfig { dt, linear_only: false });
            stepper.arm_guard(&state);
            let steps = (0.4 / dt).round() as usize;
            for _ in 0..steps {
                stepper.step(&mut state)?;
            }
            Ok(state.v)
        };
        let reference = solve(0.0025)?;
        let mut errors = Vec::new();
        for &dt in &[0.04, 0.02, 0.01] {
            let v = solve(dt)?;
            let err: f64 = v
                .data
                .iter()
                .zip(reference.data.iter())
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt();
            errors.push(err);
        }
        let o1 = (errors[0] / errors[1]).log2();
        let o2 = (errors[1] / errors[2]).log2();
        let ok = (o1 - 4.0).abs() <= 0.2 || (o2 - 4.0).abs() <= 0.2;
        checks.push(Check::new(
            "stepper convergence order 4 +/- 0.2",
            ok,
            format!("order estimates {o1:.3}, {o2:.3}"),
        ));
    }
    Ok(checks)
}

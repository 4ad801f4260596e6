//! Scenario configuration: a flat `section.key = value` format, validation,
//! and construction of initial states.

use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{Formulation, SimState};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{Domain, SpectralField, STATE_PARITY};
use crate::grid::{signed_index, storage_index, Bc, GridSpec};
use crate::linops::{self, PhysParams};
use crate::reference::VortexParams;
use crate::C64;

/// Initial-data description.
#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    /// Exact vortex family amplitudes; `a != 0` requires the
    /// background-perturbation formulation.
    Vortex { a: f64, b1: f64, b2: f64 },
    /// Vortex background plus a mean-zero perturbation.
    VortexPlusPerturbation { a: f64, b1: f64, b2: f64, pert: Perturbation },
    /// Random solenoidal band-limited data.
    RandomBaroclinic {
        seed: u64,
        k_min: f64,
        k_max: f64,
        amplitude: f64,
        remove_geostrophic: bool,
        /// Optional barotropic vorticity content with its own amplitude.
        barotropic_amplitude: f64,
    },
    /// A single eigenmode of the skew operator.
    SingleMode { j1: i64, j2: i64, n: i64, branch: Branch, amplitude: f64 },
    FromSnapshot { path: PathBuf },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Branch {
    Geostrophic,
    Plus,
    Minus,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Perturbation {
    /// Shifted-minus-unshifted vortex profile; `amplitude` is the sup-norm
    /// ratio against the background vorticity.
    Dipole { amplitude: f64 },
    /// Mean-zero random barotropic vorticity in a band.
    RandomBarotropic { amplitude: f64, seed: u64, k_min: f64, k_max: f64 },
}

/// Full experiment description.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub grid: GridSpec,
    pub physics: PhysParams,
    pub formulation: Formulation,
    pub init: InitSpec,
    pub t_final: f64,
    pub dt: Option<f64>,
    pub cfl_target: f64,
    pub linear_only: bool,
    /// Series sampling interval.
    pub cadence: f64,
    pub series: Vec<String>,
    pub seed: u64,
    pub out_dir: Option<PathBuf>,
    pub warnings: Vec<String>,
}

impl Scenario {
    /// A blank scenario used by presets.
    pub fn base(name: &str, grid: GridSpec, physics: PhysParams, t_final: f64) -> Scenario {
        let cadence = (t_final / 200.0).max(1e-6);
        Scenario {
            name: name.into(),
            grid,
            physics,
            formulation: Formulation::Full,
            init: InitSpec::Vortex { a: 0.0, b1: 1.0, b2: 0.0 },
            t_final,
            dt: None,
            cfl_target: 0.4,
            linear_only: false,
            cadence,
            series: Vec::new(),
            seed: 0,
            out_dir: None,
            warnings: Vec::new(),
        }
    }

    pub fn validate(&mut self) -> Result<()> {
        self.grid.validate()?;
        if self.physics.gamma == 0.0 {
            return Err(Error::Validation("physics.Gamma must be nonzero".into()));
        }
        if !(self.t_final >= 0.0) {
            return Err(Error::Validation("time.T must be nonnegative".into()));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0) {
                return Err(Error::Validation("time.dt must be positive".into()));
            }
        }
        if !(self.cfl_target > 0.0 && self.cfl_target <= 0.5) {
            return Err(Error::Validation(
                "time.cfl_target must lie in (0, 0.5]".into(),
            ));
        }
        match &self.init {
            InitSpec::Vortex { a, .. } | InitSpec::VortexPlusPerturbation { a, .. } => {
                if *a != 0.0 && self.formulation != Formulation::BackgroundPerturbation {
                    return Err(Error::Validation(
                        "vortex initial data with A != 0 cannot be represented as a full \
                         periodic field (no torus velocity carries net circulation); use \
                         formulation = background_perturbation"
                            .into(),
                    ));
                }
            }
            InitSpec::RandomBaroclinic { k_min, k_max, .. } => {
                if !(k_max > k_min && *k_min >= 0.0) {
                    return Err(Error::Validation("init band requires 0 <= k_min < k_max".into()));
                }
            }
            InitSpec::SingleMode { j1, j2, n, .. } => {
                if *j1 == 0 && *j2 == 0 && *n == 0 {
                    return Err(Error::Validation("single_mode requires a nonzero mode".into()));
                }
            }
            InitSpec::FromSnapshot { .. } => {}
        }
        // Self-similar width must stay far inside the box.
        let need = 8.0 * (1.0 + self.t_final).sqrt();
        if self.grid.l < need {
            self.warnings.push(format!(
                "L = {} is below 8*sqrt(1+T) = {need:.2}: the Gaussian core will feel the \
                 periodic images before t = {}",
                self.grid.l, self.t_final
            ));
        }
        Ok(())
    }

    /// Build the domain and the initial state.
    pub fn build(&self, exec: Exec) -> Result<(Arc<Domain>, SimState)> {
        let domain = Domain::new(self.grid.clone(), exec)?;
        let state = build_initial(self, &domain)?;
        Ok((domain, state))
    }
}

// ---------------------------------------------------------------------------
// Parsing.
// ---------------------------------------------------------------------------

/// Parse the line-based `section.key = value` scenario format. `#` starts a
/// comment; unknown keys are rejected with their line number.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut grid_l = None;
    let mut grid_n = None;
    let mut grid_nv = None;
    let mut bc = Bc::Periodic;
    let mut dealias = (2u32, 3u32);
    let mut omega = 0.0;
    let mut gamma = None;
    let mut nu = 1.0;
    let mut formulation = Formulation::Full;
    let mut t_final = None;
    let mut dt = None;
    let mut cfl = 0.4;
    let mut linear_only = false;
    let mut cadence = None;
    let mut series = Vec::new();
    let mut seed = 0u64;
    let mut out_dir = None;
    let mut name = String::from("custom");
    // init fields
    let mut init_type: Option<String> = None;
    let (mut a, mut b1, mut b2) = (0.0, 0.0, 0.0);
    let mut pert_type: Option<String> = None;
    let mut pert_amplitude = 0.1;
    let mut pert_seed = 1u64;
    let (mut k_min, mut k_max) = (0.0, 8.0);
    let mut amplitude = 1.0;
    let mut remove_geostrophic = false;
    let mut barotropic_amplitude = 0.0;
    let (mut j1, mut j2, mut nmode) = (1i64, 0i64, 1i64);
    let mut branch = Branch::Plus;
    let mut snapshot_path = None;

    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let lineno = lineno + 1;
        let err = |msg: String| Error::Parse { line: lineno, msg };
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
        let key = key.trim();
        let value = value.trim();
        let f = || -> Result<f64> {
            value
                .parse::<f64>()
                .map_err(|_| err(format!("`{key}` expects a number, got `{value}`")))
        };
        let int = || -> Result<i64> {
            value
                .parse::<i64>()
                .map_err(|_| err(format!("`{key}` expects an integer, got `{value}`")))
        };
        let boolean = || -> Result<bool> {
            match value {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                _ => Err(err(format!("`{key}` expects a boolean, got `{value}`"))),
            }
        };
        match key {
            "grid.L" => grid_l = Some(f()?),
            "grid.N" => grid_n = Some(int()? as usize),
            "grid.Nv" => grid_nv = Some(int()? as usize),
            "grid.bc" => {
                bc = match value {
                    "periodic" => Bc::Periodic,
                    "stress-free" | "stress_free" => Bc::StressFree,
                    _ => return Err(err(format!("unknown bc `{value}`"))),
                }
            }
            "grid.dealias" => {
                let (p, q) = value
                    .split_once('/')
                    .ok_or_else(|| err("dealias expects `p/q`".into()))?;
                dealias = (
                    p.trim().parse().map_err(|_| err("bad dealias numerator".into()))?,
                    q.trim().parse().map_err(|_| err("bad dealias denominator".into()))?,
                );
            }
            "physics.Omega" => omega = f()?,
            "physics.Gamma" => gamma = Some(f()?),
            "physics.nu" => nu = f()?,
            "formulation" => {
                formulation = match value {
                    "full" => Formulation::Full,
                    "background_perturbation" => Formulation::BackgroundPerturbation,
                    _ => return Err(err(format!("unknown formulation `{value}`"))),
                }
            }
            "time.T" => t_final = Some(f()?),
            "time.dt" => dt = Some(f()?),
            "time.cfl_target" => cfl = f()?,
            "time.linear_only" => linear_only = boolean()?,
            "output.cadence" => cadence = Some(f()?),
            "output.dir" => out_dir = Some(PathBuf::from(value)),
            "output.series" => {
                series = value.split(',').map(|s| s.trim().to_string()).collect()
            }
            "experiment" => name = value.to_string(),
            "seed" => seed = int()? as u64,
            "init.type" => init_type = Some(value.to_string()),
            "init.A" => a = f()?,
            "init.B1" => b1 = f()?,
            "init.B2" => b2 = f()?,
            "init.pert_type" => pert_type = Some(value.to_string()),
            "init.pert_amplitude" => pert_amplitude = f()?,
            "init.pert_seed" => pert_seed = int()? as u64,
            "init.seed" => pert_seed = int()? as u64,
            "init.k_min" => k_min = f()?,
            "init.k_max" => k_max = f()?,
            "init.amplitude" => amplitude = f()?,
            "init.remove_geostrophic" => remove_geostrophic = boolean()?,
            "init.barotropic_amplitude" => barotropic_amplitude = f()?,
            "init.j1" => j1 = int()?,
            "init.j2" => j2 = int()?,
            "init.n" => nmode = int()?,
            "init.branch" => {
                branch = match value {
                    "g" => Branch::Geostrophic,
                    "+" | "plus" => Branch::Plus,
                    "-" | "minus" => Branch::Minus,
                    _ => return Err(err(format!("unknown branch `{value}`"))),
                }
            }
            "init.snapshot" => snapshot_path = Some(PathBuf::from(value)),
            _ => return Err(err(format!("unknown key `{key}`"))),
        }
    }

    let need = |what: &str, line: &str| Error::Validation(format!("missing `{line}` ({what})"));
    let l = grid_l.ok_or_else(|| need("box size", "grid.L"))?;
    let n = grid_n.ok_or_else(|| need("horizontal points", "grid.N"))?;
    let nv = grid_nv.ok_or_else(|| need("vertical points", "grid.Nv"))?;
    let gamma = gamma.ok_or_else(|| need("buoyancy coupling", "physics.Gamma"))?;
    let t_final = t_final.ok_or_else(|| need("final time", "time.T"))?;

    let init = match init_type.as_deref() {
        None | Some("vortex") => InitSpec::Vortex { a, b1, b2 },
        Some("vortex_plus_perturbation") => {
            let pert = match pert_type.as_deref() {
                None | Some("dipole") => Perturbation::Dipole { amplitude: pert_amplitude },
                Some("random") => Perturbation::RandomBarotropic {
                    amplitude: pert_amplitude,
                    seed: pert_seed,
                    k_min,
                    k_max,
                },
                Some(other) => {
                    return Err(Error::Validation(format!("unknown pert_type `{other}`")))
                }
            };
            InitSpec::VortexPlusPerturbation { a, b1, b2, pert }
        }
        Some("random_baroclinic") => InitSpec::RandomBaroclinic {
            seed: pert_seed,
            k_min,
            k_max,
            amplitude,
            remove_geostrophic,
            barotropic_amplitude,
        },
        Some("single_mode") => InitSpec::SingleMode { j1, j2, n: nmode, branch, amplitude },
        Some("from_snapshot") => InitSpec::FromSnapshot {
            path: snapshot_path
                .ok_or_else(|| Error::Validation("init.snapshot path missing".into()))?,
        },
        Some(other) => return Err(Error::Validation(format!("unknown init.type `{other}`"))),
    };

    let mut spec = GridSpec::new(l, n, nv, bc);
    spec.dealias_fraction = dealias;
    let mut sc = Scenario {
        name,
        grid: spec,
        physics: PhysParams { omega, gamma, nu },
        formulation,
        init,
        t_final,
        dt,
        cfl_target: cfl,
        linear_only,
        cadence: cadence.unwrap_or((t_final / 200.0).max(1e-6)),
        series,
        seed,
        out_dir,
        warnings: Vec::new(),
    };
    sc.validate()?;
    Ok(sc)
}

// ---------------------------------------------------------------------------
// Initial data.
// ---------------------------------------------------------------------------

/// Build the initial state described by the scenario.
pub fn build_initial(sc: &Scenario, domain: &Arc<Domain>) -> Result<SimState> {
    let params = sc.physics;
    let state = match &sc.init {
        InitSpec::Vortex { a, b1, b2 } => {
            let bg = VortexParams::new(*a, *b1, *b2, params.gamma);
            match sc.formulation {
                Formulation::BackgroundPerturbation => SimState {
                    v: SpectralField::state(domain),
                    t: 0.0,
                    formulation: Formulation::BackgroundPerturbation,
                    background: Some(bg),
                    params,
                },
                Formulation::Full => {
                    debug_assert_eq!(*a, 0.0);
                    SimState {
                        v: crate::dynamics::background_state_field(&bg, domain, 0.0),
                        t: 0.0,
                        formulation: Formulation::Full,
                        background: None,
                        params,
                    }
                }
            }
        }
        InitSpec::VortexPlusPerturbation { a, b1, b2, pert } => {
            let bg = VortexParams::new(*a, *b1, *b2, params.gamma);
            let v = perturbation_field(pert, &bg, domain)?;
            SimState {
                v,
                t: 0.0,
                formulation: Formulation::BackgroundPerturbation,
                background: Some(bg),
                params,
            }
        }
        InitSpec::RandomBaroclinic {
            seed,
            k_min,
            k_max,
            amplitude,
            remove_geostrophic,
            barotropic_amplitude,
        } => {
            let mut v = random_baroclinic_band(domain, *seed, *k_min, *k_max, &params)?;
            if *remove_geostrophic {
                v = linops::ageostrophic_part(&v, &params);
            }
            normalize_l2(&mut v, *amplitude);
            if *barotropic_amplitude > 0.0 {
                let mut bt = random_barotropic_band(domain, seed.wrapping_add(1), *k_min, *k_max)?;
                normalize_l2(&mut bt, *barotropic_amplitude);
                v.axpy(1.0, &bt);
            }
            SimState {
                v,
                t: 0.0,
                formulation: Formulation::Full,
                background: None,
                params,
            }
        }
        InitSpec::SingleMode { j1, j2, n, branch, amplitude } => {
            let v = single_mode_field(domain, *j1, *j2, *n, *branch, *amplitude, &params)?;
            SimState {
                v,
                t: 0.0,
                formulation: Formulation::Full,
                background: None,
                params,
            }
        }
        InitSpec::FromSnapshot { path } => crate::snapshot::load_snapshot(path, domain.exec)?,
    };
    Ok(state)
}

fn normalize_l2(v: &mut SpectralField, amplitude: f64) {
    let l2 = v.l2sq().sqrt();
    if l2 > 0.0 {
        v.scale(amplitude / l2);
    }
}

/// Random solenoidal baroclinic data supported on `k_min <= |k| <= k_max`,
/// built from Hermitian-symmetric mode coefficients (deterministic in the
/// seed, independent of threading).
pub fn random_baroclinic_band(
    domain: &Arc<Domain>,
    seed: u64,
    k_min: f64,
    k_max: f64,
    params: &PhysParams,
) -> Result<SpectralField> {
    let _ = params;
    let g = &domain.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = SpectralField::state(domain);
    let (nz, ny, nx) = (g.nz, g.ny(), g.nx());
    for iz in 0..nz {
        for iy in 0..ny {
            for ix in 0..nx {
                let (s1, s2, s3) = (
                    signed_index(ix, nx),
                    signed_index(iy, ny),
                    signed_index(iz, nz),
                );
                // Canonical representative of each Hermitian pair.
                if !canonical(s1, s2, s3) {
                    continue;
                }
                let [kx, ky, kz] = g.wavevector(iz, iy, ix);
                if kz == 0.0 || !g.keep(iz, iy, ix) {
                    continue;
                }
                let kn = (kx * kx + ky * ky + kz * kz).sqrt();
                if kn < k_min || kn > k_max {
                    continue;
                }
                // Random complex amplitudes for all four components; the
                // Helmholtz projection below restores solenoidality.
                let jx = storage_index(-s1, nx);
                let jy = storage_index(-s2, ny);
                let jz = storage_index(-s3, nz);
                for c in 0..4 {
                    let val = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    v.data[[c, iz, iy, ix]] = val;
                    v.data[[c, jz, jy, jx]] = val.conj();
                }
            }
        }
    }
    if g.spec.bc == Bc::StressFree {
        v.parity_project();
    }
    linops::helmholtz_project(&mut v);
    Ok(v)
}

/// Random mean-zero barotropic vorticity band turned into a horizontal
/// velocity field.
pub fn random_barotropic_band(
    domain: &Arc<Domain>,
    seed: u64,
    k_min: f64,
    k_max: f64,
) -> Result<SpectralField> {
    let g = &domain.grid;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut w = crate::field::Spec2::zeros(domain, 1);
    let (ny, nx) = (g.ny(), g.nx());
    for iy in 0..ny {
        for ix in 0..nx {
            let (s1, s2) = (signed_index(ix, nx), signed_index(iy, ny));
            if !canonical(s1, s2, 0) || (s1 == 0 && s2 == 0) {
                continue;
            }
            if !(g.keep_y[iy] && g.keep_x[ix]) {
                continue;
            }
            let kh = (g.kx[ix] * g.kx[ix] + g.ky[iy] * g.ky[iy]).sqrt();
            if kh < k_min.max(1e-12) || kh > k_max {
                continue;
            }
            let val = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let (jx, jy) = (storage_index(-s1, nx), storage_index(-s2, ny));
            w.data[[0, iy, ix]] = val;
            w.data[[0, jy, jx]] = val.conj();
        }
    }
    let uh = crate::biotsavart::velocity2d_from_vorticity(&w)?;
    let mut v = SpectralField::zeros(domain, &STATE_PARITY);
    for iy in 0..ny {
        for ix in 0..nx {
            v.data[[0, 0, iy, ix]] = uh.data[[0, iy, ix]];
            v.data[[1, 0, iy, ix]] = uh.data[[1, iy, ix]];
        }
    }
    Ok(v)
}

fn canonical(s1: i64, s2: i64, s3: i64) -> bool {
    (s3, s2, s1) > (-s3, -s2, -s1)
}

/// Perturbation field for background runs.
fn perturbation_field(
    pert: &Perturbation,
    bg: &VortexParams,
    domain: &Arc<Domain>,
) -> Result<SpectralField> {
    match pert {
        Perturbation::Dipole { amplitude } => {
            // delta omega = A [phi0(x - d e1) - phi0(x)]: a mean-zero dipole;
            // the shift is picked so |pert|_sup / |background omega|_sup is
            // the requested amplitude (|d phi0|_sup / phi0(0) = 0.4289 d).
            let shift = amplitude / 0.4289;
            let g = &domain.grid;
            let xs = g.xs();
            let mut w = crate::field::Phys2 {
                data: ndarray::Array3::zeros((1, g.ny(), g.nx())),
                domain: Arc::clone(domain),
            };
            for iy in 0..g.ny() {
                for ix in 0..g.nx() {
                    let p0 = crate::reference::oseen_phi0([xs[ix] - shift, xs[iy]]);
                    let p1 = crate::reference::oseen_phi0([xs[ix], xs[iy]]);
                    w.data[[0, iy, ix]] = bg.a * (p0 - p1);
                }
            }
            let mut wspec = crate::field::to_spectral2(&w);
            wspec.data[[0, 0, 0]] = C64::default();
            wspec.dealias();
            let uh = crate::biotsavart::velocity2d_from_vorticity(&wspec)?;
            let mut v = SpectralField::state(domain);
            for iy in 0..g.ny() {
                for ix in 0..g.nx() {
                    v.data[[0, 0, iy, ix]] = uh.data[[0, iy, ix]];
                    v.data[[1, 0, iy, ix]] = uh.data[[1, iy, ix]];
                }
            }
            Ok(v)
        }
        Perturbation::RandomBarotropic { amplitude, seed, k_min, k_max } => {
            let mut v = random_barotropic_band(domain, *seed, *k_min, *k_max)?;
            normalize_l2(&mut v, *amplitude);
            Ok(v)
        }
    }
}

/// A single skew-operator eigenmode with its Hermitian partner.
pub fn single_mode_field(
    domain: &Arc<Domain>,
    j1: i64,
    j2: i64,
    n: i64,
    branch: Branch,
    amplitude: f64,
    params: &PhysParams,
) -> Result<SpectralField> {
    let g = &domain.grid;
    let (nz, ny, nx) = (g.nz, g.ny(), g.nx());
    let n_store = match g.spec.bc {
        Bc::Periodic => n,
        Bc::StressFree => n, // doubled grid already uses pi*n indices
    };
    let ix = storage_index(j1, nx);
    let iy = storage_index(j2, ny);
    let iz = storage_index(n_store, nz);
    let [kx, ky, kz] = g.wavevector(iz, iy, ix);
    let fr = crate::linops::frame_from_wavevector(kx, ky, kz, params.eta())?;
    let vec = match branch {
        Branch::Geostrophic => fr.a_g,
        Branch::Plus => fr.a_plus,
        Branch::Minus => fr.a_minus,
    };
    let mut v = SpectralField::state(domain);
    let jx = storage_index(-j1, nx);
    let jy = storage_index(-j2, ny);
    let jz = storage_index(-n_store, nz);
    for c in 0..4 {
        v.data[[c, iz, iy, ix]] = amplitude * vec[c];
        v.data[[c, jz, jy, jx]] = (amplitude * vec[c]).conj();
    }
    if g.spec.bc == Bc::StressFree {
        v.parity_project();
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
grid.L = 40\n\
grid.N = 64\n\
grid.Nv = 4\n\
physics.Gamma = 5\n\
time.T = 2\n";

    #[test]
    fn minimal_scenario_gets_defaults() {
        let sc = parse_scenario(MINIMAL).unwrap();
        assert_eq!(sc.physics.nu, 1.0);
        assert_eq!(sc.grid.dealias_fraction, (2, 3));
        assert!((sc.cadence - 0.01).abs() < 1e-12);
        assert_eq!(sc.formulation, Formulation::Full);
        assert!(matches!(sc.init, InitSpec::Vortex { a, .. } if a == 0.0));
    }

    #[test]
    fn odd_n_is_rejected_with_reason() {
        let text = MINIMAL.replace("grid.N = 64", "grid.N = 7");
        let err = parse_scenario(&text).unwrap_err();
        let msg = format!("{err}");
        assert!(msg.contains("even"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected_with_line() {
        let text = format!("{MINIMAL}grid.bogus = 3\n");
        match parse_scenario(&text) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 6);
                assert!(msg.contains("bogus"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn torus_obstruction_is_enforced() {
        let text = format!("{MINIMAL}init.type = vortex\ninit.A = 1\nformulation = full\n");
        let err = parse_scenario(&text).unwrap_err();
        assert!(format!("{err}").contains("circulation"));
        let ok = format!(
            "{MINIMAL}init.type = vortex\ninit.A = 1\nformulation = background_perturbation\n"
        );
        assert!(parse_scenario(&ok).is_ok());
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let text = format!("# header\n\n{MINIMAL}  # tail comment on its own\n");
        assert!(parse_scenario(&text).is_ok());
    }

    #[test]
    fn small_box_warns() {
        let mut sc = parse_scenario(MINIMAL).unwrap();
        assert!(sc.warnings.is_empty());
        sc.t_final = 100.0;
        sc.warnings.clear();
        sc.validate().unwrap();
        assert_eq!(sc.warnings.len(), 1);
    }

    #[test]
    fn random_band_data_is_solenoidal_and_band_limited() {
        let sc = parse_scenario(&format!(
            "{MINIMAL}init.type = random_baroclinic\ninit.k_min = 6.5\ninit.k_max = 9\n\
             init.amplitude = 2\ninit.seed = 3\n"
        ))
        .unwrap();
        let (domain, state) = sc.build(Exec::Seq).unwrap();
        assert!((state.v.l2sq().sqrt() - 2.0).abs() < 1e-12);
        assert!(state.v.divergence_residual() < 1e-12);
        assert!(state.v.hermitian_residual() < 1e-12);
        let g = &domain.grid;
        for iz in 0..g.nz {
            for iy in 0..g.ny() {
                for ix in 0..g.nx() {
                    let [kx, ky, kz] = g.wavevector(iz, iy, ix);
                    let kn = (kx * kx + ky * ky + kz * kz).sqrt();
                    if kn < 6.5 || kn > 9.0 || kz == 0.0 {
                        for c in 0..4 {
                            assert!(state.v.data[[c, iz, iy, ix]].norm() == 0.0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn geostrophic_removal_leaves_tiny_s_component() {
        let sc = parse_scenario(&format!(
            "{MINIMAL}physics.Omega = 300\ninit.type = random_baroclinic\ninit.k_min = 6.4\n\
             init.k_max = 8\ninit.remove_geostrophic = true\n"
        ))
        .unwrap();
        let (_, state) = sc.build(Exec::Seq).unwrap();
        let (s, ns) = crate::diagnostics::geostrophic_norms(&state.v, &state.params);
        assert!(s < 1e-10 * ns.max(1e-300), "S part {s} vs {ns}");
    }

    #[test]
    fn single_mode_state_is_eigenmode() {
        let sc = parse_scenario(&format!(
            "{MINIMAL}physics.Omega = 10\ninit.type = single_mode\ninit.j1 = 2\ninit.j2 = -1\n\
             init.n = 1\ninit.branch = plus\ninit.amplitude = 0.5\n"
        ))
        .unwrap();
        let (_, state) = sc.build(Exec::Seq).unwrap();
        assert!(state.v.divergence_residual() < 1e-12);
        assert!(state.v.hermitian_residual() < 1e-12);
        let (s, ns) = crate::diagnostics::geostrophic_norms(&state.v, &state.params);
        assert!(s < 1e-12 * ns.max(1e-300));
        assert!((state.v.l2sq().sqrt() - 0.5 * 40.0 * 2f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn dipole_perturbation_is_mean_zero_with_requested_size() {
        let sc = parse_scenario(&format!(
            "{MINIMAL}formulation = background_perturbation\n\
             init.type = vortex_plus_perturbation\ninit.A = 2\ninit.pert_amplitude = 0.1\n"
        ))
        .unwrap();
        let (domain, state) = sc.build(Exec::Seq).unwrap();
        let m = crate::field::moments(&state.v);
        assert!(m.a.abs() < 1e-10 && m.b1.abs() < 1e-12 && m.b2.abs() < 1e-12);
        // Sup ratio close to 10%.
        let w = crate::diagnostics::barotropic_vorticity(&state.v);
        let wp = crate::field::to_physical2(&w);
        let sup = wp.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bg_sup = 2.0 * crate::reference::oseen_phi0([0.0, 0.0]);
        assert!((sup / bg_sup - 0.1).abs() < 0.02, "ratio {}", sup / bg_sup);
        let _ = domain;
    }
}

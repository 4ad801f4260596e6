//! Binary snapshot files.
//!
//! Layout (little-endian):
//! header: magic `BVXL`, format version u32, grid (L f64, N u32, Nv u32,
//! bc u8, dealias num/den u32), physics (Omega, Gamma, nu f64), time f64,
//! frame tag u8, formulation u8, background flag u8 + (A, B1, B2, Gamma)
//! f64. Payload: complex coefficients as two f64 per entry,
//! component-major, then n ascending, then k2, then k1 innermost;
//! `4 * N * N * Nv` entries. Periodic grids store signed vertical indices
//! `-Nv/2 .. Nv/2-1`; stress-free grids store the nonnegative half
//! `0 .. Nv-1` of the doubled representation (the negative half is the
//! parity reflection).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dynamics::{Formulation, SimState};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::field::{Domain, FrameTag, SpectralField};
use crate::grid::{storage_index, Bc, GridSpec};
use crate::linops::PhysParams;
use crate::reference::VortexParams;
use crate::C64;

const MAGIC: &[u8; 4] = b"BVXL";
pub const FORMAT_VERSION: u32 = 1;

pub fn save_snapshot(state: &SimState, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let g = &state.v.domain.grid;
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    w.write_all(&g.spec.l.to_le_bytes())?;
    w.write_all(&(g.spec.n as u32).to_le_bytes())?;
    w.write_all(&(g.spec.nv as u32).to_le_bytes())?;
    w.write_all(&[match g.spec.bc {
        Bc::Periodic => 0u8,
        Bc::StressFree => 1u8,
    }])?;
    w.write_all(&g.spec.dealias_fraction.0.to_le_bytes())?;
    w.write_all(&g.spec.dealias_fraction.1.to_le_bytes())?;
    w.write_all(&state.params.omega.to_le_bytes())?;
    w.write_all(&state.params.gamma.to_le_bytes())?;
    w.write_all(&state.params.nu.to_le_bytes())?;
    w.write_all(&state.t.to_le_bytes())?;
    w.write_all(&[match state.v.frame {
        FrameTag::Stationary => 0u8,
        FrameTag::Rotating => 1u8,
    }])?;
    w.write_all(&[match state.formulation {
        Formulation::Full => 0u8,
        Formulation::BackgroundPerturbation => 1u8,
    }])?;
    match &state.background {
        Some(bg) => {
            w.write_all(&[1u8])?;
            for v in [bg.a, bg.b1, bg.b2, bg.gamma] {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        None => {
            w.write_all(&[0u8])?;
            for _ in 0..4 {
                w.write_all(&0f64.to_le_bytes())?;
            }
        }
    }
    // Payload.
    let n = g.spec.n;
    let nv = g.spec.nv;
    for c in 0..4 {
        for sn in vertical_order(&g.spec) {
            let iz = storage_index(sn, g.nz);
            for s2 in signed_range(n) {
                let iy = storage_index(s2, n);
                for s1 in signed_range(n) {
                    let ix = storage_index(s1, n);
                    let v = state.v.data[[c, iz, iy, ix]];
                    w.write_all(&v.re.to_le_bytes())?;
                    w.write_all(&v.im.to_le_bytes())?;
                }
            }
        }
    }
    let _ = nv;
    w.flush()?;
    Ok(())
}

fn signed_range(n: usize) -> impl Iterator<Item = i64> {
    let half = n as i64 / 2;
    -half..half
}

/// Stored vertical indices: signed for periodic, nonnegative half for
/// stress-free (doubled grid).
fn vertical_order(spec: &GridSpec) -> Vec<i64> {
    match spec.bc {
        Bc::Periodic => signed_range(spec.nv).collect(),
        Bc::StressFree => (0..spec.nv as i64).collect(),
    }
}

pub fn load_snapshot(path: &Path, exec: Exec) -> Result<SimState> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)
        .map_err(|_| Error::CorruptFile("missing magic".into()))?;
    if &magic != MAGIC {
        return Err(Error::CorruptFile(format!("bad magic {magic:?}")));
    }
    let version = read_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch { found: version, expected: FORMAT_VERSION });
    }
    let l = read_f64(&mut r)?;
    let n = read_u32(&mut r)? as usize;
    let nv = read_u32(&mut r)? as usize;
    let bc = match read_u8(&mut r)? {
        0 => Bc::Periodic,
        1 => Bc::StressFree,
        b => return Err(Error::CorruptFile(format!("bad bc byte {b}"))),
    };
    let dp = read_u32(&mut r)?;
    let dq = read_u32(&mut r)?;
    let omega = read_f64(&mut r)?;
    let gamma = read_f64(&mut r)?;
    let nu = read_f64(&mut r)?;
    let t = read_f64(&mut r)?;
    let frame = match read_u8(&mut r)? {
        0 => FrameTag::Stationary,
        1 => FrameTag::Rotating,
        b => return Err(Error::CorruptFile(format!("bad frame byte {b}"))),
    };
    let formulation = match read_u8(&mut r)? {
        0 => Formulation::Full,
        1 => Formulation::BackgroundPerturbation,
        b => return Err(Error::CorruptFile(format!("bad formulation byte {b}"))),
    };
    let has_bg = read_u8(&mut r)? != 0;
    let mut bgv = [0f64; 4];
    for v in bgv.iter_mut() {
        *v = read_f64(&mut r)?;
    }
    let background = has_bg.then(|| VortexParams::new(bgv[0], bgv[1], bgv[2], bgv[3]));

    let mut spec = GridSpec::new(l, n, nv, bc);
    spec.dealias_fraction = (dp, dq);
    let domain = Domain::new(spec, exec)?;
    let mut v = SpectralField::state(&domain);
    let g = &domain.grid;
    for c in 0..4 {
        for sn in vertical_order(&g.spec) {
            let iz = storage_index(sn, g.nz);
            for s2 in signed_range(n) {
                let iy = storage_index(s2, n);
                for s1 in signed_range(n) {
                    let ix = storage_index(s1, n);
                    let re = read_f64(&mut r).map_err(|_| {
                        Error::CorruptFile("truncated payload".into())
                    })?;
                    let im = read_f64(&mut r).map_err(|_| {
                        Error::CorruptFile("truncated payload".into())
                    })?;
                    v.data[[c, iz, iy, ix]] = C64::new(re, im);
                }
            }
        }
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(Error::CorruptFile("trailing bytes after payload".into()));
    }
    v.frame = frame;
    if bc == Bc::StressFree {
        // Restore the negative-index half from parity.
        v.parity_project_from_half();
    }
    Ok(SimState {
        v,
        t,
        formulation,
        background,
        params: PhysParams { omega, gamma, nu },
    })
}

fn read_u8(r: &mut impl Read) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b).map_err(|_| Error::CorruptFile("truncated header".into()))?;
    Ok(b[0])
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|_| Error::CorruptFile("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|_| Error::CorruptFile("truncated data".into()))?;
    Ok(f64::from_le_bytes(b))
}

impl SpectralField {
    /// Fill the negative vertical half from the stored nonnegative half
    /// using the component parity (exact sign flips; bit-reproducible).
    pub fn parity_project_from_half(&mut self) {
        let (nc, nz, ny, nx) = self.data.dim();
        for c in 0..nc {
            let sign = match self.parity[c] {
                crate::field::Parity::Even => 1.0,
                crate::field::Parity::Odd => -1.0,
            };
            for iz in 1..nz / 2 {
                let jz = nz - iz;
                for iy in 0..ny {
                    for ix in 0..nx {
                        self.data[[c, jz, iy, ix]] = sign * self.data[[c, iz, iy, ix]];
                    }
                }
            }
            // Self-paired planes: zero odd components.
            if sign < 0.0 {
                for iy in 0..ny {
                    for ix in 0..nx {
                        self.data[[c, 0, iy, ix]] = C64::default();
                        self.data[[c, nz / 2, iy, ix]] = C64::default();
                    }
                }
            }
        }
    }
}

//! Artifact formats: CSV emitters with fixed float formatting (so identical
//! runs produce byte-identical files) and the compact binary path snapshot.

use crate::error::{Error, Result};
use crate::grid::GridSpec;
use crate::meanfield::{DensityPath, RemovalRatePath};
use crate::particle::{ParticleConfiguration, RemovalLedger};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::sync::Arc;

/// 17 significant digits: enough to round-trip any f64, and fixed so output
/// bytes are reproducible.
pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<P: AsRef<Path>>(
    path: P,
    header: &[&str],
    rows: impl IntoIterator<Item = Vec<String>>,
) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{}", header.join(","))?;
    for row in rows {
        writeln!(out, "{}", row.join(","))?;
    }
    out.flush()?;
    Ok(())
}

fn coord_headers(prefix: &str, d: usize) -> Vec<String> {
    (1..=d).map(|j| format!("{prefix}{j}")).collect()
}

/// Snapshots as `t, x_1..x_d, count` (occupied sites only).
pub fn write_snapshots_csv<P: AsRef<Path>>(
    path: P,
    snapshots: &[(f64, ParticleConfiguration)],
) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    let d = snapshots
        .first()
        .map(|(_, c)| c.grid().dim())
        .ok_or_else(|| Error::InvalidParameter("no snapshots to write".into()))?;
    writeln!(out, "t,{},count", coord_headers("x_", d).join(","))?;
    for (t, cfg) in snapshots {
        let g = cfg.grid();
        for site in g.sites() {
            let c = cfg.count(site);
            if c == 0 {
                continue;
            }
            let pos: Vec<String> = g.position(site).iter().map(|&v| format_float(v)).collect();
            writeln!(out, "{},{},{}", format_float(*t), pos.join(","), c)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Removal ledger as `x_1..x_d, t_start, t_end`.
pub fn write_ledger_csv<P: AsRef<Path>>(
    path: P,
    grid: &Arc<GridSpec>,
    ledger: &RemovalLedger,
) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{},t_start,t_end", coord_headers("x_", grid.dim()).join(","))?;
    for iv in &ledger.intervals {
        let pos: Vec<String> = grid.position(iv.site).iter().map(|&v| format_float(v)).collect();
        writeln!(out, "{},{},{}", pos.join(","), format_float(iv.t_start), format_float(iv.t_end))?;
    }
    out.flush()?;
    Ok(())
}

/// Density path as `t, x_1..x_d, u, lambda` (one row per recorded frame and
/// site; the final frame carries lambda = 0).
pub fn write_density_path_csv<P: AsRef<Path>>(
    path: P,
    density: &DensityPath,
    removal: &RemovalRatePath,
) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    let g = density.grid().clone();
    writeln!(out, "t,{},u,lambda", coord_headers("x_", g.dim()).join(","))?;
    for k in 0..density.num_frames() {
        let t = density.times()[k];
        let u = density.frame(k);
        for site in g.sites() {
            let lam = if k < removal.num_frames() { removal.frame(k)[site] } else { 0.0 };
            let pos: Vec<String> = g.position(site).iter().map(|&v| format_float(v)).collect();
            writeln!(
                out,
                "{},{},{},{}",
                format_float(t),
                pos.join(","),
                format_float(u[site]),
                format_float(lam)
            )?;
        }
    }
    out.flush()?;
    Ok(())
}

const MAGIC: &[u8; 4] = b"TBRW";
const VERSION: u32 = 1;

/// Compact binary path snapshot.
///
/// Layout (little endian):
/// `magic "TBRW" | version u32 | d u32 | eps f64 | L f64 | K u64 |`
/// `times f64*K | u frames f64*K*S | lambda frames f64*(K-1)*S`
/// with `S = (2L/eps + 1)^d` sites in linear order.
pub fn write_binary_path<P: AsRef<Path>>(
    path: P,
    density: &DensityPath,
    removal: &RemovalRatePath,
) -> Result<()> {
    let g = density.grid().clone();
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&(g.dim() as u32).to_le_bytes())?;
    out.write_all(&g.epsilon().to_le_bytes())?;
    out.write_all(&g.half_width().to_le_bytes())?;
    out.write_all(&(density.num_frames() as u64).to_le_bytes())?;
    for &t in density.times() {
        out.write_all(&t.to_le_bytes())?;
    }
    for k in 0..density.num_frames() {
        for &v in density.frame(k) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    for k in 0..removal.num_frames() {
        for &v in removal.frame(k) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub struct BinaryPath {
    pub grid: Arc<GridSpec>,
    pub times: Vec<f64>,
    pub u_frames: Vec<Vec<f64>>,
    pub lambda_frames: Vec<Vec<f64>>,
}

pub fn read_binary_path<P: AsRef<Path>>(path: P) -> Result<BinaryPath> {
    let mut input = BufReader::new(std::fs::File::open(path)?);
    let mut magic = [0u8; 4];
    input.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Parse("bad magic".into()));
    }
    let version = read_u32(&mut input)?;
    if version != VERSION {
        return Err(Error::Parse(format!("unsupported version {version}")));
    }
    let d = read_u32(&mut input)? as usize;
    let eps = read_f64(&mut input)?;
    let l = read_f64(&mut input)?;
    let k = read_u64(&mut input)? as usize;
    let grid = GridSpec::new(eps, d, l)?;
    let s = grid.num_sites();
    let mut times = Vec::with_capacity(k);
    for _ in 0..k {
        times.push(read_f64(&mut input)?);
    }
    let mut u_frames = Vec::with_capacity(k);
    for _ in 0..k {
        let mut frame = Vec::with_capacity(s);
        for _ in 0..s {
            frame.push(read_f64(&mut input)?);
        }
        u_frames.push(frame);
    }
    let mut lambda_frames = Vec::with_capacity(k.saturating_sub(1));
    for _ in 0..k.saturating_sub(1) {
        let mut frame = Vec::with_capacity(s);
        for _ in 0..s {
            frame.push(read_f64(&mut input)?);
        }
        lambda_frames.push(frame);
    }
    Ok(BinaryPath { grid, times, u_frames, lambda_frames })
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

/// Coupled-walker path as `t, x_1.., y_1.., shared`.
pub fn write_coupled_path_csv<P: AsRef<Path>>(
    path: P,
    grid: &Arc<GridSpec>,
    cpath: &crate::coupling::CoupledPairPath,
) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    let d = grid.dim();
    writeln!(
        out,
        "t,{},{},shared",
        coord_headers("x_", d).join(","),
        coord_headers("y_", d).join(",")
    )?;
    for k in 0..cpath.times.len() {
        let px: Vec<String> =
            grid.position(cpath.x_path[k] as usize).iter().map(|&v| format_float(v)).collect();
        let py: Vec<String> =
            grid.position(cpath.y_path[k] as usize).iter().map(|&v| format_float(v)).collect();
        writeln!(
            out,
            "{},{},{},{}",
            format_float(cpath.times[k]),
            px.join(","),
            py.join(","),
            u8::from(cpath.shared[k])
        )?;
    }
    out.flush()?;
    Ok(())
}

/// Closed-form solution sampled on a grid as `x_1, u`.
pub fn write_closed_form_csv<P: AsRef<Path>>(
    path: P,
    sol: &crate::stationary::ClosedFormSolution,
    grid: &Arc<GridSpec>,
) -> Result<()> {
    if grid.dim() != 1 {
        return Err(Error::DimensionMismatch(grid.dim(), 1));
    }
    let rows = grid.sites().map(|s| {
        let x = grid.position(s)[0];
        vec![format_float(x), format_float(sol.u(x))]
    });
    write_csv(path, &["x_1", "u"], rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::{build_q_from_b, DriftModel, MollifierSpec};
    use crate::gridfn::GridFunction;
    use crate::meanfield::{solve, Scheme, SchemeConfig};

    #[test]
    fn float_format_is_17_digits_and_roundtrips() {
        let vs = [0.1, -3.25e-17, 1.0 / 3.0, 2.718281828459045e8];
        for v in vs {
            let s = format_float(v);
            let back: f64 = s.parse().unwrap();
            assert_eq!(back, v, "{s}");
        }
        assert_eq!(format_float(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn binary_path_roundtrip() {
        let g = GridSpec::new(0.25, 1, 1.0).unwrap();
        let rt =
            Arc::new(build_q_from_b(&DriftModel::Zero, &MollifierSpec::default(), &g).unwrap());
        let raw = GridFunction::from_fn(g.clone(), |x| (-(x[0] * x[0])).exp());
        let total = raw.norm_l1();
        let u0 =
            GridFunction::new(g.clone(), raw.values().iter().map(|v| v / total).collect()).unwrap();
        let cfg = SchemeConfig::new(1e-3, Scheme::TrimSplitting, 0.25);
        let (path, ledger, _) = solve(&rt, &u0, 0.01, &cfg, 2).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("path.bin");
        write_binary_path(&file, &path, &ledger).unwrap();
        let back = read_binary_path(&file).unwrap();
        assert_eq!(back.times, path.times());
        assert_eq!(back.u_frames.len(), path.num_frames());
        for k in 0..path.num_frames() {
            assert_eq!(back.u_frames[k], path.frame(k));
        }
        for k in 0..ledger.num_frames() {
            assert_eq!(back.lambda_frames[k], ledger.frame(k));
        }
    }
}

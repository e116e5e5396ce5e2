//! Plain-text artifacts: CSV tables and JSON sidecars.
//!
//! Floats are written with Rust's shortest round-trip formatting, so files
//! are bit-stable across reruns and parse back to identical values. The
//! slope column may contain inf/-inf at cusp samples; JSON sidecars stay
//! finite (unbounded quantities are simply absent).

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write as _};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{ChError, Result};
use crate::lagrangian::{LagDomain, Labeling, LagrangianState};
use crate::profiles::{ProfileTable, TravelingWaveParams};

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| ChError::Format(e.to_string()))?;
    w.write_all(b"\n")?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_reader(BufReader::new(File::open(path)?))
        .map_err(|e| ChError::Format(e.to_string()))
}

fn parse_f64(tok: &str, path: &Path, line: usize) -> Result<f64> {
    tok.trim().parse().map_err(|_| {
        ChError::Format(format!(
            "{}:{line}: bad float '{tok}'",
            path.display()
        ))
    })
}

/// Companion metadata written next to a profile CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileSidecar {
    pub params: TravelingWaveParams,
    pub center: f64,
    /// Half the spatial period; absent for decay profiles.
    pub half_period: Option<f64>,
}

/// Writes x,u,ux,singular rows, with an extra P column when given.
pub fn write_profile_csv(path: &Path, table: &ProfileTable, p: Option<&[f64]>) -> Result<()> {
    if let Some(p) = p {
        if p.len() != table.xs.len() {
            return Err(ChError::DomainMismatch(
                "pressure column length differs from the grid".into(),
            ));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    match p {
        Some(_) => writeln!(w, "x,u,ux,singular,P")?,
        None => writeln!(w, "x,u,ux,singular")?,
    }
    for i in 0..table.xs.len() {
        write!(
            w,
            "{},{},{},{}",
            table.xs[i], table.vals[i], table.derivs[i], table.singular[i]
        )?;
        if let Some(p) = p {
            write!(w, ",{}", p[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// A profile CSV read back into columns.
#[derive(Debug, Clone)]
pub struct ProfileCsv {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub ux: Vec<f64>,
    pub singular: Vec<bool>,
    pub p: Option<Vec<f64>>,
}

pub fn read_profile_csv(path: &Path) -> Result<ProfileCsv> {
    let f = BufReader::new(File::open(path)?);
    let mut lines = f.lines();
    let header = lines
        .next()
        .ok_or_else(|| ChError::Format(format!("{}: empty file", path.display())))??;
    let has_p = match header.trim() {
        "x,u,ux,singular" => false,
        "x,u,ux,singular,P" => true,
        other => {
            return Err(ChError::Format(format!(
                "{}: unexpected header '{other}'",
                path.display()
            )))
        }
    };
    let mut out = ProfileCsv {
        x: Vec::new(),
        u: Vec::new(),
        ux: Vec::new(),
        singular: Vec::new(),
        p: if has_p { Some(Vec::new()) } else { None },
    };
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let want = if has_p { 5 } else { 4 };
        if cols.len() != want {
            return Err(ChError::Format(format!(
                "{}:{}: expected {want} columns",
                path.display(),
                k + 2
            )));
        }
        out.x.push(parse_f64(cols[0], path, k + 2)?);
        out.u.push(parse_f64(cols[1], path, k + 2)?);
        out.ux.push(parse_f64(cols[2], path, k + 2)?);
        out.singular.push(cols[3].trim().parse().map_err(|_| {
            ChError::Format(format!("{}:{}: bad bool '{}'", path.display(), k + 2, cols[3]))
        })?);
        if let Some(p) = out.p.as_mut() {
            p.push(parse_f64(cols[4], path, k + 2)?);
        }
    }
    Ok(out)
}

/// Companion metadata written next to a label CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabelsSidecar {
    pub domain: LagDomain,
    pub labeling: Labeling,
    pub r: f64,
    pub t: f64,
}

/// Writes xi,y,U,H rows plus optional P,Q columns.
pub fn write_labels_csv(
    path: &Path,
    ls: &LagrangianState,
    pq: Option<(&[f64], &[f64])>,
) -> Result<()> {
    if let Some((p, q)) = pq {
        if p.len() != ls.n() || q.len() != ls.n() {
            return Err(ChError::DomainMismatch(
                "P/Q column length differs from the label grid".into(),
            ));
        }
    }
    let mut w = BufWriter::new(File::create(path)?);
    match pq {
        Some(_) => writeln!(w, "xi,y,U,H,P,Q")?,
        None => writeln!(w, "xi,y,U,H")?,
    }
    for i in 0..ls.n() {
        write!(w, "{},{},{},{}", ls.xis[i], ls.y[i], ls.u[i], ls.h[i])?;
        if let Some((p, q)) = pq {
            write!(w, ",{},{}", p[i], q[i])?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Reads a label CSV plus its sidecar back into a state.
pub fn read_labels(csv_path: &Path, sidecar_path: &Path) -> Result<LagrangianState> {
    let sidecar: LabelsSidecar = read_json(sidecar_path)?;
    let f = BufReader::new(File::open(csv_path)?);
    let mut lines = f.lines();
    let header = lines
        .next()
        .ok_or_else(|| ChError::Format(format!("{}: empty file", csv_path.display())))??;
    let cols_expected = match header.trim() {
        "xi,y,U,H" => 4,
        "xi,y,U,H,P,Q" => 6,
        other => {
            return Err(ChError::Format(format!(
                "{}: unexpected header '{other}'",
                csv_path.display()
            )))
        }
    };
    let mut xis = Vec::new();
    let mut y = Vec::new();
    let mut u = Vec::new();
    let mut h = Vec::new();
    for (k, line) in lines.enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != cols_expected {
            return Err(ChError::Format(format!(
                "{}:{}: expected {cols_expected} columns",
                csv_path.display(),
                k + 2
            )));
        }
        xis.push(parse_f64(cols[0], csv_path, k + 2)?);
        y.push(parse_f64(cols[1], csv_path, k + 2)?);
        u.push(parse_f64(cols[2], csv_path, k + 2)?);
        h.push(parse_f64(cols[3], csv_path, k + 2)?);
    }
    if xis.len() < 2 {
        return Err(ChError::Format(format!(
            "{}: no data rows",
            csv_path.display()
        )));
    }
    Ok(LagrangianState {
        xis,
        y,
        u,
        h,
        r: sidecar.r,
        t: sidecar.t,
        domain: sidecar.domain,
        labeling: sidecar.labeling,
    })
}

/// Writes the t,E energy history.
pub fn write_energy_csv(path: &Path, times: &[f64], energies: &[f64]) -> Result<()> {
    if times.len() != energies.len() {
        return Err(ChError::DomainMismatch(
            "time and energy columns differ in length".into(),
        ));
    }
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "t,E")?;
    for i in 0..times.len() {
        writeln!(w, "{},{}", times[i], energies[i])?;
    }
    Ok(())
}

//! Field snapshots: a one-line ASCII header `QFLOW1 <nx> <ny> <d> <kind>`
//! followed by little-endian f64 blocks, one per component, row-major
//! (`j * nx + i`). CSV export is provided for plotting.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{GridSpec, QField, VelocityField};
use crate::tensor::Dim;

const MAGIC: &str = "QFLOW1";

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnapshotKind {
    Q,
    Velocity,
    Scalar,
}

impl SnapshotKind {
    fn tag(self) -> &'static str {
        match self {
            SnapshotKind::Q => "q",
            SnapshotKind::Velocity => "u",
            SnapshotKind::Scalar => "p",
        }
    }

    fn parse(s: &str) -> Result<Self> {
        match s {
            "q" => Ok(SnapshotKind::Q),
            "u" => Ok(SnapshotKind::Velocity),
            "p" => Ok(SnapshotKind::Scalar),
            other => Err(Error::Snapshot(format!("unknown kind {other:?}"))),
        }
    }

    fn ncomp(self, d: usize) -> Result<usize> {
        match self {
            SnapshotKind::Q => Ok(Dim::from_usize(d)?.ncomp()),
            SnapshotKind::Velocity => Ok(2),
            SnapshotKind::Scalar => Ok(1),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    /// Tensor dimension for `Q`; 2 for velocity, 1 for scalars.
    pub d: usize,
    pub kind: SnapshotKind,
    pub comps: Vec<Vec<f64>>,
}

impl Snapshot {
    pub fn from_q(q: &QField) -> Self {
        Snapshot { nx: q.grid.nx, ny: q.grid.ny, d: q.dim.n(), kind: SnapshotKind::Q, comps: q.comps.clone() }
    }

    pub fn from_velocity(u: &VelocityField) -> Self {
        Snapshot {
            nx: u.grid.nx,
            ny: u.grid.ny,
            d: 2,
            kind: SnapshotKind::Velocity,
            comps: vec![u.u().to_vec(), u.v().to_vec()],
        }
    }

    fn check_grid(&self, grid: &GridSpec, kind: SnapshotKind) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Snapshot(format!("expected a {:?} snapshot, found {:?}", kind, self.kind)));
        }
        if (self.nx, self.ny) != (grid.nx, grid.ny) {
            return Err(Error::GridMismatch(format!(
                "snapshot is {}x{}, grid is {}x{}",
                self.nx, self.ny, grid.nx, grid.ny
            )));
        }
        Ok(())
    }

    pub fn into_q(self, grid: GridSpec) -> Result<QField> {
        self.check_grid(&grid, SnapshotKind::Q)?;
        Ok(QField { grid, dim: Dim::from_usize(self.d)?, comps: self.comps })
    }

    pub fn into_velocity(self, grid: GridSpec) -> Result<VelocityField> {
        self.check_grid(&grid, SnapshotKind::Velocity)?;
        let mut data = self.comps.concat();
        crate::grid::enforce_walls(&grid, &mut data);
        Ok(VelocityField { grid, data })
    }
}

pub fn write_snapshot(path: &Path, snap: &Snapshot) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{MAGIC} {} {} {} {}", snap.nx, snap.ny, snap.d, snap.kind.tag())?;
    for comp in &snap.comps {
        for x in comp {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let mut r = BufReader::new(File::open(path)?);
    let mut header = String::new();
    r.read_line(&mut header)?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != MAGIC {
        return Err(Error::Snapshot(format!("bad header {:?}", header.trim_end())));
    }
    let num = |s: &str| s.parse::<usize>().map_err(|_| Error::Snapshot(format!("bad header field {s:?}")));
    let (nx, ny, d) = (num(fields[1])?, num(fields[2])?, num(fields[3])?);
    let kind = SnapshotKind::parse(fields[4])?;
    let n = nx.checked_mul(ny).ok_or_else(|| Error::Snapshot("grid size overflow".into()))?;
    let mut comps = Vec::new();
    let mut buf = [0u8; 8];
    for _ in 0..kind.ncomp(d)? {
        let mut c = Vec::with_capacity(n);
        for _ in 0..n {
            r.read_exact(&mut buf).map_err(|_| Error::Snapshot("truncated data block".into()))?;
            c.push(f64::from_le_bytes(buf));
        }
        comps.push(c);
    }
    if r.read(&mut buf)? != 0 {
        return Err(Error::Snapshot("trailing bytes after data".into()));
    }
    Ok(Snapshot { nx, ny, d, kind, comps })
}

/// Writes `cell,i,j,x,y,q1,..` with one row per cell.
pub fn write_csv(path: &Path, q: &QField) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["cell".to_string(), "i".into(), "j".into(), "x".into(), "y".into()];
    header.extend((1..=q.ncomp()).map(|m| format!("q{m}")));
    w.write_record(&header)?;
    let g = &q.grid;
    for j in 0..g.ny {
        for i in 0..g.nx {
            let k = g.idx(i, j);
            let (x, y) = g.cell_center(i, j);
            let mut row = vec![k.to_string(), i.to_string(), j.to_string(), x.to_string(), y.to_string()];
            row.extend(q.comps.iter().map(|c| c[k].to_string()));
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

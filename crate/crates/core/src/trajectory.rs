//! Time series recorded by both engines and their on-disk formats.

use std::io::{self, Read, Write};

use serde::{Deserialize, Serialize};

use crate::classical::ControlNorms;
use crate::error::{Error, Result};

/// Plain CSV or gnuplot-friendly whitespace-separated columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TableFormat {
    #[default]
    Csv,
    Gnuplot,
}

impl std::str::FromStr for TableFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(TableFormat::Csv),
            "gnuplot" | "whitespace" => Ok(TableFormat::Gnuplot),
            _ => Err(Error::InvalidArgument(format!("unknown table format `{s}`"))),
        }
    }
}

impl TableFormat {
    pub fn separator(self) -> &'static str {
        match self {
            TableFormat::Csv => ",",
            TableFormat::Gnuplot => " ",
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            TableFormat::Csv => "csv",
            TableFormat::Gnuplot => "dat",
        }
    }

    /// Header line; gnuplot output prefixes it with `#`.
    pub fn header(self, columns: &[&str]) -> String {
        let joined = columns.join(self.separator());
        match self {
            TableFormat::Csv => joined,
            TableFormat::Gnuplot => format!("# {joined}"),
        }
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExtraColumn {
    pub name: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinSnapshot {
    pub time: f64,
    pub spins: Vec<[f64; 3]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub n: usize,
    pub times: Vec<f64>,
    pub energies: Vec<f64>,
    pub energy_densities: Vec<f64>,
    pub control_norms: Vec<ControlNorms>,
    pub extra: Option<ExtraColumn>,
    pub snapshots: Vec<SpinSnapshot>,
}

pub const TRAJECTORY_COLUMNS: [&str; 6] =
    ["t", "energy", "energy_density", "norm_beta_x", "norm_beta_y", "norm_beta_pair"];

impl Trajectory {
    pub fn new(n: usize, extra: Option<&str>) -> Self {
        Self {
            n,
            times: Vec::new(),
            energies: Vec::new(),
            energy_densities: Vec::new(),
            control_norms: Vec::new(),
            extra: extra.map(|name| ExtraColumn { name: name.to_string(), values: Vec::new() }),
            snapshots: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, energy: f64, norms: ControlNorms, extra: Option<f64>) {
        debug_assert!(self.times.last().is_none_or(|&last| t > last));
        self.times.push(t);
        self.energies.push(energy);
        self.energy_densities.push(energy / self.n.max(1) as f64);
        self.control_norms.push(norms);
        if let Some(col) = &mut self.extra {
            col.values.push(extra.unwrap_or(f64::NAN));
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_time(&self) -> Option<f64> {
        self.times.last().copied()
    }

    pub fn final_energy(&self) -> Option<f64> {
        self.energies.last().copied()
    }

    pub fn final_density(&self) -> Option<f64> {
        self.energy_densities.last().copied()
    }

    /// Largest step-to-step energy increase.
    pub fn max_energy_increase(&self) -> f64 {
        self.energies.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn write_table<W: Write>(&self, mut w: W, format: TableFormat) -> io::Result<()> {
        let mut cols: Vec<&str> = TRAJECTORY_COLUMNS.to_vec();
        if let Some(extra) = &self.extra {
            cols.push(&extra.name);
        }
        writeln!(w, "{}", format.header(&cols))?;
        let sep = format.separator();
        for i in 0..self.len() {
            let norms = &self.control_norms[i];
            let mut fields = vec![
                fmt_f64(self.times[i]),
                fmt_f64(self.energies[i]),
                fmt_f64(self.energy_densities[i]),
                fmt_f64(norms.beta_x),
                fmt_f64(norms.beta_y),
                fmt_f64(norms.beta_pair),
            ];
            if let Some(extra) = &self.extra {
                fields.push(fmt_f64(extra.values[i]));
            }
            writeln!(w, "{}", fields.join(sep))?;
        }
        Ok(())
    }

    pub fn to_table_string(&self, format: TableFormat) -> String {
        let mut buf = Vec::new();
        self.write_table(&mut buf, format).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("table output is ASCII")
    }

    /// First `len` samples (snapshots up to the last kept time).
    pub fn prefix(&self, len: usize) -> Trajectory {
        let len = len.min(self.len());
        let cut = self.times.get(len.wrapping_sub(1)).copied().unwrap_or(f64::NEG_INFINITY);
        Trajectory {
            n: self.n,
            times: self.times[..len].to_vec(),
            energies: self.energies[..len].to_vec(),
            energy_densities: self.energy_densities[..len].to_vec(),
            control_norms: self.control_norms[..len].to_vec(),
            extra: self.extra.as_ref().map(|c| ExtraColumn { name: c.name.clone(), values: c.values[..len].to_vec() }),
            snapshots: self.snapshots.iter().filter(|s| s.time <= cut).cloned().collect(),
        }
    }

    /// Every `stride`-th sample plus the last one.
    pub fn thin(&self, stride: usize) -> Trajectory {
        let stride = stride.max(1);
        let last = self.len().saturating_sub(1);
        let mut out = Trajectory::new(self.n, self.extra.as_ref().map(|c| c.name.as_str()));
        for i in (0..self.len()).filter(|&i| i % stride == 0 || i == last) {
            out.push(self.times[i], self.energies[i], self.control_norms[i], self.extra.as_ref().map(|c| c.values[i]));
        }
        out.snapshots = self.snapshots.clone();
        out
    }

    /// Keeps at most `points` samples, always including the first and last.
    /// With `log_spaced` the kept times are roughly geometric in `t`.
    pub fn downsample(&self, points: usize, log_spaced: bool) -> Trajectory {
        let len = self.len();
        if points == 0 || len <= points {
            return self.clone();
        }
        let mut keep: Vec<usize> = if log_spaced && len > 2 && self.times[1] > 0.0 {
            let t_first = self.times[1];
            let t_last = *self.times.last().unwrap();
            let mut idx = vec![0usize];
            for p in 0..points - 1 {
                let frac = p as f64 / (points - 2).max(1) as f64;
                let target = t_first * (t_last / t_first).powf(frac);
                let pos = self.times.partition_point(|&t| t < target).min(len - 1);
                idx.push(pos);
            }
            idx
        } else {
            (0..points).map(|p| p * (len - 1) / (points - 1)).collect()
        };
        keep.push(len - 1);
        keep.sort_unstable();
        keep.dedup();

        let mut out = Trajectory::new(self.n, self.extra.as_ref().map(|c| c.name.as_str()));
        for i in keep {
            out.push(
                self.times[i],
                self.energies[i],
                self.control_norms[i],
                self.extra.as_ref().map(|c| c.values[i]),
            );
        }
        out
    }

    /// Binary snapshot file: magic `SPNS`, `u32` version, `u64` spin count,
    /// `u64` record count, then per record `f64` time and `3N` `f64`s
    /// (`m^X, m^Y, m^Z` per spin). Little-endian throughout.
    pub fn write_snapshots<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(b"SPNS")?;
        w.write_all(&1u32.to_le_bytes())?;
        w.write_all(&(self.n as u64).to_le_bytes())?;
        w.write_all(&(self.snapshots.len() as u64).to_le_bytes())?;
        for snap in &self.snapshots {
            w.write_all(&snap.time.to_le_bytes())?;
            for m in &snap.spins {
                for c in m {
                    w.write_all(&c.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }
}

pub fn read_snapshots<R: Read>(mut r: R) -> io::Result<Vec<SpinSnapshot>> {
    let bad = |msg: &str| io::Error::new(io::ErrorKind::InvalidData, msg.to_string());
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != b"SPNS" {
        return Err(bad("not a snapshot file"));
    }
    let mut b4 = [0u8; 4];
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b4)?;
    if u32::from_le_bytes(b4) != 1 {
        return Err(bad("unsupported snapshot version"));
    }
    r.read_exact(&mut b8)?;
    let n = u64::from_le_bytes(b8) as usize;
    r.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8) as usize;
    let mut read_f64 = |r: &mut R| -> io::Result<f64> {
        r.read_exact(&mut b8)?;
        Ok(f64::from_le_bytes(b8))
    };
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let time = read_f64(&mut r)?;
        let mut spins = Vec::with_capacity(n);
        for _ in 0..n {
            spins.push([read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?]);
        }
        out.push(SpinSnapshot { time, spins });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize, len: usize) -> Trajectory {
        let mut t = Trajectory::new(n, Some("beta"));
        for i in 0..len {
            t.push(i as f64 * 0.5, 10.0 - i as f64, ControlNorms::default(), Some(i as f64));
        }
        t
    }

    #[test]
    fn csv_has_schema_and_full_precision() {
        let t = ramp(4, 3);
        let text = t.to_table_string(TableFormat::Csv);
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "t,energy,energy_density,norm_beta_x,norm_beta_y,norm_beta_pair,beta"
        );
        let row: Vec<f64> = lines.next().unwrap().split(',').map(|s| s.parse().unwrap()).collect();
        assert_eq!(row, vec![0.0, 10.0, 2.5, 0.0, 0.0, 0.0, 0.0]);
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(fmt_f64(1.0 / 3.0).len(), "3.3333333333333331e-1".len());
        let gp = t.to_table_string(TableFormat::Gnuplot);
        assert!(gp.starts_with("# t energy"));
    }

    #[test]
    fn downsample_keeps_endpoints() {
        let t = ramp(1, 1000);
        for log in [false, true] {
            let d = t.downsample(20, log);
            assert!(d.len() <= 21 && d.len() >= 10, "{}", d.len());
            assert_eq!(d.times[0], 0.0);
            assert_eq!(d.final_time(), t.final_time());
            assert!(d.times.windows(2).all(|w| w[1] > w[0]));
        }
    }

    #[test]
    fn prefix_and_thin() {
        let t = ramp(2, 10);
        let p = t.prefix(4);
        assert_eq!(p.len(), 4);
        assert_eq!(p.final_time(), Some(1.5));
        assert_eq!(p.extra.unwrap().values.len(), 4);
        let th = t.thin(4);
        assert_eq!(th.times, vec![0.0, 2.0, 4.0, 4.5]);
        assert_eq!(t.thin(1), t);
    }

    #[test]
    fn snapshot_round_trip() {
        let mut t = Trajectory::new(2, None);
        t.snapshots.push(SpinSnapshot { time: 0.25, spins: vec![[1.0, 0.0, 0.0], [0.0, 0.6, 0.8]] });
        let mut buf = Vec::new();
        t.write_snapshots(&mut buf).unwrap();
        assert_eq!(read_snapshots(&buf[..]).unwrap(), t.snapshots);
        assert!(read_snapshots(&b"XXXX"[..]).is_err());
    }
}

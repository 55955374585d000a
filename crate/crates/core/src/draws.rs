//! Posterior draws paired with their unnormalized log-posterior values.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const LOG_DENSITY_COLUMN: &str = "log_unnorm_posterior";

/// Row-major draws `θ_1..θ_N ∈ R^d` with matching `log π̃(θ_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DrawSet {
    dim: usize,
    draws: Vec<f64>,
    log_densities: Vec<f64>,
}

impl DrawSet {
    pub fn new(dim: usize, draws: Vec<f64>, log_densities: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if log_densities.is_empty() {
            return Err(Error::EmptyInput);
        }
        if draws.len() != dim * log_densities.len() {
            return Err(Error::Dimension { expected: dim * log_densities.len(), got: draws.len() });
        }
        if let Some(i) = log_densities.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numerical { point: draws[i * dim..(i + 1) * dim].to_vec() });
        }
        Ok(Self { dim, draws, log_densities })
    }

    /// Builds a draw set by evaluating `logdens` at every row.
    pub fn from_rows<F>(dim: usize, draws: Vec<f64>, logdens: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64,
    {
        let log_densities = draws.chunks_exact(dim).map(logdens).collect();
        Self::new(dim, draws, log_densities)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.log_densities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_densities.is_empty()
    }

    pub fn draw(&self, i: usize) -> &[f64] {
        &self.draws[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + Clone {
        self.draws.chunks_exact(self.dim)
    }

    pub fn flat(&self) -> &[f64] {
        &self.draws
    }

    pub fn log_densities(&self) -> &[f64] {
        &self.log_densities
    }

    /// Rows `[start, end)` as a new set (must be nonempty).
    pub fn slice(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.len() {
            return Err(Error::invalid(format!("bad draw range {start}..{end}")));
        }
        Ok(Self {
            dim: self.dim,
            draws: self.draws[start * self.dim..end * self.dim].to_vec(),
            log_densities: self.log_densities[start..end].to_vec(),
        })
    }

    /// The rows at `indices`, in that order. May be empty.
    pub(crate) fn select(&self, indices: &[usize]) -> Self {
        let mut draws = Vec::with_capacity(indices.len() * self.dim);
        let mut log_densities = Vec::with_capacity(indices.len());
        for &i in indices {
            draws.extend_from_slice(self.draw(i));
            log_densities.push(self.log_densities[i]);
        }
        Self { dim: self.dim, draws, log_densities }
    }

    pub fn concat(&self, other: &DrawSet) -> Result<Self> {
        if self.dim != other.dim {
            return Err(Error::Dimension { expected: self.dim, got: other.dim });
        }
        let mut draws = self.draws.clone();
        draws.extend_from_slice(&other.draws);
        let mut log_densities = self.log_densities.clone();
        log_densities.extend_from_slice(&other.log_densities);
        Ok(Self { dim: self.dim, draws, log_densities })
    }

    /// Adds `shift` to every log-density.
    pub fn shifted(&self, shift: f64) -> Self {
        Self {
            dim: self.dim,
            draws: self.draws.clone(),
            log_densities: self.log_densities.iter().map(|v| v + shift).collect(),
        }
    }

    /// Reads draws from CSV: `d` coordinate columns plus a
    /// `log_unnorm_posterior` column, header required. Lines starting with
    /// `#` are ignored.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let ld_col = headers
            .iter()
            .position(|h| h == LOG_DENSITY_COLUMN)
            .ok_or_else(|| Error::Parse { line: 1, msg: format!("missing `{LOG_DENSITY_COLUMN}` column") })?;
        let dim = headers.len() - 1;
        if dim == 0 {
            return Err(Error::Parse { line: 1, msg: "no coordinate columns".into() });
        }
        let mut draws = Vec::new();
        let mut lds = Vec::new();
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
            if rec.len() != headers.len() {
                return Err(Error::Parse { line, msg: format!("expected {} fields, got {}", headers.len(), rec.len()) });
            }
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field
                    .parse()
                    .map_err(|_| Error::Parse { line, msg: format!("not a number: `{field}`") })?;
                if j == ld_col {
                    lds.push(v);
                } else {
                    draws.push(v);
                }
            }
        }
        Self::new(dim, draws, lds)
    }

    pub fn read_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        Self::read_csv(std::fs::File::open(path)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = (1..=self.dim).map(|j| format!("theta_{j}")).collect();
        header.push(LOG_DENSITY_COLUMN.to_string());
        wtr.write_record(&header)?;
        for (row, ld) in self.rows().zip(&self.log_densities) {
            let rec: Vec<String> = row.iter().chain(std::iter::once(ld)).map(|v| fmt_f64(*v)).collect();
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// 17 significant digits; parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        format!("{v}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let ds = DrawSet::new(2, vec![0.1, 0.2, -1.0 / 3.0, 4.0e-300], vec![-1.5, 2.0 / 7.0]).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let back = DrawSet::read_csv(buf.as_slice()).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let text = "a,b,log_unnorm_posterior\n1,2,3\n1,x,3\n";
        match DrawSet::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let text = "a,b\n1,2\n";
        assert!(matches!(DrawSet::read_csv(text.as_bytes()), Err(Error::Parse { .. })));
    }

    #[test]
    fn rejects_non_finite_densities() {
        assert!(matches!(DrawSet::new(1, vec![0.0], vec![f64::NAN]), Err(Error::Numerical { .. })));
        assert!(matches!(DrawSet::new(2, vec![0.0], vec![0.0]), Err(Error::Dimension { .. })));
    }
}

//! Time-discrete solution paths and their CSV form.
//!
//! CSV layout: `time, coeff_0..coeff_{d-1}, dL_0..dL_{d-1}, k`, one row per
//! grid point. Row `i >= 1` carries the local-time increment and control value
//! of the step `(t_{i-1}, t_i]`; row 0 carries zeros so that `L(0) = 0`.
//! Floats are written with 17 significant digits.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::SpectralVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub grid: Vec<f64>,
    pub states: Vec<SpectralVector>,
    /// `ΔL_j` for the step `t_j -> t_{j+1}`, evaluated at `t_{j+1}`.
    pub local_time_increments: Option<Vec<SpectralVector>>,
    pub control_values: Option<Vec<f64>>,
}

impl Trajectory {
    pub fn from_states(grid: Vec<f64>, states: Vec<SpectralVector>) -> Self {
        Self {
            grid,
            states,
            local_time_increments: None,
            control_values: None,
        }
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, SpectralVector::dim)
    }

    pub fn steps(&self) -> usize {
        self.grid.len().saturating_sub(1)
    }

    pub fn terminal(&self) -> &SpectralVector {
        self.states.last().expect("trajectory has at least one state")
    }

    /// Checks the length and dimension bookkeeping.
    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() || self.grid.len() != self.states.len() {
            return Err(Error::GridMismatch(format!(
                "{} grid points but {} states",
                self.grid.len(),
                self.states.len()
            )));
        }
        if self.grid.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::GridMismatch("grid is not strictly increasing".into()));
        }
        let d = self.dim();
        for s in &self.states {
            if s.dim() != d {
                return Err(Error::DimensionMismatch { expected: d, found: s.dim() });
            }
        }
        if let Some(inc) = &self.local_time_increments {
            if inc.len() != self.steps() {
                return Err(Error::GridMismatch(format!(
                    "{} local-time increments for {} steps",
                    inc.len(),
                    self.steps()
                )));
            }
        }
        if let Some(k) = &self.control_values {
            if k.len() != self.steps() {
                return Err(Error::GridMismatch(format!(
                    "{} control values for {} steps",
                    k.len(),
                    self.steps()
                )));
            }
        }
        Ok(())
    }

    /// Total variation `Σ |ΔL_j|` of the local time.
    pub fn local_time_variation(&self) -> f64 {
        self.local_time_increments
            .as_ref()
            .map_or(0.0, |inc| inc.iter().map(SpectralVector::norm).sum())
    }

    /// `L(T) = Σ ΔL_j`.
    pub fn local_time_total(&self) -> SpectralVector {
        let mut total = SpectralVector::zeros(self.dim());
        if let Some(inc) = &self.local_time_increments {
            for dl in inc {
                total.axpy(1.0, dl);
            }
        }
        total
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        self.validate()?;
        let d = self.dim();
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["time".to_string()];
        header.extend((0..d).map(|i| format!("coeff_{i}")));
        header.extend((0..d).map(|i| format!("dL_{i}")));
        header.push("k".into());
        w.write_record(&header).map_err(csv_io)?;

        let zero = SpectralVector::zeros(d);
        for (i, (t, u)) in self.grid.iter().zip(&self.states).enumerate() {
            let (dl, k) = if i == 0 {
                (&zero, 0.0)
            } else {
                (
                    self.local_time_increments.as_ref().map_or(&zero, |inc| &inc[i - 1]),
                    self.control_values.as_ref().map_or(0.0, |k| k[i - 1]),
                )
            };
            let mut row = Vec::with_capacity(2 * d + 2);
            row.push(fmt17(*t));
            row.extend(u.coeffs().iter().map(|c| fmt17(*c)));
            row.extend(dl.coeffs().iter().map(|c| fmt17(*c)));
            row.push(fmt17(k));
            w.write_record(&row).map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let header = r.headers().map_err(csv_parse)?.clone();
        let cols = header.len();
        if cols < 4 || cols % 2 != 0 {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected 2d + 2 columns, found {cols}"),
            });
        }
        let d = (cols - 2) / 2;
        let mut expected = vec!["time".to_string()];
        expected.extend((0..d).map(|i| format!("coeff_{i}")));
        expected.extend((0..d).map(|i| format!("dL_{i}")));
        expected.push("k".into());
        if header.iter().ne(expected.iter().map(String::as_str)) {
            return Err(Error::Parse {
                line: 1,
                message: "header does not match time,coeff_*,dL_*,k".into(),
            });
        }

        let mut grid = Vec::new();
        let mut states = Vec::new();
        let mut increments = Vec::new();
        let mut controls = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(csv_parse)?;
            let line = rec.position().map_or(0, |p| p.line());
            let vals = rec
                .iter()
                .map(|f| {
                    f.trim().parse::<f64>().map_err(|e| Error::Parse {
                        line,
                        message: format!("bad number {f:?}: {e}"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::Parse { line, message: "non-finite value".into() });
            }
            grid.push(vals[0]);
            states.push(SpectralVector::from_vec_unchecked(vals[1..=d].to_vec()));
            if grid.len() > 1 {
                increments.push(SpectralVector::from_vec_unchecked(vals[d + 1..=2 * d].to_vec()));
                controls.push(vals[2 * d + 1]);
            }
        }
        if grid.is_empty() {
            return Err(Error::Parse { line: 2, message: "no data rows".into() });
        }
        let traj = Trajectory {
            grid,
            states,
            local_time_increments: Some(increments),
            control_values: Some(controls),
        };
        traj.validate()?;
        Ok(traj)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(f))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_csv(std::io::BufReader::new(f))
    }
}

pub(crate) fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e.to_string()))
}

fn csv_parse(e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line());
    Error::Parse { line, message: e.to_string() }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample() -> Trajectory {
        let grid = vec![0.0, 0.1, 0.2];
        let states = vec![
            SpectralVector::new(vec![0.1, 0.2]).unwrap(),
            SpectralVector::new(vec![1.0 / 3.0, -0.5]).unwrap(),
            SpectralVector::new(vec![0.6, 0.8]).unwrap(),
        ];
        Trajectory {
            grid,
            states,
            local_time_increments: Some(vec![
                SpectralVector::zeros(2),
                SpectralVector::new(vec![-1e-3, -2e-3]).unwrap(),
            ]),
            control_values: Some(vec![0.5, -0.25]),
        }
    }

    #[test]
    fn header_and_row_layout() {
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "time,coeff_0,coeff_1,dL_0,dL_1,k");
        let row1: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
        assert_eq!(row1[5], "5.0000000000000000e-1");
    }

    #[test]
    fn truncated_csv_names_the_line() {
        let mut buf = Vec::new();
        sample().write_csv(&mut buf).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        let cut = text.rfind(',').unwrap();
        text.truncate(cut);
        match Trajectory::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn bad_header_rejected() {
        let text = "t,a,b,c,d,k\n0,0,0,0,0,0\n";
        assert!(matches!(Trajectory::read_csv(text.as_bytes()), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn variation_and_total() {
        let t = sample();
        assert!((t.local_time_variation() - (5e-6f64).sqrt()).abs() < 1e-18);
        assert_eq!(t.local_time_total().coeffs(), &[-1e-3, -2e-3]);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_exact(vals in proptest::collection::vec(-1e3f64..1e3, 12), ks in proptest::collection::vec(-5.0f64..5.0, 2)) {
            let states: Vec<_> = vals[..6].chunks(2).map(|c| SpectralVector::new(c.to_vec()).unwrap()).collect();
            let inc: Vec<_> = vals[6..10].chunks(2).map(|c| SpectralVector::new(c.to_vec()).unwrap()).collect();
            let t = Trajectory {
                grid: vec![0.0, 0.3, 0.7],
                states,
                local_time_increments: Some(inc),
                control_values: Some(ks),
            };
            let mut buf = Vec::new();
            t.write_csv(&mut buf).unwrap();
            prop_assert_eq!(Trajectory::read_csv(buf.as_slice()).unwrap(), t);
        }
    }
}

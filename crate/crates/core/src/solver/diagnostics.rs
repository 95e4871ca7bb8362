use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::solver::StationarityResiduals;

/// One row of the per-iteration log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub plan_epoch: usize,
    pub phi: f64,
    pub rel_change: f64,
    /// `‖Sᵏ⁺¹ − Sᵏ‖`.
    pub s_change: f64,
    /// `‖Lᵏ⁺¹ − Lᵏ‖`.
    pub l_change: f64,
    pub r_s: f64,
    pub r_x_feas: f64,
    pub r_x_sub: f64,
    pub r_x_sym: f64,
    pub r_g: f64,
    pub r_l: f64,
    /// Rank-deficient Stiefel projections during this iteration.
    pub degenerate_projections: usize,
    pub wall_ms: f64,
}

impl IterationRecord {
    pub fn residuals(&self) -> StationarityResiduals {
        StationarityResiduals {
            r_s: self.r_s,
            r_x_feas: self.r_x_feas,
            r_x_sub: self.r_x_sub,
            r_x_sym: self.r_x_sym,
            r_g: self.r_g,
            r_l: self.r_l,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    #[default]
    MaxIterations,
    Converged,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Diagnostics {
    pub records: Vec<IterationRecord>,
    pub stop_reason: StopReason,
}

impl Diagnostics {
    pub fn phi_history(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.phi).collect()
    }

    /// Writes one CSV row per iteration with a header line.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        if self.records.is_empty() {
            w.write_record(HEADER)?;
        }
        for r in &self.records {
            w.serialize(r)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a log written by [`Self::write_csv`]; an empty input yields no records.
    pub fn read_csv<R: Read>(mut input: R) -> Result<Self> {
        let mut text = String::new();
        input.read_to_string(&mut text).map_err(|e| Error::Format(format!("diagnostics are not UTF-8 text: {e}")))?;
        if text.trim().is_empty() {
            return Ok(Self::default());
        }
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        let header = rdr.headers()?.clone();
        if header.iter().ne(HEADER) {
            return Err(Error::Format(format!("unexpected diagnostics header: {}", header.iter().collect::<Vec<_>>().join(","))));
        }
        let records = rdr.deserialize().collect::<std::result::Result<Vec<IterationRecord>, _>>()?;
        Ok(Self { records, stop_reason: StopReason::default() })
    }

    /// Per-iteration series for plotting.
    pub fn plot_data(&self) -> PlotData {
        let col = |f: fn(&IterationRecord) -> f64| self.records.iter().map(f).collect::<Vec<f64>>();
        PlotData {
            iteration: self.records.iter().map(|r| r.iteration).collect(),
            plan_epoch: self.records.iter().map(|r| r.plan_epoch).collect(),
            phi: col(|r| r.phi),
            rel_change: col(|r| r.rel_change),
            s_change: col(|r| r.s_change),
            l_change: col(|r| r.l_change),
            r_s: col(|r| r.r_s),
            r_x_feas: col(|r| r.r_x_feas),
            r_x_sub: col(|r| r.r_x_sub),
            r_x_sym: col(|r| r.r_x_sym),
            r_g: col(|r| r.r_g),
            r_l: col(|r| r.r_l),
        }
    }
}

/// Column-oriented view of a diagnostics log.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlotData {
    pub iteration: Vec<usize>,
    pub plan_epoch: Vec<usize>,
    pub phi: Vec<f64>,
    pub rel_change: Vec<f64>,
    pub s_change: Vec<f64>,
    pub l_change: Vec<f64>,
    pub r_s: Vec<f64>,
    pub r_x_feas: Vec<f64>,
    pub r_x_sub: Vec<f64>,
    pub r_x_sym: Vec<f64>,
    pub r_g: Vec<f64>,
    pub r_l: Vec<f64>,
}

const HEADER: [&str; 14] = [
    "iteration",
    "plan_epoch",
    "phi",
    "rel_change",
    "s_change",
    "l_change",
    "r_s",
    "r_x_feas",
    "r_x_sub",
    "r_x_sym",
    "r_g",
    "r_l",
    "degenerate_projections",
    "wall_ms",
];

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => Error::Format(format!("malformed CSV: {other:?}")),
        }
    }
}

//! Observable time series and their CSV form.
//!
//! The CSV header is `t,n_mean[,n_1..n_L][,sx_mean,sy_mean]`; floats are
//! written with 17 significant digits so files re-parse to identical values.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{QcaError, Result};

/// Which observables an evolution records besides the mean density.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservableSet {
    pub per_site: bool,
    pub transverse: bool,
}

impl ObservableSet {
    pub const MEAN_ONLY: Self = Self {
        per_site: false,
        transverse: false,
    };
    pub const ALL: Self = Self {
        per_site: true,
        transverse: true,
    };
}

/// Single-site expectation values `⟨n_k⟩`, `⟨σˣ_k⟩`, `⟨σʸ_k⟩` of one state.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteObservables {
    pub n: Vec<f64>,
    pub sx: Vec<f64>,
    pub sy: Vec<f64>,
}

impl SiteObservables {
    pub fn n_mean(&self) -> f64 {
        mean(&self.n)
    }
}

pub(crate) fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub times: Vec<usize>,
    pub n_mean: Vec<f64>,
    /// `n_site[t][k]`, present when per-site densities were recorded.
    pub n_site: Option<Vec<Vec<f64>>>,
    pub sx_mean: Option<Vec<f64>>,
    pub sy_mean: Option<Vec<f64>>,
}

impl TimeSeries {
    pub fn new(observables: ObservableSet) -> Self {
        Self {
            times: Vec::new(),
            n_mean: Vec::new(),
            n_site: observables.per_site.then(Vec::new),
            sx_mean: observables.transverse.then(Vec::new),
            sy_mean: observables.transverse.then(Vec::new),
        }
    }

    /// A mean-density-only series, e.g. from synthetic data.
    pub fn from_densities(n_mean: Vec<f64>) -> Self {
        Self {
            times: (0..n_mean.len()).collect(),
            n_mean,
            n_site: None,
            sx_mean: None,
            sy_mean: None,
        }
    }

    pub fn push(&mut self, t: usize, obs: &SiteObservables) {
        self.times.push(t);
        self.n_mean.push(obs.n_mean());
        if let Some(sites) = self.n_site.as_mut() {
            sites.push(obs.n.clone());
        }
        if let Some(sx) = self.sx_mean.as_mut() {
            sx.push(mean(&obs.sx));
        }
        if let Some(sy) = self.sy_mean.as_mut() {
            sy.push(mean(&obs.sy));
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// Last recorded step, `T`.
    pub fn t_max(&self) -> usize {
        self.times.last().copied().unwrap_or(0)
    }

    /// Density at step `t`, if recorded.
    pub fn density_at(&self, t: usize) -> Option<f64> {
        // times are 0..=T in order for every series this crate produces
        match self.times.get(t) {
            Some(&tt) if tt == t => Some(self.n_mean[t]),
            _ => self
                .times
                .iter()
                .position(|&tt| tt == t)
                .map(|i| self.n_mean[i]),
        }
    }

    pub fn site_count(&self) -> Option<usize> {
        self.n_site.as_ref().and_then(|s| s.first().map(Vec::len))
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let l = self.site_count().unwrap_or(0);
        let mut header = vec!["t".to_string(), "n_mean".to_string()];
        if self.n_site.is_some() {
            header.extend((1..=l).map(|k| format!("n_{k}")));
        }
        if self.sx_mean.is_some() {
            header.push("sx_mean".into());
            header.push("sy_mean".into());
        }
        w.write_record(&header)?;
        for (i, t) in self.times.iter().enumerate() {
            let mut row = vec![t.to_string(), fmt_f64(self.n_mean[i])];
            if let Some(sites) = &self.n_site {
                row.extend(sites[i].iter().map(|&v| fmt_f64(v)));
            }
            if let (Some(sx), Some(sy)) = (&self.sx_mean, &self.sy_mean) {
                row.push(fmt_f64(sx[i]));
                row.push(fmt_f64(sy[i]));
            }
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| QcaError::Format(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.len() < 2 || header[0] != "t" || header[1] != "n_mean" {
            return Err(QcaError::Format(format!(
                "expected header starting with `t,n_mean`, got `{}`",
                header.join(",")
            )));
        }
        let site_cols: Vec<usize> = header
            .iter()
            .enumerate()
            .filter(|(_, h)| h.starts_with("n_") && *h != "n_mean")
            .map(|(i, _)| i)
            .collect();
        let sx_col = header.iter().position(|h| h == "sx_mean");
        let sy_col = header.iter().position(|h| h == "sy_mean");
        if sx_col.is_some() != sy_col.is_some() {
            return Err(QcaError::Format("sx_mean and sy_mean must appear together".into()));
        }

        let mut series = TimeSeries::new(ObservableSet {
            per_site: !site_cols.is_empty(),
            transverse: sx_col.is_some(),
        });
        for record in r.records() {
            let record = record?;
            let field = |i: usize| -> Result<&str> {
                record
                    .get(i)
                    .ok_or_else(|| QcaError::Format(format!("missing column {i}")))
            };
            let t: usize = field(0)?
                .parse()
                .map_err(|e| QcaError::Format(format!("bad step `{}`: {e}", &record[0])))?;
            series.times.push(t);
            series.n_mean.push(parse_f64(field(1)?)?);
            if let Some(sites) = series.n_site.as_mut() {
                sites.push(
                    site_cols
                        .iter()
                        .map(|&i| parse_f64(field(i)?))
                        .collect::<Result<_>>()?,
                );
            }
            if let (Some(sx), Some(sy)) = (series.sx_mean.as_mut(), series.sy_mean.as_mut()) {
                sx.push(parse_f64(field(sx_col.unwrap())?)?);
                sy.push(parse_f64(field(sy_col.unwrap())?)?);
            }
        }
        Ok(series)
    }
}

/// Float formatting used by every CSV this crate writes: 17 significant digits.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|e| QcaError::Format(format!("bad float `{s}`: {e}")))
}

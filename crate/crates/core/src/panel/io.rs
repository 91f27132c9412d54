use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::estimators::TreatmentEstimates;
use super::Panel;

#[derive(Debug, Serialize, Deserialize)]
struct PanelRecord {
    unit: usize,
    t: usize,
    y: f64,
    treated: u8,
}

#[derive(Debug, Serialize, Deserialize)]
struct EstimateRecord {
    t: usize,
    tau_hat: f64,
    phase: String,
}

/// Writes `unit,t,y,treated` rows; `treated` flags the treated unit's
/// post-treatment cells.
pub fn write_panel_csv<W: Write>(out: W, panel: &Panel) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for unit in 1..=panel.n_units() {
        for t in 1..=panel.t_total() {
            w.serialize(PanelRecord {
                unit,
                t,
                y: panel.y(unit, t),
                treated: u8::from(unit == 1 && t > panel.t0()),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a long-format panel. The treated unit and `T0` are inferred from the
/// `treated` flags; the number of blank periods must be supplied.
pub fn read_panel_csv<R: Read>(input: R, t_blank: usize) -> Result<Panel> {
    let mut cells: BTreeMap<usize, BTreeMap<usize, f64>> = BTreeMap::new();
    let mut treated: Option<(usize, usize)> = None;
    for record in csv::Reader::from_reader(input).deserialize() {
        let r: PanelRecord = record?;
        if cells.entry(r.unit).or_default().insert(r.t, r.y).is_some() {
            return Err(Error::Data(format!("duplicate cell unit {} t {}", r.unit, r.t)));
        }
        if r.treated != 0 {
            match treated {
                Some((u, _)) if u != r.unit => return Err(Error::Data("more than one treated unit".into())),
                Some((u, first)) => treated = Some((u, first.min(r.t))),
                None => treated = Some((r.unit, r.t)),
            }
        }
    }
    let (treated_unit, first_treated) = treated.ok_or_else(|| Error::Data("no treated cells".into()))?;
    let mut rows = Vec::with_capacity(cells.len());
    let row = |cells: &BTreeMap<usize, f64>| -> Result<Vec<f64>> {
        if cells.keys().copied().ne(1..=cells.len()) {
            return Err(Error::Data("periods must be 1..=T without gaps".into()));
        }
        Ok(cells.values().copied().collect())
    };
    rows.push(row(&cells[&treated_unit])?);
    for (unit, c) in &cells {
        if *unit != treated_unit {
            rows.push(row(c)?);
        }
    }
    Panel::from_rows(rows, first_treated - 1, t_blank)
}

pub fn write_estimates_csv<W: Write>(out: W, est: &TreatmentEstimates) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let phases = [("blank", &est.blank), ("train", &est.train), ("post", &est.post)];
    let mut t = 0;
    for (phase, values) in phases {
        for &tau_hat in values.iter() {
            t += 1;
            w.serialize(EstimateRecord {
                t,
                tau_hat,
                phase: phase.into(),
            })?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn read_estimates_csv<R: Read>(input: R) -> Result<TreatmentEstimates> {
    let mut est = TreatmentEstimates {
        blank: vec![],
        train: vec![],
        post: vec![],
    };
    let mut records: Vec<EstimateRecord> = csv::Reader::from_reader(input)
        .deserialize()
        .collect::<Result<_, _>>()?;
    records.sort_by_key(|r| r.t);
    for r in records {
        if !r.tau_hat.is_finite() {
            return Err(Error::Data(format!("non-finite estimate at t = {}", r.t)));
        }
        match r.phase.as_str() {
            "blank" => est.blank.push(r.tau_hat),
            "train" => est.train.push(r.tau_hat),
            "post" => est.post.push(r.tau_hat),
            other => return Err(Error::Data(format!("unknown phase `{other}`"))),
        }
    }
    Ok(est)
}

//! CSV and JSON encodings of grid reports.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CellResult, GridReport, Metric, MetricResult, ReplicaRecord, SweepRow};
use crate::engine::InterventionStrategy;
use crate::{Error, Result};

/// One row of the per-replica table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongRow {
    pub odm: String,
    pub recommender: String,
    pub eta: f64,
    pub mu: f64,
    pub metric: String,
    pub replica: usize,
    pub seed: u64,
    pub m_initial: f64,
    pub m_null: f64,
    pub m_rec: f64,
}

/// One row of the per-cell summary table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub odm: String,
    pub recommender: String,
    pub eta: f64,
    pub mu: f64,
    pub metric: String,
    pub delta: f64,
    pub ks_stat: f64,
    pub p_value: f64,
    pub significance: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExportFormat {
    LongCsv,
    AggregateCsv,
    Json,
}

fn csv_err(e: csv::Error) -> Error {
    Error::Serialization(e.to_string())
}

fn to_csv<T: Serialize>(rows: impl IntoIterator<Item = T>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Serialization(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Serialization(e.to_string()))
}

fn from_csv<T: for<'de> Deserialize<'de>>(text: &str) -> Result<Vec<T>> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::Parse {
                line: i + 2,
                message: e.to_string(),
            })
        })
        .collect()
}

impl GridReport {
    pub fn long_rows(&self) -> Vec<LongRow> {
        let mut rows = Vec::new();
        for cell in &self.cells {
            for m in &cell.metrics {
                for r in &m.records {
                    rows.push(LongRow {
                        odm: self.odm.clone(),
                        recommender: self.recommender.clone(),
                        eta: cell.eta,
                        mu: cell.mu,
                        metric: m.metric.name().into(),
                        replica: r.replica,
                        seed: r.seed,
                        m_initial: r.m_initial,
                        m_null: r.m_null,
                        m_rec: r.m_rec,
                    });
                }
            }
        }
        rows
    }

    pub fn aggregate_rows(&self) -> Vec<AggregateRow> {
        self.cells
            .iter()
            .flat_map(|cell| {
                cell.metrics.iter().map(move |m| AggregateRow {
                    odm: self.odm.clone(),
                    recommender: self.recommender.clone(),
                    eta: cell.eta,
                    mu: cell.mu,
                    metric: m.metric.name().into(),
                    delta: m.delta,
                    ks_stat: m.ks.statistic,
                    p_value: m.ks.p_value,
                    significance: m.significance.clone(),
                })
            })
            .collect()
    }

    pub fn long_csv(&self) -> Result<String> {
        to_csv(self.long_rows())
    }

    pub fn aggregate_csv(&self) -> Result<String> {
        to_csv(self.aggregate_rows())
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Serialization(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Serialization(e.to_string()))
    }

    /// Rebuilds a report, aggregates included, from per-replica rows. Cells
    /// and metrics keep their first-seen order.
    pub fn from_long_rows(rows: &[LongRow], master_seed: u64) -> Result<Self> {
        let first = rows
            .first()
            .ok_or_else(|| Error::InvalidArgument("no rows to import".into()))?;
        let mut cells: Vec<(f64, f64, Vec<(Metric, Vec<ReplicaRecord>)>)> = Vec::new();
        for row in rows {
            if row.odm != first.odm || row.recommender != first.recommender {
                return Err(Error::Validation(
                    "rows mix different models or recommenders".into(),
                ));
            }
            let metric: Metric = row.metric.parse()?;
            let idx = match cells.iter().position(|c| c.0 == row.eta && c.1 == row.mu) {
                Some(i) => i,
                None => {
                    cells.push((row.eta, row.mu, Vec::new()));
                    cells.len() - 1
                }
            };
            let metrics = &mut cells[idx].2;
            let m = match metrics.iter().position(|(m, _)| *m == metric) {
                Some(i) => i,
                None => {
                    metrics.push((metric, Vec::new()));
                    metrics.len() - 1
                }
            };
            metrics[m].1.push(ReplicaRecord {
                replica: row.replica,
                seed: row.seed,
                m_initial: row.m_initial,
                m_null: row.m_null,
                m_rec: row.m_rec,
            });
        }
        let replicas = cells
            .first()
            .and_then(|c| c.2.first())
            .map(|m| m.1.len())
            .unwrap_or(0);
        let cells = cells
            .into_iter()
            .map(|(eta, mu, metrics)| {
                let metrics = metrics
                    .into_iter()
                    .map(|(m, records)| MetricResult::from_records(m, records))
                    .collect::<Result<Vec<_>>>()?;
                Ok(CellResult { eta, mu, metrics })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(GridReport {
            odm: first.odm.clone(),
            recommender: first.recommender.clone(),
            master_seed,
            replicas,
            cells,
        })
    }

    /// Writes the report to `path` in the given format.
    pub fn export(&self, path: impl AsRef<Path>, format: ExportFormat) -> Result<()> {
        let text = match format {
            ExportFormat::LongCsv => self.long_csv()?,
            ExportFormat::AggregateCsv => self.aggregate_csv()?,
            ExportFormat::Json => self.to_json()?,
        };
        let path = path.as_ref();
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

pub fn read_long_csv(text: &str) -> Result<Vec<LongRow>> {
    from_csv(text)
}

pub fn read_aggregate_csv(text: &str) -> Result<Vec<AggregateRow>> {
    from_csv(text)
}

#[derive(Serialize, Deserialize)]
struct SweepCsvRow {
    strategy: String,
    xi: f64,
    metric: String,
    delta: f64,
    p_value: f64,
}

/// `strategy,xi,metric,delta,p_value`.
pub fn sweep_csv(rows: &[SweepRow]) -> Result<String> {
    to_csv(rows.iter().map(|r| SweepCsvRow {
        strategy: r.strategy.name().into(),
        xi: r.xi,
        metric: r.metric.name().into(),
        delta: r.delta,
        p_value: r.p_value,
    }))
}

pub fn read_sweep_csv(text: &str) -> Result<Vec<SweepRow>> {
    from_csv::<SweepCsvRow>(text)?
        .into_iter()
        .map(|r| {
            Ok(SweepRow {
                strategy: r.strategy.parse::<InterventionStrategy>()?,
                xi: r.xi,
                metric: r.metric.parse()?,
                delta: r.delta,
                p_value: r.p_value,
            })
        })
        .collect()
}

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::fsutil::atomic_write;
use crate::model::LossBreakdown;

/// One logged iteration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub stage: u8,
    pub iter: usize,
    pub loss_ae: f64,
    pub loss_cyc: f64,
    pub loss_gan_x: f64,
    pub loss_gan_y: f64,
    pub total: f64,
    /// Wall time since the start of the stage.
    pub millis: u64,
}

impl LogRow {
    pub fn new(stage: u8, iter: usize, b: &LossBreakdown, millis: u64) -> Self {
        LogRow {
            stage,
            iter,
            loss_ae: b.ae,
            loss_cyc: b.cyc,
            loss_gan_x: b.gan_x,
            loss_gan_y: b.gan_y,
            total: b.total,
            millis,
        }
    }

    /// Everything except the wall time, bit for bit.
    pub fn same_values(&self, other: &LogRow) -> bool {
        self.stage == other.stage
            && self.iter == other.iter
            && [
                self.loss_ae,
                self.loss_cyc,
                self.loss_gan_x,
                self.loss_gan_y,
                self.total,
            ]
            .iter()
            .zip([
                other.loss_ae,
                other.loss_cyc,
                other.loss_gan_x,
                other.loss_gan_y,
                other.total,
            ])
            .all(|(a, b)| a.to_bits() == b.to_bits())
    }
}

/// Rows ordered by (stage, iteration).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
}

impl TrainLog {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn extend(&mut self, other: TrainLog) {
        self.rows.extend(other.rows);
    }

    pub fn stage(&self, stage: u8) -> impl Iterator<Item = &LogRow> {
        self.rows.iter().filter(move |r| r.stage == stage)
    }

    /// Equal in every column but `millis`.
    pub fn same_values(&self, other: &TrainLog) -> bool {
        self.rows.len() == other.rows.len()
            && self
                .rows
                .iter()
                .zip(&other.rows)
                .all(|(a, b)| a.same_values(b))
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.rows.is_empty() {
            w.write_record([
                "stage",
                "iter",
                "loss_ae",
                "loss_cyc",
                "loss_gan_x",
                "loss_gan_y",
                "total",
                "millis",
            ])?;
        }
        for r in &self.rows {
            w.serialize(r)?;
        }
        Ok(w.into_inner().map_err(|e| e.into_error())?)
    }

    pub fn from_csv(bytes: &[u8]) -> Result<TrainLog> {
        let mut r = csv::Reader::from_reader(bytes);
        let rows = r
            .deserialize()
            .collect::<std::result::Result<Vec<LogRow>, _>>()?;
        Ok(TrainLog { rows })
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        atomic_write(path.as_ref(), &self.to_csv()?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(iter: usize, millis: u64) -> LogRow {
        LogRow::new(
            3,
            iter,
            &LossBreakdown {
                ae: 0.0,
                cyc: 0.25,
                gan_x: -1.3,
                gan_y: -1.4,
                total: 0.1 + 0.2,
            },
            millis,
        )
    }

    #[test]
    fn csv_round_trip() {
        let log = TrainLog {
            rows: vec![row(0, 3), row(1, 9)],
        };
        let bytes = log.to_csv().unwrap();
        let text = String::from_utf8(bytes.clone()).unwrap();
        assert!(
            text.starts_with("stage,iter,loss_ae,loss_cyc,loss_gan_x,loss_gan_y,total,millis\n")
        );
        assert_eq!(TrainLog::from_csv(&bytes).unwrap(), log);
    }

    #[test]
    fn empty_log_still_has_header() {
        let text = String::from_utf8(TrainLog::default().to_csv().unwrap()).unwrap();
        assert_eq!(text.lines().count(), 1);
    }

    #[test]
    fn comparison_ignores_wall_time() {
        let a = TrainLog {
            rows: vec![row(0, 1)],
        };
        let b = TrainLog {
            rows: vec![row(0, 500)],
        };
        assert!(a.same_values(&b));
        let mut c = b.clone();
        c.rows[0].loss_cyc = f64::from_bits(c.rows[0].loss_cyc.to_bits() + 1);
        assert!(!a.same_values(&c));
    }
}

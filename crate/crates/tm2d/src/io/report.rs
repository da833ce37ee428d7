//! Metric report emission: a flat key=value block plus an optional CSV row.

use super::fmt_f64;
use crate::error::Result;
use std::fmt::Write as _;
use std::path::Path;

/// Named scalar results of one evaluation run, with the parameters used.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub fid_k: f64,
    pub fid_g: f64,
    pub div: f64,
    pub beat_align: f64,
    pub pff: f64,
    pub auc_f: f64,
    pub mpd: f64,
    /// (name, value) of every parameter that shaped the numbers.
    pub params: Vec<(String, String)>,
}

pub const METRIC_KEYS: [&str; 7] = [
    "fid_k",
    "fid_g",
    "div",
    "beat_align",
    "pff",
    "auc_f",
    "mpd",
];

impl MetricReport {
    fn values(&self) -> [f64; 7] {
        [
            self.fid_k,
            self.fid_g,
            self.div,
            self.beat_align,
            self.pff,
            self.auc_f,
            self.mpd,
        ]
    }

    /// Every metric key exactly once, then the parameters prefixed `param.`.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (key, value) in METRIC_KEYS.iter().zip(self.values()) {
            let _ = writeln!(out, "{key}={}", fmt_f64(value));
        }
        for (k, v) in &self.params {
            let _ = writeln!(out, "param.{k}={v}");
        }
        out
    }

    pub fn csv_header() -> String {
        METRIC_KEYS.join(",")
    }

    pub fn to_csv_row(&self) -> String {
        self.values()
            .iter()
            .map(|&v| fmt_f64(v))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn is_finite(&self) -> bool {
        self.values().iter().all(|v| v.is_finite())
    }

    pub fn save(&self, text_path: &Path, csv_path: Option<&Path>) -> Result<()> {
        std::fs::write(text_path, self.to_text())?;
        if let Some(p) = csv_path {
            std::fs::write(p, format!("{}\n{}\n", Self::csv_header(), self.to_csv_row()))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn report() -> MetricReport {
        MetricReport {
            fid_k: 1.5,
            fid_g: 0.25,
            div: 3.0,
            beat_align: 0.61,
            pff: 0.0,
            auc_f: 0.0,
            mpd: 0.12,
            params: vec![("beat_sigma".into(), "3".into())],
        }
    }

    #[test]
    fn text_block_has_every_metric_key_exactly_once() {
        let text = report().to_text();
        for key in METRIC_KEYS {
            let occurrences = text
                .lines()
                .filter(|l| l.starts_with(&format!("{key}=")))
                .count();
            assert_eq!(occurrences, 1, "{key}");
        }
        assert!(text.contains("param.beat_sigma=3"));
    }

    #[test]
    fn csv_row_aligns_with_header() {
        let header = MetricReport::csv_header();
        let row = report().to_csv_row();
        assert_eq!(header.split(',').count(), row.split(',').count());
    }
}

//! Benchmark reports and the work behind each CLI subcommand.

pub mod attention;
pub mod protocols;
pub mod tune;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::runtime::{estimate_time, CommLedger, NetworkPreset, Phase, Role};

pub use attention::{cmd_bench_attention, AttentionBenchConfig};
pub use protocols::{cmd_bench_protocols, ProtocolBenchConfig};
pub use tune::{cmd_tune, phase_rows, TuneRun, TuneSetup};

/// Bumped whenever columns change; reports with another version do not merge.
pub const SCHEMA_VERSION: u32 = 1;

/// One measured operation at one input size.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub operation: String,
    pub size: usize,
    /// Sequential online rounds.
    pub rounds: u64,
    /// Online bytes sent by the busiest party (a server, or the client
    /// when only inputs move).
    pub bytes_per_party: u64,
    /// Modeled online network time per preset.
    pub lan3g_s: f64,
    pub wan200_s: f64,
    pub wan100_s: f64,
    /// Measured local compute, zero unless timing was requested.
    pub compute_s: f64,
    /// Max abs error against the plaintext oracle.
    pub max_error: f64,
    pub seed: u64,
}

impl BenchRow {
    /// Fills the communication columns from the online phases of `ledger`.
    pub fn from_ledger(operation: &str, size: usize, ledger: &CommLedger, max_error: f64, seed: u64) -> Self {
        let [lan, w200, w100] = NetworkPreset::all().map(|net| estimate_time(ledger, &net, 0.0).network_s);
        let online =
            |role| Phase::ALL.iter().filter(|p| p.is_online()).map(|&p| ledger.entry(p, role).bytes).sum::<u64>();
        Self {
            operation: operation.into(),
            size,
            rounds: Phase::ALL.iter().filter(|p| p.is_online()).map(|&p| ledger.rounds_any(p)).sum(),
            bytes_per_party: [Role::S0, Role::S1, Role::Client].map(online).into_iter().max().unwrap_or(0),
            lan3g_s: lan,
            wan200_s: w200,
            wan100_s: w100,
            compute_s: 0.0,
            max_error,
            seed,
        }
    }

    fn key(&self) -> (String, usize, u64) {
        (self.operation.clone(), self.size, self.seed)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub schema: u32,
    pub rows: Vec<BenchRow>,
    /// Derived scalars such as fitted scaling exponents.
    #[serde(default)]
    pub metrics: BTreeMap<String, f64>,
}

impl Default for BenchmarkReport {
    fn default() -> Self {
        Self { schema: SCHEMA_VERSION, rows: Vec::new(), metrics: BTreeMap::new() }
    }
}

impl BenchmarkReport {
    pub fn row(&self, operation: &str, size: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.operation == operation && r.size == size)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("schema").and_then(|s| s.as_u64()) {
            Some(v) if v == SCHEMA_VERSION as u64 => Ok(serde_json::from_value(value)?),
            Some(v) => Err(Error::Schema(format!("report schema {v}, expected {SCHEMA_VERSION}"))),
            None => Err(Error::Schema("report has no schema version".into())),
        }
    }

    /// Rows as CSV. Metrics live only in the JSON form.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r)?;
        }
        String::from_utf8(w.into_inner().map_err(|e| Error::Io(e.into_error()))?)
            .map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn rows_from_csv(text: &str) -> Result<Vec<BenchRow>> {
        let mut r = csv::Reader::from_reader(text.as_bytes());
        Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
    }

    /// Writes `report.csv` and `report.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("report.csv"), self.to_csv()?)?;
        fs::write(dir.join("report.json"), self.to_json()?)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    /// Concatenates rows and metrics. The result is sorted, so input order
    /// does not matter; metrics present in several reports must agree.
    pub fn merge(reports: &[BenchmarkReport]) -> Result<Self> {
        if reports.is_empty() {
            return Err(Error::Empty("report list"));
        }
        let mut out = BenchmarkReport::default();
        for r in reports {
            if r.schema != SCHEMA_VERSION {
                return Err(Error::Schema(format!("report schema {}, expected {SCHEMA_VERSION}", r.schema)));
            }
            out.rows.extend(r.rows.iter().cloned());
            for (k, v) in &r.metrics {
                match out.metrics.insert(k.clone(), *v) {
                    Some(old) if old.to_bits() != v.to_bits() => {
                        return Err(Error::Schema(format!("metric {k} differs between reports ({old} vs {v})")))
                    }
                    _ => {}
                }
            }
        }
        out.rows.sort_by(|a, b| a.key().cmp(&b.key()).then(a.bytes_per_party.cmp(&b.bytes_per_party)));
        Ok(out)
    }

    /// A log-log plot of bytes per party against size, one line per
    /// operation with at least two sizes.
    pub fn bytes_plot_svg(&self) -> Option<String> {
        let mut series: BTreeMap<&str, Vec<(f64, f64)>> = BTreeMap::new();
        for r in self.rows.iter().filter(|r| r.size > 0 && r.bytes_per_party > 0) {
            series.entry(&r.operation).or_default().push(((r.size as f64).log10(), (r.bytes_per_party as f64).log10()));
        }
        series.retain(|_, pts| pts.len() >= 2);
        if series.is_empty() {
            return None;
        }
        let all: Vec<(f64, f64)> = series.values().flatten().copied().collect();
        let (x0, x1) = all.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.0), b.max(p.0)));
        let (y0, y1) = all.iter().fold((f64::MAX, f64::MIN), |(a, b), p| (a.min(p.1), b.max(p.1)));
        let (w, h, pad) = (640.0, 400.0, 60.0);
        let sx = |x: f64| pad + (x - x0) / (x1 - x0).max(1e-9) * (w - 2.0 * pad);
        let sy = |y: f64| h - pad - (y - y0) / (y1 - y0).max(1e-9) * (h - 2.0 * pad);
        let colours = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
        let mut svg = format!("<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n");
        let _ = writeln!(svg, "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
        let _ = writeln!(svg, "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">log10 size</text>", w / 2.0, h - 15.0);
        let _ = writeln!(svg, "<text x=\"15\" y=\"{}\" transform=\"rotate(-90 15 {})\" text-anchor=\"middle\">log10 bytes per party</text>", h / 2.0, h / 2.0);
        for (i, (name, pts)) in series.iter().enumerate() {
            let c = colours[i % colours.len()];
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.1},{:.1}", sx(x), sy(y))).collect();
            let _ = writeln!(
                svg,
                "<polyline fill=\"none\" stroke=\"{c}\" stroke-width=\"2\" points=\"{}\"/>",
                path.join(" ")
            );
            let _ =
                writeln!(svg, "<text x=\"{}\" y=\"{}\" fill=\"{c}\">{name}</text>", pad + 10.0, pad + 16.0 * i as f64);
        }
        svg.push_str("</svg>\n");
        Some(svg)
    }
}

/// Runs `f` and, when `timed`, stores its wall time in the row it returns.
pub(crate) fn timed_row(timed: bool, f: impl FnOnce() -> Result<BenchRow>) -> Result<BenchRow> {
    let t = std::time::Instant::now();
    let mut row = f()?;
    if timed {
        row.compute_s = t.elapsed().as_secs_f64();
    }
    Ok(row)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(op: &str, size: usize, bytes: u64) -> BenchRow {
        BenchRow {
            operation: op.into(),
            size,
            rounds: 1,
            bytes_per_party: bytes,
            lan3g_s: 0.1,
            wan200_s: 0.2,
            wan100_s: 1.0 / 3.0,
            compute_s: 0.0,
            max_error: 1e-5,
            seed: 1,
        }
    }

    fn report(rows: Vec<BenchRow>) -> BenchmarkReport {
        BenchmarkReport { rows, ..Default::default() }
    }

    #[test]
    fn json_and_csv_round_trip() {
        let mut r = report(vec![row("mul", 1, 16), row("exp", 8, 1234)]);
        r.metrics.insert("slope".into(), 1.9876543210123);
        assert_eq!(BenchmarkReport::from_json(&r.to_json().unwrap()).unwrap(), r);
        assert_eq!(BenchmarkReport::rows_from_csv(&r.to_csv().unwrap()).unwrap(), r.rows);
    }

    #[test]
    fn merge_properties() {
        let a = report(vec![row("mul", 1, 16), row("exp", 8, 100)]);
        let b = report(vec![row("cos", 2, 32)]);
        let single = BenchmarkReport::merge(std::slice::from_ref(&a)).unwrap();
        assert_eq!(single, BenchmarkReport::merge(&[single.clone()]).unwrap());
        let ab = BenchmarkReport::merge(&[a.clone(), b.clone()]).unwrap();
        let ba = BenchmarkReport::merge(&[b, a]).unwrap();
        assert_eq!(ab, ba);
        assert_eq!(ab.rows.len(), 3);
    }

    #[test]
    fn schema_mismatch_is_rejected() {
        let mut r = report(vec![]);
        r.schema = 99;
        assert!(matches!(BenchmarkReport::merge(&[r.clone()]), Err(Error::Schema(_))));
        assert!(matches!(BenchmarkReport::from_json(&r.to_json().unwrap()), Err(Error::Schema(_))));
        assert!(BenchmarkReport::merge(&[]).is_err());
    }

    #[test]
    fn plot_needs_two_points() {
        assert!(report(vec![row("mul", 1, 16)]).bytes_plot_svg().is_none());
        let svg = report(vec![row("rfa", 64, 100), row("rfa", 128, 200)]).bytes_plot_svg().unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("rfa"));
    }
}

//! Measurement tables as CSV files.
//!
//! ```text
//! # detector=threshold dark_count=1.0000000000000000e-6 efficiency=1.0000000000000000e0
//! x,9.4000000000000000e-1,9.6000000000000000e-1,...
//! 1.0000000000000000e-3,9.9999899999999995e-1,...
//! ```
//!
//! The comment line records the detector model. The header lists the
//! detector settings: attenuation levels for `threshold`, bins `lo:hi` for
//! `homodyne` and level pairs `nu0:nu1` for `threshold-pair`. Each body row
//! starts with the source intensity. Numbers are written with 17 significant
//! digits, so a write/read cycle reproduces the table bit for bit.

use std::collections::BTreeMap;
use std::path::Path;

use photon_bounds::table::{DetectorSpec, MeasurementTable};
use photon_bounds::{HomodyneDetector, ThresholdDetector};

use crate::error::{CliError, Result};

/// Fixed-width scientific notation with 17 significant digits.
pub fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn metadata(spec: &DetectorSpec) -> String {
    match spec {
        DetectorSpec::Threshold(d) => format!(
            "# detector=threshold dark_count={} efficiency={}",
            num(d.dark_count()),
            num(d.efficiency())
        ),
        DetectorSpec::Homodyne(d) => format!("# detector=homodyne efficiency={}", num(d.efficiency())),
        DetectorSpec::ThresholdPair(a, b) => format!(
            "# detector=threshold-pair dark_count_0={} efficiency_0={} dark_count_1={} efficiency_1={}",
            num(a.dark_count()),
            num(a.efficiency()),
            num(b.dark_count()),
            num(b.efficiency())
        ),
    }
}

fn settings(spec: &DetectorSpec) -> Vec<String> {
    match spec {
        DetectorSpec::Threshold(d) => d.attenuations().iter().map(|&v| num(v)).collect(),
        DetectorSpec::Homodyne(d) => (0..d.num_bins())
            .map(|j| d.bin(j))
            .map(|(lo, hi)| format!("{}:{}", num(lo), num(hi)))
            .collect(),
        DetectorSpec::ThresholdPair(a, b) => a
            .attenuations()
            .iter()
            .flat_map(|&u| {
                b.attenuations()
                    .iter()
                    .map(move |&v| format!("{}:{}", num(u), num(v)))
            })
            .collect(),
    }
}

pub fn write_table_string(table: &MeasurementTable) -> String {
    let mut out = metadata(&table.detector);
    out.push('\n');
    out.push('x');
    for s in settings(&table.detector) {
        out.push(',');
        out.push_str(&s);
    }
    out.push('\n');
    for (x, row) in table.intensities.iter().zip(&table.values) {
        out.push_str(&num(*x));
        for v in row {
            out.push(',');
            out.push_str(&num(*v));
        }
        out.push('\n');
    }
    out
}

pub fn write_table(table: &MeasurementTable, path: &Path) -> Result<()> {
    std::fs::write(path, write_table_string(table)).map_err(|e| CliError::io(path, e))
}

pub fn read_table(path: &Path) -> Result<MeasurementTable> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    read_table_str(&text, &path.display().to_string())
}

struct Ctx<'a> {
    origin: &'a str,
}

impl Ctx<'_> {
    fn err(&self, line: usize, column: usize, msg: impl Into<String>) -> CliError {
        CliError::Table {
            origin: self.origin.to_string(),
            line,
            column,
            msg: msg.into(),
        }
    }

    fn float(&self, s: &str, line: usize, column: usize) -> Result<f64> {
        let v: f64 = s
            .trim()
            .parse()
            .map_err(|_| self.err(line, column, format!("not a number: `{}`", s.trim())))?;
        if !v.is_finite() {
            return Err(self.err(line, column, format!("not finite: `{}`", s.trim())));
        }
        Ok(v)
    }

    fn pair(&self, s: &str, line: usize, column: usize) -> Result<(f64, f64)> {
        let (a, b) = s
            .split_once(':')
            .ok_or_else(|| self.err(line, column, format!("expected `a:b`, got `{s}`")))?;
        Ok((self.float(a, line, column)?, self.float(b, line, column)?))
    }
}

/// Parses a table; errors carry 1-based line and column numbers.
pub fn read_table_str(text: &str, origin: &str) -> Result<MeasurementTable> {
    let ctx = Ctx { origin };
    let (meta, body) = text.split_once('\n').unwrap_or((text, ""));
    let meta = meta
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| ctx.err(1, 1, "first line must be a `#` metadata comment"))?;
    let mut fields = BTreeMap::new();
    for kv in meta.split_whitespace() {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| ctx.err(1, 1, format!("metadata entry `{kv}` is not key=value")))?;
        fields.insert(k, v);
    }
    let meta_f64 = |k: &str| -> Result<f64> {
        let v = fields
            .get(k)
            .ok_or_else(|| ctx.err(1, 1, format!("metadata lacks `{k}`")))?;
        ctx.float(v, 1, 1)
    };

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(body.as_bytes());
    let header = reader
        .headers()
        .map_err(|e| ctx.err(2, 1, format!("unreadable header: {e}")))?
        .clone();
    if header.get(0).map(str::trim) != Some("x") {
        return Err(ctx.err(2, 1, "header must start with `x`"));
    }
    let cells: Vec<&str> = header.iter().skip(1).collect();
    if cells.is_empty() {
        return Err(ctx.err(2, 2, "header lists no detector settings"));
    }
    let kind = fields.get("detector").copied().unwrap_or("");
    let detector = match kind {
        "threshold" => {
            let levels = cells
                .iter()
                .enumerate()
                .map(|(k, c)| ctx.float(c, 2, k + 2))
                .collect::<Result<Vec<_>>>()?;
            DetectorSpec::Threshold(ThresholdDetector::new(
                meta_f64("dark_count")?,
                meta_f64("efficiency")?,
                levels,
            )?)
        }
        "homodyne" => {
            let bins = cells
                .iter()
                .enumerate()
                .map(|(k, c)| ctx.pair(c, 2, k + 2))
                .collect::<Result<Vec<_>>>()?;
            let mut edges = vec![bins[0].0];
            for (k, &(lo, hi)) in bins.iter().enumerate() {
                if lo != *edges.last().expect("non-empty") {
                    return Err(ctx.err(2, k + 2, "homodyne bins must be contiguous"));
                }
                edges.push(hi);
            }
            DetectorSpec::Homodyne(HomodyneDetector::new(meta_f64("efficiency")?, edges)?)
        }
        "threshold-pair" => {
            let pairs = cells
                .iter()
                .enumerate()
                .map(|(k, c)| ctx.pair(c, 2, k + 2))
                .collect::<Result<Vec<_>>>()?;
            let mut first: Vec<f64> = Vec::new();
            for p in &pairs {
                if !first.contains(&p.0) {
                    first.push(p.0);
                }
            }
            let n1 = pairs.len() / first.len();
            let second: Vec<f64> = pairs.iter().take(n1).map(|p| p.1).collect();
            for (k, p) in pairs.iter().enumerate() {
                if k >= first.len() * n1 || *p != (first[k / n1], second[k % n1]) {
                    return Err(ctx.err(2, k + 2, "level pairs must form a row-major grid"));
                }
            }
            DetectorSpec::ThresholdPair(
                ThresholdDetector::new(
                    meta_f64("dark_count_0")?,
                    meta_f64("efficiency_0")?,
                    first,
                )?,
                ThresholdDetector::new(
                    meta_f64("dark_count_1")?,
                    meta_f64("efficiency_1")?,
                    second,
                )?,
            )
        }
        other => return Err(ctx.err(1, 1, format!("unknown detector kind `{other}`"))),
    };

    let mut intensities = Vec::new();
    let mut values = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize + 1);
            ctx.err(line, 1, format!("malformed row: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line() as usize + 1);
        if rec.len() != header.len() {
            return Err(ctx.err(
                line,
                rec.len().min(header.len()) + 1,
                format!("row has {} fields, header has {}", rec.len(), header.len()),
            ));
        }
        intensities.push(ctx.float(&rec[0], line, 1)?);
        values.push(
            rec.iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| ctx.float(c, line, k + 1))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    if intensities.is_empty() {
        return Err(ctx.err(3, 1, "table has no rows"));
    }
    Ok(MeasurementTable::new(intensities, detector, values)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use photon_bounds::channel::PureLossChannel;
    use photon_bounds::PoissonSource;
    use proptest::prelude::*;

    fn threshold_table(t: f64) -> MeasurementTable {
        let source = PoissonSource::new(vec![1e-3, 1e-2, 0.5]).unwrap();
        let det = ThresholdDetector::new(1e-6, 1.0, vec![0.94, 0.96, 0.98, 1.0]).unwrap();
        PureLossChannel::new(t)
            .unwrap()
            .forward_table(&source, &DetectorSpec::Threshold(det))
            .unwrap()
    }

    #[test]
    fn threshold_round_trip_is_bit_exact() {
        let t = threshold_table(0.1);
        let back = read_table_str(&write_table_string(&t), "mem").unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn homodyne_and_pair_round_trip() {
        let h = HomodyneDetector::uniform(0.8, 5.0, 7).unwrap();
        let values = vec![vec![0.1; 7], vec![0.05; 7]];
        let t = MeasurementTable::new(vec![0.1, 0.3], DetectorSpec::Homodyne(h), values).unwrap();
        assert_eq!(read_table_str(&write_table_string(&t), "mem").unwrap(), t);

        let a = ThresholdDetector::new(1e-6, 1.0, vec![0.9, 1.0]).unwrap();
        let b = ThresholdDetector::new(2e-6, 0.9, vec![0.5, 0.7, 1.0]).unwrap();
        let t = MeasurementTable::new(
            vec![0.2],
            DetectorSpec::ThresholdPair(a, b),
            vec![vec![0.3; 6]],
        )
        .unwrap();
        assert_eq!(read_table_str(&write_table_string(&t), "mem").unwrap(), t);
    }

    #[test]
    fn malformed_inputs_report_positions() {
        let good = write_table_string(&threshold_table(0.1));
        let e = read_table_str(&good.replacen("# detector", "detector", 1), "f").unwrap_err();
        assert!(e.to_string().starts_with("f:1:1:"));
        let mut lines: Vec<String> = good.lines().map(String::from).collect();
        lines[3] = lines[3].replacen(',', ",abc,", 1);
        let e = read_table_str(&lines.join("\n"), "f").unwrap_err();
        assert!(e.to_string().starts_with("f:4:"), "{e}");
        let mut lines: Vec<String> = good.lines().map(String::from).collect();
        let mut cells: Vec<&str> = lines[1].split(',').collect();
        cells[1] = "nine";
        lines[1] = cells.join(",");
        let e = read_table_str(&lines.join("\n"), "f").unwrap_err();
        assert!(e.to_string().starts_with("f:2:2:"), "{e}");
        assert_eq!(e.exit_code(), 2);
    }

    proptest! {
        #[test]
        fn arbitrary_values_round_trip(vals in proptest::collection::vec(0.0f64..=1.0, 12)) {
            let det = ThresholdDetector::new(1e-6, 1.0, vec![0.94, 0.96, 0.98, 1.0]).unwrap();
            let values = vals.chunks(4).map(|c| c.to_vec()).collect();
            let t = MeasurementTable::new(vec![1e-3, 1e-2, 0.5], DetectorSpec::Threshold(det), values).unwrap();
            prop_assert_eq!(read_table_str(&write_table_string(&t), "mem").unwrap(), t);
        }
    }
}

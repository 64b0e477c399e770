//! Report records and their JSONL / CSV encodings.

use std::io::Write;

use serde::Serialize;
use time::format_description::well_known::Rfc3339;
use time::OffsetDateTime;

/// Compact view of a record, used for the CSV table.
#[derive(Debug, Clone, PartialEq, Serialize, Default)]
pub struct Summary {
    pub subject: String,
    pub quantity: String,
    pub value: Option<f64>,
    pub lower: Option<f64>,
    pub upper: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Versions {
    pub proxlab: &'static str,
    pub format: u32,
}

pub const VERSIONS: Versions = Versions {
    proxlab: env!("CARGO_PKG_VERSION"),
    format: 1,
};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Record {
    pub experiment: String,
    pub kind: &'static str,
    pub probe: usize,
    pub timestamp: String,
    pub config_hash: String,
    pub seed: u64,
    /// `None` for records that only report numbers.
    pub passed: Option<bool>,
    pub summary: Summary,
    pub payload: serde_json::Value,
    pub versions: Versions,
}

/// RFC 3339 time for `unix_seconds`; `SOURCE_DATE_EPOCH` pins it when no value is given.
pub fn timestamp(unix_seconds: Option<i64>) -> String {
    let secs = unix_seconds
        .or_else(|| std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok()))
        .unwrap_or_else(|| OffsetDateTime::now_utc().unix_timestamp());
    OffsetDateTime::from_unix_timestamp(secs)
        .unwrap_or(OffsetDateTime::UNIX_EPOCH)
        .format(&Rfc3339)
        .expect("RFC 3339 formatting of a valid date")
}

pub fn write_jsonl<W: Write>(records: &[Record], mut out: W) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_csv<W: Write>(records: &[Record], out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "experiment", "kind", "probe", "subject", "quantity", "value", "lower", "upper", "passed", "seed", "config_hash",
    ])?;
    for r in records {
        let s = &r.summary;
        w.write_record([
            r.experiment.clone(),
            r.kind.to_string(),
            r.probe.to_string(),
            s.subject.clone(),
            s.quantity.clone(),
            opt(s.value),
            opt(s.lower),
            opt(s.upper),
            r.passed.map(|p| p.to_string()).unwrap_or_default(),
            r.seed.to_string(),
            r.config_hash.clone(),
        ])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(passed: Option<bool>) -> Record {
        Record {
            experiment: "e".into(),
            kind: "checks",
            probe: 0,
            timestamp: timestamp(Some(0)),
            config_hash: "ab".into(),
            seed: 1,
            passed,
            summary: Summary { subject: "a, b".into(), quantity: "q".into(), value: Some(0.5), ..Default::default() },
            payload: serde_json::json!({"x": 1}),
            versions: VERSIONS,
        }
    }

    #[test]
    fn pinned_timestamp() {
        assert_eq!(timestamp(Some(0)), "1970-01-01T00:00:00Z");
    }

    #[test]
    fn jsonl_is_one_line_per_record() {
        let mut buf = Vec::new();
        write_jsonl(&[rec(Some(true)), rec(None)], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        let v: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        assert_eq!(v["passed"], true);
        assert_eq!(v["payload"]["x"], 1);
    }

    #[test]
    fn csv_quotes_fields() {
        let mut buf = Vec::new();
        write_csv(&[rec(Some(false))], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("e,checks,0,\"a, b\",q,0.5,,,false,1,ab"));
    }
}

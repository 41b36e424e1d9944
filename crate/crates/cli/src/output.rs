//! Result files.
//!
//! | file           | columns                                              | sorted by               |
//! |----------------|------------------------------------------------------|-------------------------|
//! | `traces`       | `iter,scheme,eta,delta,h,max_pu_gain`                | scheme, eta, iter       |
//! | `configs`      | `scheme,eta,antenna,x,w_re,w_im,h,delta`             | scheme, eta, antenna    |
//! | `patterns`     | `angle_rad,scheme,gain` (+ `gain_db`)                | scheme, angle           |
//! | `users`        | `scheme,role,index,angle_rad,gain`                   | scheme, role, index     |
//! | `sweeps`       | `h,scheme,gain_su1`                                  | scheme, h               |
//!
//! With `degrees` the angle columns are `angle_deg`. Schemes are ordered
//! UMA, UMA-AH, UMA-AW, UMA-AHAW, MA, FPA. Numbers carry 12 significant
//! digits in both formats. `manifest.json` lists every written file with its
//! size and SHA-256 digest.

use std::cmp::Ordering;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use uma_core::bench::{ExperimentResult, PatternResult, Scheme, SweepPoint};
use uma_core::scenario::Scenario;

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct EmitOptions {
    pub format: Format,
    pub degrees: bool,
    pub db_column: bool,
}

/// Gain toward one user in a pattern run.
#[derive(Debug, Clone, PartialEq)]
pub struct Marker {
    pub scheme: Scheme,
    pub role: &'static str,
    pub index: usize,
    pub angle: f64,
    pub gain: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ResultSet {
    pub runs: Vec<ExperimentResult>,
    /// Whether `runs` also produce the final-configuration table.
    pub with_configs: bool,
    pub patterns: Vec<PatternResult>,
    pub markers: Vec<Marker>,
    pub sweeps: Vec<(Scheme, Vec<SweepPoint>)>,
    /// Written back as `scenario.toml` when present.
    pub scenario: Option<Scenario>,
}

impl ResultSet {
    pub fn is_empty(&self) -> bool {
        self.runs.is_empty() && self.patterns.is_empty() && self.sweeps.is_empty() && self.scenario.is_none()
    }

    /// Pattern results plus the gain toward every user at the final height.
    pub fn patterns(scenario: &Scenario, patterns: Vec<PatternResult>) -> Result<Self, CliError> {
        let mut markers = Vec::new();
        for p in &patterns {
            let r = &p.result;
            let h = r.config.height;
            let su = scenario.su_angles(h).map_err(CliError::from_core)?;
            let pu = scenario.pu_angles(h).map_err(CliError::from_core)?;
            for (role, angles, gains) in [("su", su, &r.su_gains), ("pu", pu, &r.pu_gains)] {
                for (index, (&angle, &gain)) in angles.iter().zip(gains.iter()).enumerate() {
                    markers.push(Marker {
                        scheme: r.scheme,
                        role,
                        index,
                        angle,
                        gain,
                    });
                }
            }
        }
        Ok(Self {
            patterns,
            markers,
            ..Default::default()
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Default)]
pub struct Manifest {
    pub files: Vec<ManifestEntry>,
}

enum Cell {
    Num(f64),
    Int(usize),
    Text(String),
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::Num(v) => sig12(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> serde_json::Value {
        match self {
            // the rounded text parses back to the value that prints as it
            Cell::Num(v) if v.is_finite() => serde_json::Value::from(sig12(*v).parse::<f64>().unwrap_or(*v)),
            Cell::Num(_) => serde_json::Value::Null,
            Cell::Int(v) => serde_json::Value::from(*v),
            Cell::Text(s) => serde_json::Value::from(s.as_str()),
        }
    }
}

struct Table {
    name: &'static str,
    header: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

/// `v` with 12 significant digits, fixed notation for exponents in `[-5, 12)`.
pub fn sig12(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-5..12).contains(&exp) {
        let fixed = format!("{:.*}", (11 - exp) as usize, v);
        trim_zeros(&fixed).to_string()
    } else {
        format!("{}e{exp}", trim_zeros(mantissa))
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

fn by_key(a: &(Scheme, f64, f64), b: &(Scheme, f64, f64)) -> Ordering {
    a.0.cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.total_cmp(&b.2))
}

fn tables(set: &ResultSet, opts: &EmitOptions) -> Vec<Table> {
    let angle_col = if opts.degrees { "angle_deg" } else { "angle_rad" };
    let angle = |a: f64| if opts.degrees { a.to_degrees() } else { a };
    let mut out = Vec::new();

    if !set.runs.is_empty() {
        let mut keyed: Vec<((Scheme, f64, f64), Vec<Cell>)> = Vec::new();
        for r in &set.runs {
            for t in &r.trace.records {
                keyed.push((
                    (r.scheme, r.eta, t.iteration as f64),
                    vec![
                        Cell::Int(t.iteration),
                        Cell::Text(r.scheme.name().into()),
                        Cell::Num(r.eta),
                        Cell::Num(t.delta),
                        Cell::Num(t.height),
                        Cell::Num(t.max_pu_gain),
                    ],
                ));
            }
        }
        keyed.sort_by(|a, b| by_key(&a.0, &b.0));
        out.push(Table {
            name: "traces",
            header: vec!["iter", "scheme", "eta", "delta", "h", "max_pu_gain"],
            rows: keyed.into_iter().map(|(_, r)| r).collect(),
        });
    }

    if set.with_configs && !set.runs.is_empty() {
        let mut keyed = Vec::new();
        for r in &set.runs {
            let c = &r.config;
            for (i, (x, w)) in c.apv.iter().zip(&c.awv).enumerate() {
                keyed.push((
                    (r.scheme, r.eta, i as f64),
                    vec![
                        Cell::Text(r.scheme.name().into()),
                        Cell::Num(r.eta),
                        Cell::Int(i),
                        Cell::Num(*x),
                        Cell::Num(w.re),
                        Cell::Num(w.im),
                        Cell::Num(c.height),
                        Cell::Num(r.delta),
                    ],
                ));
            }
        }
        keyed.sort_by(|a, b| by_key(&a.0, &b.0));
        out.push(Table {
            name: "configs",
            header: vec!["scheme", "eta", "antenna", "x", "w_re", "w_im", "h", "delta"],
            rows: keyed.into_iter().map(|(_, r)| r).collect(),
        });
    }

    if !set.patterns.is_empty() {
        let mut keyed = Vec::new();
        for p in &set.patterns {
            for (&a, &g) in p.angles.iter().zip(&p.gains) {
                let mut row = vec![
                    Cell::Num(angle(a)),
                    Cell::Text(p.result.scheme.name().into()),
                    Cell::Num(g),
                ];
                if opts.db_column {
                    row.push(Cell::Num(10.0 * g.log10()));
                }
                keyed.push(((p.result.scheme, a, 0.0), row));
            }
        }
        keyed.sort_by(|a, b| by_key(&a.0, &b.0));
        let mut header = vec![angle_col, "scheme", "gain"];
        if opts.db_column {
            header.push("gain_db");
        }
        out.push(Table {
            name: "patterns",
            header,
            rows: keyed.into_iter().map(|(_, r)| r).collect(),
        });

        let mut markers: Vec<&Marker> = set.markers.iter().collect();
        markers.sort_by(|a, b| a.scheme.cmp(&b.scheme).then(b.role.cmp(a.role)).then(a.index.cmp(&b.index)));
        out.push(Table {
            name: "users",
            header: vec!["scheme", "role", "index", angle_col, "gain"],
            rows: markers
                .into_iter()
                .map(|m| {
                    vec![
                        Cell::Text(m.scheme.name().into()),
                        Cell::Text(m.role.into()),
                        Cell::Int(m.index),
                        Cell::Num(angle(m.angle)),
                        Cell::Num(m.gain),
                    ]
                })
                .collect(),
        });
    }

    if !set.sweeps.is_empty() {
        let mut keyed = Vec::new();
        for (scheme, curve) in &set.sweeps {
            for p in curve {
                keyed.push((
                    (*scheme, p.height, 0.0),
                    vec![Cell::Num(p.height), Cell::Text(scheme.name().into()), Cell::Num(p.gain_su1)],
                ));
            }
        }
        keyed.sort_by(|a, b| by_key(&a.0, &b.0));
        out.push(Table {
            name: "sweeps",
            header: vec!["h", "scheme", "gain_su1"],
            rows: keyed.into_iter().map(|(_, r)| r).collect(),
        });
    }
    out
}

fn render(table: &Table, format: Format) -> Vec<u8> {
    match format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(&table.header).expect("in-memory write");
            for row in &table.rows {
                w.write_record(row.iter().map(Cell::text)).expect("in-memory write");
            }
            w.into_inner().expect("in-memory flush")
        }
        Format::Json => {
            let rows: Vec<serde_json::Map<String, serde_json::Value>> = table
                .rows
                .iter()
                .map(|row| {
                    table
                        .header
                        .iter()
                        .zip(row)
                        .map(|(k, c)| (k.to_string(), c.json()))
                        .collect()
                })
                .collect();
            let mut bytes = serde_json::to_vec_pretty(&rows).expect("plain values");
            bytes.push(b'\n');
            bytes
        }
    }
}

fn write(dir: &Path, name: &str, bytes: &[u8]) -> Result<ManifestEntry, CliError> {
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|source| CliError::Io { path, source })?;
    Ok(ManifestEntry {
        path: name.to_string(),
        bytes: bytes.len() as u64,
        sha256: format!("{:x}", Sha256::digest(bytes)),
    })
}

/// Writes the data files and `manifest.json` into `dir`, creating it if needed.
pub fn emit_results(set: &ResultSet, opts: &EmitOptions, dir: &Path) -> Result<Manifest, CliError> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut manifest = Manifest::default();
    for table in tables(set, opts) {
        let name = format!("{}.{}", table.name, opts.format.extension());
        manifest.files.push(write(dir, &name, &render(&table, opts.format))?);
    }
    if let Some(s) = &set.scenario {
        manifest
            .files
            .push(write(dir, "scenario.toml", crate::config::emit_scenario(s).as_bytes())?);
    }
    manifest.files.sort_by(|a, b| a.path.cmp(&b.path));
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("plain values");
    bytes.push(b'\n');
    let path: PathBuf = dir.join("manifest.json");
    fs::write(&path, bytes).map_err(|source| CliError::Io { path, source })?;
    Ok(manifest)
}

//! File formats: network tables, time-series CSV, PTDF export, PCA export,
//! overlap/bounds tables and flat `key = value` configuration.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, NaiveDateTime, Utc};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::duality::{MajorizationBounds, OverlapEntry, ScanRow};
use crate::error::{Error, Result};
use crate::grid::{bounding_box_area, Line, Network, Node, PtdfMatrix};
use crate::pca::{PcaResult, Periodogram};
use crate::series::TimeSeriesEnsemble;
use crate::synth::{ShareProfile, WeatherParams};

pub const NODES_HEADER: [&str; 5] = ["node_id", "x_km", "y_km", "country", "mean_load_mw"];
pub const LINES_HEADER: [&str; 4] = ["line_id", "from_node", "to_node", "reactance_pu"];
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line()).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(source) => Error::io(path, source),
        kind => Error::Parse {
            path: path.to_path_buf(),
            line,
            message: describe_kind(kind),
        },
    }
}

fn describe_kind(kind: csv::ErrorKind) -> String {
    match kind {
        csv::ErrorKind::Deserialize { err, .. } => err.to_string(),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => {
            format!("expected {expected_len} fields, found {len}")
        }
        csv::ErrorKind::Utf8 { err, .. } => format!("invalid UTF-8: {err}"),
        other => format!("{other:?}"),
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn check_header(path: &Path, rdr: &mut csv::Reader<File>, expected: &[&str]) -> Result<()> {
    let header = rdr.headers().map_err(|e| csv_error(path, e))?;
    let found: Vec<&str> = header.iter().collect();
    if found != expected {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: format!(
                "expected header `{}`, found `{}`",
                expected.join(","),
                found.join(",")
            ),
        });
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct NodeRecord {
    node_id: String,
    x_km: f64,
    y_km: f64,
    country: String,
    mean_load_mw: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct LineRecord {
    line_id: String,
    from_node: String,
    to_node: String,
    reactance_pu: f64,
}

pub fn read_nodes(path: &Path) -> Result<Vec<Node>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &NODES_HEADER)?;
    rdr.deserialize::<NodeRecord>()
        .map(|r| {
            r.map(|r| Node {
                id: r.node_id,
                x: r.x_km,
                y: r.y_km,
                country: r.country,
                mean_load: r.mean_load_mw,
            })
            .map_err(|e| csv_error(path, e))
        })
        .collect()
}

pub fn read_lines(path: &Path) -> Result<Vec<Line>> {
    let mut rdr = reader(path)?;
    check_header(path, &mut rdr, &LINES_HEADER)?;
    rdr.deserialize::<LineRecord>()
        .map(|r| {
            r.map(|r| Line {
                id: r.line_id,
                from: r.from_node,
                to: r.to_node,
                reactance: r.reactance_pu,
            })
            .map_err(|e| csv_error(path, e))
        })
        .collect()
}

/// Reads both tables. Without an explicit area the bounding box of the
/// node coordinates is used.
pub fn read_network(nodes: &Path, lines: &Path, area_km2: Option<f64>) -> Result<Network> {
    let nodes = read_nodes(nodes)?;
    let lines = read_lines(lines)?;
    let area = match area_km2 {
        Some(a) => a,
        None => {
            let a = bounding_box_area(&nodes);
            if !(a > 0.0) {
                return Err(Error::validation(
                    "node coordinates span no area; set the network area explicitly",
                ));
            }
            a
        }
    };
    Network::new(nodes, lines, area)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn csv_writer(path: &Path) -> Result<csv::Writer<BufWriter<File>>> {
    Ok(csv::Writer::from_writer(create(path)?))
}

fn finish(path: &Path, w: csv::Writer<BufWriter<File>>) -> Result<()> {
    let mut inner = w
        .into_inner()
        .map_err(|e| Error::io(path, std::io::Error::other(e.to_string())))?;
    inner.flush().map_err(|e| Error::io(path, e))
}

pub fn write_network(network: &Network, nodes: &Path, lines: &Path) -> Result<()> {
    let mut w = csv_writer(nodes)?;
    for n in network.nodes() {
        w.serialize(NodeRecord {
            node_id: n.id.clone(),
            x_km: n.x,
            y_km: n.y,
            country: n.country.clone(),
            mean_load_mw: n.mean_load,
        })
        .map_err(|e| csv_error(nodes, e))?;
    }
    finish(nodes, w)?;
    let mut w = csv_writer(lines)?;
    for l in network.lines() {
        w.serialize(LineRecord {
            line_id: l.id.clone(),
            from_node: l.from.clone(),
            to_node: l.to.clone(),
            reactance_pu: l.reactance,
        })
        .map_err(|e| csv_error(lines, e))?;
    }
    finish(lines, w)
}

/// Accepts RFC 3339 and naive `YYYY-MM-DD[T ]HH:MM[:SS]` (taken as UTC).
pub fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    if let Ok(t) = DateTime::parse_from_rfc3339(s) {
        return Some(t.with_timezone(&Utc));
    }
    [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ]
    .iter()
    .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
    .map(|n| n.and_utc())
}

pub fn format_timestamp(t: &DateTime<Utc>) -> String {
    t.format(TIMESTAMP_FORMAT).to_string()
}

pub fn read_series(path: &Path) -> Result<TimeSeriesEnsemble> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.get(0) != Some("timestamp") {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "first column must be `timestamp`".into(),
        });
    }
    let labels: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut timestamps = Vec::new();
    let mut data = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        let bad = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let ts = parse_timestamp(&rec[0])
            .ok_or_else(|| bad(format!("invalid timestamp `{}`", &rec[0])))?;
        timestamps.push(ts);
        for (field, label) in rec.iter().skip(1).zip(&labels) {
            let v: f64 = field
                .parse()
                .map_err(|_| bad(format!("invalid number `{field}` in column `{label}`")))?;
            data.push(v);
        }
    }
    let rows = timestamps.len();
    let values = DMatrix::from_row_slice(rows, labels.len(), &data);
    TimeSeriesEnsemble::new(timestamps, labels, values)
}

/// Values use the shortest representation that parses back exactly.
pub fn write_series(path: &Path, series: &TimeSeriesEnsemble) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["timestamp".to_string()];
    header.extend(series.labels().iter().cloned());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    let values = series.values();
    for (r, ts) in series.timestamps().iter().enumerate() {
        let mut row = Vec::with_capacity(values.ncols() + 1);
        row.push(format_timestamp(ts));
        row.extend(values.row(r).iter().map(|v| v.to_string()));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// 17 significant digits.
pub fn format_sig17(v: f64) -> String {
    format!("{v:.16e}")
}

/// L rows x N columns, labelled by line and node ids.
pub fn write_ptdf(path: &Path, ptdf: &PtdfMatrix) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["line_id".to_string()];
    header.extend(ptdf.node_ids().iter().cloned());
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (l, id) in ptdf.line_ids().iter().enumerate() {
        let mut row = vec![id.clone()];
        row.extend(ptdf.h().row(l).iter().map(|v| format_sig17(*v)));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// Parsed PTDF export: line ids, node ids and the L x N matrix.
pub fn read_ptdf(path: &Path) -> Result<(Vec<String>, Vec<String>, DMatrix<f64>)> {
    let mut rdr = reader(path)?;
    let header = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let nodes: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut lines = Vec::new();
    let mut data = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = rec.position().map(|p| p.line()).unwrap_or(0);
        lines.push(rec[0].to_string());
        for f in rec.iter().skip(1) {
            data.push(f.parse::<f64>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("invalid number `{f}`"),
            })?);
        }
    }
    let m = DMatrix::from_row_slice(lines.len(), nodes.len(), &data);
    Ok((lines, nodes, m))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaExport {
    pub labels: Vec<String>,
    pub threshold: f64,
    pub k: usize,
    pub eigenvalues: Vec<f64>,
    pub normalized_eigenvalues: Vec<f64>,
    /// One inner array per principal axis, in descending eigenvalue order.
    pub axes: Vec<Vec<f64>>,
    pub mean: Option<Vec<f64>>,
}

impl PcaExport {
    pub fn new(labels: &[String], result: &PcaResult, threshold: f64) -> Result<Self> {
        Ok(Self {
            labels: labels.to_vec(),
            threshold,
            k: result.count_k(threshold)?,
            eigenvalues: result.eigenvalues.iter().copied().collect(),
            normalized_eigenvalues: result.normalized_eigenvalues.iter().copied().collect(),
            axes: result
                .axes
                .column_iter()
                .map(|c| c.iter().copied().collect())
                .collect(),
            mean: result.mean.as_ref().map(|m| m.iter().copied().collect()),
        })
    }
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_reader(std::io::BufReader::new(file)).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line() as u64,
        message: e.to_string(),
    })
}

/// First `k` amplitude columns as `timestamp,beta_1,...`.
pub fn write_amplitudes(
    path: &Path,
    timestamps: &[DateTime<Utc>],
    beta: &DMatrix<f64>,
    k: usize,
) -> Result<()> {
    let k = k.min(beta.ncols());
    let mut w = csv_writer(path)?;
    let mut header = vec!["timestamp".to_string()];
    header.extend((1..=k).map(|i| format!("beta_{i}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for (r, ts) in timestamps.iter().enumerate() {
        let mut row = vec![format_timestamp(ts)];
        row.extend((0..k).map(|c| beta[(r, c)].to_string()));
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// Long format: `component,frequency_per_hour,power`.
pub fn write_psd(path: &Path, spectra: &[Periodogram]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["component", "frequency_per_hour", "power"])
        .map_err(|e| csv_error(path, e))?;
    for (k, s) in spectra.iter().enumerate() {
        for (f, p) in s.frequency.iter().zip(&s.power) {
            w.write_record([(k + 1).to_string(), f.to_string(), p.to_string()])
                .map_err(|e| csv_error(path, e))?;
        }
    }
    finish(path, w)
}

/// `hour,beta_1,...`; hours without samples are left empty.
pub fn write_daytime_profiles(path: &Path, profiles: &[Vec<Option<f64>>]) -> Result<()> {
    let mut w = csv_writer(path)?;
    let mut header = vec!["hour".to_string()];
    header.extend((1..=profiles.len()).map(|i| format!("beta_{i}")));
    w.write_record(&header).map_err(|e| csv_error(path, e))?;
    for h in 0..24 {
        let mut row = vec![h.to_string()];
        row.extend(
            profiles
                .iter()
                .map(|p| p[h].map(|v| v.to_string()).unwrap_or_default()),
        );
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// `rank,k,m,O_norm,pure_product_norm`.
pub fn write_overlap(path: &Path, entries: &[OverlapEntry]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["rank", "k", "m", "O_norm", "pure_product_norm"])
        .map_err(|e| csv_error(path, e))?;
    for e in entries {
        w.write_record([
            e.rank.to_string(),
            e.k.to_string(),
            e.m.to_string(),
            e.normalized.to_string(),
            e.pure_product_normalized.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// `K,lower,partial_sum,upper`.
pub fn write_bounds(path: &Path, bounds: &MajorizationBounds) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["K", "lower", "partial_sum", "upper"])
        .map_err(|e| csv_error(path, e))?;
    for (i, ((lo, p), up)) in bounds
        .lower
        .iter()
        .zip(&bounds.partial_sums)
        .zip(&bounds.upper)
        .enumerate()
    {
        w.write_record([
            (i + 1).to_string(),
            lo.to_string(),
            p.to_string(),
            up.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// `k,eigenvalue,normalized,cumulative`, k 1-based.
pub fn write_eigenvalues(path: &Path, result: &PcaResult) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["k", "eigenvalue", "normalized", "cumulative"])
        .map_err(|e| csv_error(path, e))?;
    let mut acc = 0.0;
    for (k, (l, n)) in result
        .eigenvalues
        .iter()
        .zip(result.normalized_eigenvalues.iter())
        .enumerate()
    {
        acc += n;
        w.write_record([
            (k + 1).to_string(),
            l.to_string(),
            n.to_string(),
            acc.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// `N,K_injection,K_flow,xi_km`.
pub fn write_scan(path: &Path, rows: &[ScanRow]) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["N", "K_injection", "K_flow", "xi_km"])
        .map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.write_record([
            r.n.to_string(),
            r.k_injection.to_string(),
            r.k_flow.to_string(),
            r.xi_km.to_string(),
        ])
        .map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// `country,alpha`.
pub fn write_shares(path: &Path, shares: &ShareProfile) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(["country", "alpha"])
        .map_err(|e| csv_error(path, e))?;
    for (c, a) in &shares.alpha {
        w.write_record([c.clone(), a.to_string()])
            .map_err(|e| csv_error(path, e))?;
    }
    finish(path, w)
}

/// One `key = value` line of a flat configuration file.
#[derive(Debug, Clone, PartialEq)]
pub struct KvEntry {
    pub key: String,
    pub value: String,
    pub line: u64,
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped;
/// values may be wrapped in double quotes. Duplicate keys are errors.
pub fn parse_kv(text: &str, path: &Path) -> Result<Vec<KvEntry>> {
    let mut out: Vec<KvEntry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i as u64 + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (k, v) = content.split_once('=').ok_or_else(|| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let key = k.trim().to_string();
        let mut value = v.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        if key.is_empty() {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: "empty key".into(),
            });
        }
        if out.iter().any(|e| e.key == key) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("duplicate key `{key}`"),
            });
        }
        out.push(KvEntry {
            key,
            value: value.to_string(),
            line,
        });
    }
    Ok(out)
}

pub fn read_kv(path: &Path) -> Result<Vec<KvEntry>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_kv(&text, path)
}

fn parse_value<T: std::str::FromStr>(entry: &KvEntry, path: &Path) -> Result<T> {
    entry.value.parse().map_err(|_| Error::Parse {
        path: path.to_path_buf(),
        line: entry.line,
        message: format!("invalid value `{}` for `{}`", entry.value, entry.key),
    })
}

/// Keys understood by [`apply_weather_key`].
pub const WEATHER_KEYS: [&str; 19] = [
    "wind_correlation_length_km",
    "solar_correlation_length_km",
    "wind_mean_cf",
    "wind_std",
    "wind_seasonal_amplitude",
    "wind_diurnal_amplitude",
    "wind_autocorrelation_hours",
    "solar_peak_cf",
    "solar_seasonal_amplitude",
    "solar_daylength_amplitude_hours",
    "solar_north_gradient",
    "solar_cloud_std",
    "solar_autocorrelation_hours",
    "reference_x_km",
    "km_per_hour",
    "jitter",
    "start",
    "seed",
    "noise_autocorrelation_hours",
];

/// Sets one weather parameter; `Ok(false)` when the key is not a weather key.
/// `noise_autocorrelation_hours` sets both wind and solar noise time scales.
pub fn apply_weather_key(params: &mut WeatherParams, entry: &KvEntry, path: &Path) -> Result<bool> {
    let f = || parse_value::<f64>(entry, path);
    match entry.key.as_str() {
        "wind_correlation_length_km" => params.wind_correlation_length_km = f()?,
        "solar_correlation_length_km" => params.solar_correlation_length_km = f()?,
        "wind_mean_cf" => params.wind_mean_cf = f()?,
        "wind_std" => params.wind_std = f()?,
        "wind_seasonal_amplitude" => params.wind_seasonal_amplitude = f()?,
        "wind_diurnal_amplitude" => params.wind_diurnal_amplitude = f()?,
        "wind_autocorrelation_hours" => params.wind_autocorrelation_hours = f()?,
        "solar_peak_cf" => params.solar_peak_cf = f()?,
        "solar_seasonal_amplitude" => params.solar_seasonal_amplitude = f()?,
        "solar_daylength_amplitude_hours" => params.solar_daylength_amplitude_hours = f()?,
        "solar_north_gradient" => params.solar_north_gradient = f()?,
        "solar_cloud_std" => params.solar_cloud_std = f()?,
        "solar_autocorrelation_hours" => params.solar_autocorrelation_hours = f()?,
        "noise_autocorrelation_hours" => {
            let v = f()?;
            params.wind_autocorrelation_hours = v;
            params.solar_autocorrelation_hours = v;
        }
        "reference_x_km" => params.clock.reference_x_km = f()?,
        "km_per_hour" => params.clock.km_per_hour = f()?,
        "jitter" => params.jitter = f()?,
        "seed" => params.seed = parse_value(entry, path)?,
        "start" => {
            params.start = parse_timestamp(&entry.value).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: entry.line,
                message: format!("invalid timestamp `{}`", entry.value),
            })?
        }
        _ => return Ok(false),
    }
    Ok(true)
}

/// Weather parameters from a flat config file; unknown keys are errors.
pub fn read_weather_params(path: &Path) -> Result<WeatherParams> {
    let mut params = WeatherParams::default();
    for entry in read_kv(path)? {
        if !apply_weather_key(&mut params, &entry, path)? {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: entry.line,
                message: format!("unknown key `{}`", entry.key),
            });
        }
    }
    params.validate()?;
    Ok(params)
}

/// `dir/name` helper used by the experiment commands.
pub fn out_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(name)
}

//! Event ingestion and emission.
//!
//! Events live in a directory of CSV files, one per event, rows =
//! samples and columns = sensors, next to a manifest CSV with the header
//! `event_id,label,sample_rate`. The manifest's `event_id` names the
//! event file `<event_id>.csv`; all events must share the sensor count,
//! sample count and sample rate.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::shm::features::EventMatrix;

/// Labelled raw events as loaded from disk.
#[derive(Debug, Clone)]
pub struct LoadedEvents {
    pub events: EventMatrix,
    pub labels: Vec<String>,
    pub ids: Vec<String>,
}

/// Parse a manifest CSV into `(event_id, label, sample_rate)` rows.
fn read_manifest(path: &Path) -> Result<Vec<(String, String, f64)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(File::open(path)?);
    let mut rows = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let line = idx + 1;
        if line == 1 && record.get(0) == Some("event_id") {
            continue;
        }
        if record.len() != 3 {
            return Err(Error::Parse {
                line,
                detail: format!(
                    "manifest rows need event_id,label,sample_rate, got {} fields",
                    record.len()
                ),
            });
        }
        let rate: f64 = record[2].parse().map_err(|_| Error::Parse {
            line,
            detail: format!("bad sample_rate {:?}", &record[2]),
        })?;
        if rate <= 0.0 || !rate.is_finite() {
            return Err(Error::Parse {
                line,
                detail: format!("sample_rate must be positive, got {rate}"),
            });
        }
        if record[0].is_empty() || record[1].is_empty() {
            return Err(Error::Parse {
                line,
                detail: "empty event_id or label".into(),
            });
        }
        rows.push((record[0].to_string(), record[1].to_string(), rate));
    }
    if rows.is_empty() {
        return Err(Error::BadFormat(format!(
            "manifest {} lists no events",
            path.display()
        )));
    }
    Ok(rows)
}

/// Read one event file: rows = samples, columns = sensors. Returns the
/// samples in sample-major order and the sensor count.
fn read_event_csv(path: &Path) -> Result<(Vec<f64>, usize)> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(File::open(path)?);
    let mut data = Vec::new();
    let mut sensors = 0usize;
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let line = idx + 1;
        if line == 1 && record.get(0).map_or(false, |f| f.parse::<f64>().is_err()) {
            continue; // header row
        }
        if sensors == 0 {
            sensors = record.len();
        } else if record.len() != sensors {
            return Err(Error::Parse {
                line,
                detail: format!("expected {sensors} columns, got {}", record.len()),
            });
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                line,
                detail: format!("bad sample {field:?} in {}", path.display()),
            })?;
            data.push(v);
        }
    }
    if data.is_empty() {
        return Err(Error::BadFormat(format!("{} has no samples", path.display())));
    }
    Ok((data, sensors))
}

/// Load a manifest and its event files into an [`EventMatrix`].
pub fn load_events<P: AsRef<Path>>(events_dir: P, manifest: P) -> Result<LoadedEvents> {
    let dir = events_dir.as_ref();
    let rows = read_manifest(manifest.as_ref())?;

    let rate = rows[0].2;
    if rows.iter().any(|r| r.2 != rate) {
        return Err(Error::BadFormat(
            "events disagree on sample_rate in the manifest".into(),
        ));
    }

    let mut labels = Vec::with_capacity(rows.len());
    let mut ids = Vec::with_capacity(rows.len());
    let mut all = Vec::new();
    let mut sensors = 0usize;
    let mut samples = 0usize;
    for (id, label, _) in rows {
        let (event_data, event_sensors) = read_event_csv(&dir.join(format!("{id}.csv")))?;
        let event_samples = event_data.len() / event_sensors;
        if sensors == 0 {
            sensors = event_sensors;
            samples = event_samples;
        } else if event_sensors != sensors || event_samples != samples {
            return Err(Error::BadFormat(format!(
                "event {id} is {event_samples}x{event_sensors}, expected {samples}x{sensors}"
            )));
        }
        // Transpose sample-major rows into per-sensor signals.
        for s in 0..sensors {
            for n in 0..samples {
                all.push(event_data[n * sensors + s]);
            }
        }
        labels.push(label);
        ids.push(id);
    }
    let events = EventMatrix::new(sensors, samples, labels.len(), rate, all)?;
    Ok(LoadedEvents {
        events,
        labels,
        ids,
    })
}

/// Write events and a manifest in the layout [`load_events`] reads. Event
/// ids are `event_0000`, `event_0001`, ... in event order.
pub fn save_events<P: AsRef<Path>>(
    events_dir: P,
    manifest: P,
    events: &EventMatrix,
    labels: &[String],
) -> Result<Vec<String>> {
    if labels.len() != events.events() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} events",
            labels.len(),
            events.events()
        )));
    }
    let dir = events_dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut manifest_out = BufWriter::new(File::create(manifest.as_ref())?);
    writeln!(manifest_out, "event_id,label,sample_rate")?;
    let mut ids = Vec::with_capacity(events.events());
    for e in 0..events.events() {
        let id = format!("event_{e:04}");
        let mut out = BufWriter::new(File::create(dir.join(format!("{id}.csv")))?);
        for n in 0..events.samples() {
            for s in 0..events.sensors() {
                if s > 0 {
                    write!(out, ",")?;
                }
                write!(out, "{:.17e}", events.signal(e, s)[n])?;
            }
            writeln!(out)?;
        }
        out.flush()?;
        writeln!(
            manifest_out,
            "{id},{},{}",
            labels[e],
            events.sample_rate()
        )?;
        ids.push(id);
    }
    manifest_out.flush()?;
    Ok(ids)
}

//! CSV and JSON serialisation of spectra and cancellation maps.
//!
//! Grids are written as ordinary frequency [Hz]; spectra in m²/Hz. Values
//! carry 12 significant digits.

use std::fs;
use std::io::{BufReader, Read, Write};
use std::path::{Path, PathBuf};

use crate::constants::{hz_to_rad, rad_to_hz};
use crate::error::{Error, Result};
use crate::qlt::{SpectraMetadata, SpectraSet};
use crate::rotation::CancellationMap;

pub const SPECTRA_HEADER: &str = "omega_hz,sxx,syy,sxy";
pub const MAP_HEADER: &str = "kappa_hz,delta_hz,phic_over_2pi";

/// Formats with 12 significant digits; negative zero prints as zero.
pub fn fmt_value(v: f64) -> String {
    format!("{:.11e}", v + 0.0)
}

pub fn write_spectra_csv(w: impl Write, s: &SpectraSet) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(SPECTRA_HEADER.split(',')).map_err(csv_error)?;
    for i in 0..s.len() {
        out.write_record([
            fmt_value(rad_to_hz(s.omega[i])),
            fmt_value(s.sxx[i]),
            fmt_value(s.syy[i]),
            fmt_value(s.sxy[i]),
        ])
        .map_err(csv_error)?;
    }
    out.flush()?;
    Ok(())
}

fn csv_error(e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        kind => Error::Parse {
            line,
            message: format!("{kind:?}"),
        },
    }

}

pub fn read_spectra_csv(r: impl Read) -> Result<SpectraSet> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
    let header: Vec<String> = reader.headers().map_err(csv_error)?.iter().map(str::to_string).collect();
    if header.join(",") != SPECTRA_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{SPECTRA_HEADER}`"),
        });
    }
    let (mut omega, mut sxx, mut syy, mut sxy) = (vec![], vec![], vec![], vec![]);
    for record in reader.deserialize::<[f64; 4]>() {
        let [f, a, b, c] = record.map_err(csv_error)?;
        omega.push(hz_to_rad(f));
        sxx.push(a);
        syy.push(b);
        sxy.push(c);
    }
    SpectraSet::new(omega, sxx, syy, sxy, "file")
}

/// Sidecar path `<stem>.json` next to a CSV file.
pub fn sidecar_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

/// Writes the CSV and its JSON sidecar; returns both paths.
pub fn save_spectra(csv: &Path, s: &SpectraSet) -> Result<(PathBuf, PathBuf)> {
    let mut buf = Vec::new();
    write_spectra_csv(&mut buf, s)?;
    fs::write(csv, buf)?;
    let side = sidecar_path(csv);
    fs::write(&side, serde_json::to_string_pretty(&s.metadata)? + "\n")?;
    Ok((csv.to_path_buf(), side))
}

/// Reads a CSV and, when present, its sidecar metadata.
pub fn load_spectra(csv: &Path) -> Result<SpectraSet> {
    let file = fs::File::open(csv)?;
    let mut s = read_spectra_csv(BufReader::new(file))?;
    let side = sidecar_path(csv);
    if side.exists() {
        let meta: SpectraMetadata = serde_json::from_str(&fs::read_to_string(side)?)?;
        s.metadata = meta;
    }
    Ok(s)
}

pub fn write_map_csv(w: impl Write, m: &CancellationMap) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(MAP_HEADER.split(',')).map_err(csv_error)?;
    for (i, &k) in m.kappa.iter().enumerate() {
        for (j, &d) in m.delta.iter().enumerate() {
            let v = m
                .get(i, j)
                .map(|p| fmt_value(p / std::f64::consts::TAU))
                .unwrap_or_default();
            out.write_record([fmt_value(rad_to_hz(k)), fmt_value(rad_to_hz(d)), v])
                .map_err(csv_error)?;
        }
    }
    out.flush()?;
    Ok(())
}

//! File formats: the versioned little-endian YET binary, XELT and YLT
//! CSVs, and the portfolio JSON document tying layer terms to XELT files.
//! Every writer has a matching reader and a read-then-write round trip
//! reproduces files byte for byte.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::ExceedanceCurve;
use crate::model::{
    EltTerms, EventOccurrence, ExtendedEventLoss, Layer, LayerTerms, ModelError, Portfolio,
    Program, Trial, Xelt, YearEventTable, YearLossTable, YltRow,
};

pub const YET_MAGIC: &[u8; 4] = b"ARA1";
pub const YET_FORMAT_VERSION: u16 = 1;
pub const PORTFOLIO_FORMAT_VERSION: u32 = 1;
pub const XELT_CSV_HEADER: &str = "event_id,mean_loss,sigma_i,sigma_c,max_loss,z_e";
pub const YLT_CSV_HEADER: &str = "program,layer,trial_id,loss";
pub const CURVE_CSV_HEADER: &str = "loss,exceedance_probability";

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: not a YET file (bad magic)")]
    BadMagic { path: PathBuf },
    #[error("{path}: unsupported format version {version}")]
    UnsupportedVersion { path: PathBuf, version: u32 },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        source: serde_json::Error,
    },
    #[error("{path}: {source}")]
    Invalid { path: PathBuf, source: ModelError },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IoError + '_ {
    move |source| IoError::Io {
        path: path.to_path_buf(),
        source,
    }
}

// ---------------------------------------------------------------------------
// YET binary

/// Write the year event table: magic "ARA1", version u16, catalogue_size
/// u64, trial count u64, then per trial the trial_id u64, occurrence
/// count u32, and (event_id u32, timestamp f64, z_prog_e f64) triples.
/// All fields little-endian.
pub fn write_yet(path: &Path, yet: &YearEventTable) -> Result<(), IoError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    let mut put = |bytes: &[u8]| w.write_all(bytes).map_err(io_err(path));

    put(YET_MAGIC)?;
    put(&YET_FORMAT_VERSION.to_le_bytes())?;
    put(&yet.catalogue_size.to_le_bytes())?;
    put(&(yet.trials.len() as u64).to_le_bytes())?;
    for trial in &yet.trials {
        put(&trial.trial_id.to_le_bytes())?;
        put(&(trial.occurrences.len() as u32).to_le_bytes())?;
        for occ in &trial.occurrences {
            put(&occ.event_id.to_le_bytes())?;
            put(&occ.timestamp.to_le_bytes())?;
            put(&occ.z_prog_e.to_le_bytes())?;
        }
    }
    w.into_inner()
        .map_err(|e| IoError::Io {
            path: path.to_path_buf(),
            source: e.into_error(),
        })?
        .flush()
        .map_err(io_err(path))
}

/// Read and validate a YET binary.
pub fn read_yet(path: &Path) -> Result<YearEventTable, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    let mut r = BufReader::new(file);

    let mut magic = [0u8; 4];
    r.read_exact(&mut magic).map_err(io_err(path))?;
    if &magic != YET_MAGIC {
        return Err(IoError::BadMagic {
            path: path.to_path_buf(),
        });
    }
    let version = read_u16(&mut r, path)?;
    if version != YET_FORMAT_VERSION {
        return Err(IoError::UnsupportedVersion {
            path: path.to_path_buf(),
            version: u32::from(version),
        });
    }
    let catalogue_size = read_u64(&mut r, path)?;
    let trial_count = read_u64(&mut r, path)?;
    let mut trials = Vec::with_capacity(trial_count as usize);
    for _ in 0..trial_count {
        let trial_id = read_u64(&mut r, path)?;
        let occ_count = read_u32(&mut r, path)?;
        let mut occurrences = Vec::with_capacity(occ_count as usize);
        for _ in 0..occ_count {
            occurrences.push(EventOccurrence {
                event_id: read_u32(&mut r, path)?,
                timestamp: read_f64(&mut r, path)?,
                z_prog_e: read_f64(&mut r, path)?,
            });
        }
        trials.push(Trial {
            trial_id,
            occurrences,
        });
    }
    let yet = YearEventTable {
        catalogue_size,
        trials,
    };
    yet.validate().map_err(|source| IoError::Invalid {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(yet)
}

fn read_u16<R: Read>(r: &mut R, path: &Path) -> Result<u16, IoError> {
    let mut b = [0u8; 2];
    r.read_exact(&mut b).map_err(io_err(path))?;
    Ok(u16::from_le_bytes(b))
}

fn read_u32<R: Read>(r: &mut R, path: &Path) -> Result<u32, IoError> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(io_err(path))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, path: &Path) -> Result<u64, IoError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(io_err(path))?;
    Ok(u64::from_le_bytes(b))
}

fn read_f64<R: Read>(r: &mut R, path: &Path) -> Result<f64, IoError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(io_err(path))?;
    Ok(f64::from_le_bytes(b))
}

// ---------------------------------------------------------------------------
// XELT CSV

/// Write one XELT's records. Floats use the shortest representation that
/// parses back to the same bits, so read-then-write is byte-stable.
pub fn write_xelt_csv(path: &Path, records: &[ExtendedEventLoss]) -> Result<(), IoError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{XELT_CSV_HEADER}").map_err(io_err(path))?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{}",
            r.event_id, r.mean_loss, r.sigma_i, r.sigma_c, r.max_loss, r.z_e
        )
        .map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_xelt_csv(path: &Path) -> Result<Vec<ExtendedEventLoss>, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    let reader = BufReader::new(file);
    let mut records = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if idx == 0 {
            if line.trim() != XELT_CSV_HEADER {
                return Err(parse_err(path, 1, format!("expected header '{XELT_CSV_HEADER}'")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 6 {
            return Err(parse_err(path, idx + 1, format!("expected 6 fields, found {}", fields.len())));
        }
        records.push(ExtendedEventLoss {
            event_id: parse_field(fields[0], path, idx + 1, "event_id")?,
            mean_loss: parse_field(fields[1], path, idx + 1, "mean_loss")?,
            sigma_i: parse_field(fields[2], path, idx + 1, "sigma_i")?,
            sigma_c: parse_field(fields[3], path, idx + 1, "sigma_c")?,
            max_loss: parse_field(fields[4], path, idx + 1, "max_loss")?,
            z_e: parse_field(fields[5], path, idx + 1, "z_e")?,
        });
    }
    Ok(records)
}

fn parse_err(path: &Path, line: usize, message: String) -> IoError {
    IoError::Parse {
        path: path.to_path_buf(),
        line,
        message,
    }
}

fn parse_field<T: std::str::FromStr>(
    field: &str,
    path: &Path,
    line: usize,
    name: &str,
) -> Result<T, IoError> {
    field
        .parse()
        .map_err(|_| parse_err(path, line, format!("cannot parse {name} from '{field}'")))
}

// ---------------------------------------------------------------------------
// Portfolio JSON

#[derive(Debug, Serialize, Deserialize)]
struct PortfolioDoc {
    format_version: u32,
    rng_algorithm: Option<String>,
    seed: Option<u64>,
    programs: Vec<ProgramDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ProgramDoc {
    layers: Vec<LayerDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
struct LayerDoc {
    terms: LayerTerms,
    xelts: Vec<XeltRef>,
}

#[derive(Debug, Serialize, Deserialize)]
struct XeltRef {
    file: String,
    retention: f64,
    limit: f64,
}

/// Generation metadata carried in the portfolio document header.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PortfolioMeta {
    pub rng_algorithm: Option<String>,
    pub seed: Option<u64>,
}

/// Write a portfolio as a JSON document plus one CSV per XELT, all under
/// `dir`. Returns every file written, the JSON document first.
pub fn write_portfolio_tree(
    dir: &Path,
    portfolio: &Portfolio,
    meta: &PortfolioMeta,
) -> Result<Vec<PathBuf>, IoError> {
    let mut files = Vec::new();
    let mut programs = Vec::with_capacity(portfolio.programs.len());
    for (p_idx, program) in portfolio.programs.iter().enumerate() {
        let mut layers = Vec::with_capacity(program.layers.len());
        for (l_idx, layer) in program.layers.iter().enumerate() {
            let mut xelts = Vec::with_capacity(layer.xelts.len());
            for (x_idx, xelt) in layer.xelts.iter().enumerate() {
                let name = format!("xelt_p{p_idx:02}_l{l_idx:02}_x{x_idx:02}.csv");
                let path = dir.join(&name);
                write_xelt_csv(&path, &xelt.records)?;
                files.push(path);
                xelts.push(XeltRef {
                    file: name,
                    retention: xelt.terms.retention,
                    limit: xelt.terms.limit,
                });
            }
            layers.push(LayerDoc {
                terms: layer.terms,
                xelts,
            });
        }
        programs.push(ProgramDoc { layers });
    }
    let doc = PortfolioDoc {
        format_version: PORTFOLIO_FORMAT_VERSION,
        rng_algorithm: meta.rng_algorithm.clone(),
        seed: meta.seed,
        programs,
    };
    let json_path = dir.join("portfolio.json");
    let file = File::create(&json_path).map_err(io_err(&json_path))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, &doc).map_err(|source| IoError::Json {
        path: json_path.clone(),
        source,
    })?;
    w.write_all(b"\n").map_err(io_err(&json_path))?;
    w.flush().map_err(io_err(&json_path))?;
    files.insert(0, json_path);
    Ok(files)
}

/// Read a portfolio document and the XELT CSVs it references (resolved
/// relative to the document's directory), then validate the assembly.
pub fn read_portfolio(json_path: &Path) -> Result<(Portfolio, PortfolioMeta), IoError> {
    let file = File::open(json_path).map_err(io_err(json_path))?;
    let doc: PortfolioDoc =
        serde_json::from_reader(BufReader::new(file)).map_err(|source| IoError::Json {
            path: json_path.to_path_buf(),
            source,
        })?;
    if doc.format_version != PORTFOLIO_FORMAT_VERSION {
        return Err(IoError::UnsupportedVersion {
            path: json_path.to_path_buf(),
            version: doc.format_version,
        });
    }
    let base = json_path.parent().unwrap_or_else(|| Path::new("."));
    let mut programs = Vec::with_capacity(doc.programs.len());
    for program in doc.programs {
        let mut layers = Vec::with_capacity(program.layers.len());
        for layer in program.layers {
            let mut xelts = Vec::with_capacity(layer.xelts.len());
            for xelt_ref in layer.xelts {
                let records = read_xelt_csv(&base.join(&xelt_ref.file))?;
                xelts.push(Xelt {
                    records,
                    terms: EltTerms {
                        retention: xelt_ref.retention,
                        limit: xelt_ref.limit,
                    },
                });
            }
            layers.push(Layer {
                xelts,
                terms: layer.terms,
            });
        }
        programs.push(Program { layers });
    }
    let portfolio = Portfolio { programs };
    portfolio.validate().map_err(|source| IoError::Invalid {
        path: json_path.to_path_buf(),
        source,
    })?;
    Ok((
        portfolio,
        PortfolioMeta {
            rng_algorithm: doc.rng_algorithm,
            seed: doc.seed,
        },
    ))
}

// ---------------------------------------------------------------------------
// YLT CSV

/// Write the year loss table with losses printed to 6 decimal places.
pub fn write_ylt_csv(path: &Path, ylt: &YearLossTable) -> Result<(), IoError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{YLT_CSV_HEADER}").map_err(io_err(path))?;
    for row in &ylt.rows {
        writeln!(
            w,
            "{},{},{},{:.6}",
            row.program, row.layer, row.trial_id, row.loss
        )
        .map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

pub fn read_ylt_csv(path: &Path) -> Result<YearLossTable, IoError> {
    let file = File::open(path).map_err(io_err(path))?;
    let reader = BufReader::new(file);
    let mut rows = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if idx == 0 {
            if line.trim() != YLT_CSV_HEADER {
                return Err(parse_err(path, 1, format!("expected header '{YLT_CSV_HEADER}'")));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(parse_err(path, idx + 1, format!("expected 4 fields, found {}", fields.len())));
        }
        rows.push(YltRow {
            program: parse_field(fields[0], path, idx + 1, "program")?,
            layer: parse_field(fields[1], path, idx + 1, "layer")?,
            trial_id: parse_field(fields[2], path, idx + 1, "trial_id")?,
            loss: parse_field(fields[3], path, idx + 1, "loss")?,
        });
    }
    Ok(YearLossTable { rows })
}

// ---------------------------------------------------------------------------
// Exceedance curve CSV

pub fn write_exceedance_csv(path: &Path, curve: &ExceedanceCurve) -> Result<(), IoError> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    writeln!(w, "{CURVE_CSV_HEADER}").map_err(io_err(path))?;
    for point in &curve.points {
        writeln!(w, "{:.6},{:.9}", point.loss, point.exceedance_probability)
            .map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

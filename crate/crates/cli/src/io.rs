//! Input parsing and output formats.
//!
//! Input streams are NDJSON (one object per line) or CSV with a header row.
//! Two record schemas exist: a precomputed PIT `{"u": x}` / header `u`, or a
//! Gaussian predictive record `{"y":…, "mu":…, "sigma":…}` / header
//! `y,mu,sigma`. A file must stick to one schema throughout.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use pitmon_core::Observation;

/// Input error with enough position context to fix the offending line.
#[derive(Debug)]
pub enum InputError {
    Io(std::io::Error),
    /// A record that does not parse under either schema.
    Parse { line: u64, message: String },
    /// A record that parses under the wrong schema for this file.
    Schema { line: u64, message: String },
}

impl fmt::Display for InputError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputError::Io(e) => write!(f, "input error: {e}"),
            InputError::Parse { line, message } => {
                write!(f, "parse error at line {line}: {message}")
            }
            InputError::Schema { line, message } => {
                write!(f, "schema error at line {line}: {message}")
            }
        }
    }
}

impl std::error::Error for InputError {}

impl From<std::io::Error> for InputError {
    fn from(e: std::io::Error) -> Self {
        InputError::Io(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Schema {
    Pit,
    Gaussian,
}

impl Schema {
    fn name(self) -> &'static str {
        match self {
            Schema::Pit => "{u}",
            Schema::Gaussian => "{y, mu, sigma}",
        }
    }
}

/// Reads a whole input file into observations, enforcing one schema per file.
///
/// Format detection: a `.csv` extension or a first byte other than `{`
/// selects CSV; otherwise NDJSON.
pub fn read_observations(path: &Path) -> Result<Vec<Observation>, InputError> {
    let mut file = File::open(path)?;
    let mut head = [0u8; 1];
    if file.read(&mut head)? == 0 {
        return Ok(Vec::new());
    }
    let is_csv = match path.extension().and_then(|e| e.to_str()) {
        Some(ext) if ext.eq_ignore_ascii_case("csv") => true,
        _ => head[0] != b'{',
    };
    let mut file = File::open(path)?;
    if is_csv {
        read_csv(&mut file)
    } else {
        read_ndjson(BufReader::new(&mut file))
    }
}

fn read_ndjson<R: BufRead>(reader: R) -> Result<Vec<Observation>, InputError> {
    let mut out = Vec::new();
    let mut schema: Option<Schema> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx as u64 + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        let value: serde_json::Value =
            serde_json::from_str(trimmed).map_err(|e| InputError::Parse {
                line: line_no,
                message: e.to_string(),
            })?;
        let obj = value.as_object().ok_or_else(|| InputError::Parse {
            line: line_no,
            message: "record is not a JSON object".to_string(),
        })?;

        let keys: Vec<&str> = obj.keys().map(|k| k.as_str()).collect();
        let record_schema = if keys == ["u"] {
            Schema::Pit
        } else if obj.len() == 3 && obj.contains_key("y") && obj.contains_key("mu") && obj.contains_key("sigma") {
            Schema::Gaussian
        } else {
            return Err(InputError::Schema {
                line: line_no,
                message: format!(
                    "fields {keys:?} match neither {{u}} nor {{y, mu, sigma}}"
                ),
            });
        };
        check_schema(&mut schema, record_schema, line_no)?;

        let number = |key: &str| -> Result<f64, InputError> {
            obj[key].as_f64().ok_or_else(|| InputError::Parse {
                line: line_no,
                message: format!("field `{key}` is not a number"),
            })
        };
        out.push(match record_schema {
            Schema::Pit => Observation::Pit(number("u")?),
            Schema::Gaussian => Observation::Gaussian {
                y: number("y")?,
                mu: number("mu")?,
                sigma: number("sigma")?,
            },
        });
    }
    Ok(out)
}

fn read_csv<R: Read>(reader: R) -> Result<Vec<Observation>, InputError> {
    let mut csv_reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers: Vec<String> = csv_reader
        .headers()
        .map_err(|e| InputError::Parse {
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(|h| h.to_ascii_lowercase())
        .collect();

    let schema = if headers == ["u"] {
        Schema::Pit
    } else if headers.len() == 3
        && headers.contains(&"y".to_string())
        && headers.contains(&"mu".to_string())
        && headers.contains(&"sigma".to_string())
    {
        Schema::Gaussian
    } else {
        return Err(InputError::Schema {
            line: 1,
            message: format!("CSV header {headers:?} matches neither `u` nor `y,mu,sigma`"),
        });
    };

    let col = |name: &str| headers.iter().position(|h| h == name).expect("checked");
    let (y_col, mu_col, sigma_col, u_col) = match schema {
        Schema::Pit => (0, 0, 0, col("u")),
        Schema::Gaussian => (col("y"), col("mu"), col("sigma"), 0),
    };

    let mut out = Vec::new();
    for record in csv_reader.records() {
        let record = record.map_err(|e| InputError::Parse {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line_no = record.position().map_or(0, |p| p.line());
        let field = |idx: usize| -> Result<f64, InputError> {
            let raw = record.get(idx).ok_or_else(|| InputError::Parse {
                line: line_no,
                message: format!("missing column {idx}"),
            })?;
            raw.parse::<f64>().map_err(|_| InputError::Parse {
                line: line_no,
                message: format!("`{raw}` is not a number"),
            })
        };
        out.push(match schema {
            Schema::Pit => Observation::Pit(field(u_col)?),
            Schema::Gaussian => Observation::Gaussian {
                y: field(y_col)?,
                mu: field(mu_col)?,
                sigma: field(sigma_col)?,
            },
        });
    }
    Ok(out)
}

fn check_schema(
    current: &mut Option<Schema>,
    found: Schema,
    line: u64,
) -> Result<(), InputError> {
    match current {
        None => {
            *current = Some(found);
            Ok(())
        }
        Some(expected) if *expected == found => Ok(()),
        Some(expected) => Err(InputError::Schema {
            line,
            message: format!(
                "record schema {} conflicts with this file's schema {}",
                found.name(),
                expected.name()
            ),
        }),
    }
}

//! Plain-text sample and data files.
//!
//! One decimal float per line. Lines starting with `#` are comments; a
//! comment of the form `# provenance=mcmc burn_in=1000 thinning=1
//! acceptance_rate=0.43` records where a posterior sample came from. Blank
//! lines are skipped.

use std::fs::File;
use std::io::{self, BufRead, BufReader, Write};
use std::path::Path;

use thiserror::Error;

use crate::sampling::{PosteriorSample, Provenance};

#[derive(Debug, Error)]
pub enum ReadError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
    #[error("line {line}: cannot parse {content:?} as a number")]
    Parse { line: usize, content: String },
    #[error("line {line}: value {value} is not finite")]
    NonFinite { line: usize, value: f64 },
    #[error("line {line}: malformed provenance comment: {reason}")]
    Provenance { line: usize, reason: String },
    #[error(transparent)]
    Invalid(#[from] crate::Error),
}

/// Values and the provenance comment, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueFile {
    pub values: Vec<f64>,
    pub provenance: Option<Provenance>,
}

pub fn read_values<R: BufRead>(reader: R) -> Result<ValueFile, ReadError> {
    let mut values = Vec::new();
    let mut provenance = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|source| ReadError::Io {
            path: "<input>".into(),
            source,
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(comment) = trimmed.strip_prefix('#') {
            let comment = comment.trim();
            if comment.starts_with("provenance=") {
                provenance =
                    Some(
                        parse_provenance(comment).map_err(|reason| ReadError::Provenance {
                            line: line_no,
                            reason,
                        })?,
                    );
            }
            continue;
        }
        let value: f64 = trimmed.parse().map_err(|_| ReadError::Parse {
            line: line_no,
            content: trimmed.to_string(),
        })?;
        if !value.is_finite() {
            return Err(ReadError::NonFinite {
                line: line_no,
                value,
            });
        }
        values.push(value);
    }
    Ok(ValueFile { values, provenance })
}

pub fn read_values_file(path: &Path) -> Result<ValueFile, ReadError> {
    let file = File::open(path).map_err(|source| ReadError::Io {
        path: path.display().to_string(),
        source,
    })?;
    read_values(BufReader::new(file)).map_err(|e| match e {
        ReadError::Io { source, .. } => ReadError::Io {
            path: path.display().to_string(),
            source,
        },
        other => other,
    })
}

/// Reads a posterior sample; files without a provenance comment are tagged
/// [`Provenance::External`].
pub fn read_sample_file(path: &Path) -> Result<PosteriorSample, ReadError> {
    let file = read_values_file(path)?;
    let provenance = file.provenance.unwrap_or(Provenance::External);
    Ok(PosteriorSample::new(file.values, provenance)?)
}

fn parse_provenance(comment: &str) -> Result<Provenance, String> {
    let mut kind = None;
    let mut burn_in = None;
    let mut thinning = None;
    let mut acceptance_rate = None;
    for token in comment.split_whitespace() {
        let (key, value) = token
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, found {token:?}"))?;
        let bad = |_| format!("bad value for {key}: {value:?}");
        match key {
            "provenance" => kind = Some(value.to_string()),
            "burn_in" => burn_in = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "thinning" => thinning = Some(value.parse::<usize>().map_err(|e| bad(e.to_string()))?),
            "acceptance_rate" => {
                acceptance_rate = Some(value.parse::<f64>().map_err(|e| bad(e.to_string()))?)
            }
            // unknown keys are informational
            _ => {}
        }
    }
    match kind.as_deref() {
        Some("exact-iid") => Ok(Provenance::ExactIid),
        Some("external") => Ok(Provenance::External),
        Some("mcmc") => Ok(Provenance::Mcmc {
            burn_in: burn_in.ok_or("mcmc provenance needs burn_in")?,
            thinning: thinning.ok_or("mcmc provenance needs thinning")?,
            acceptance_rate: acceptance_rate.ok_or("mcmc provenance needs acceptance_rate")?,
        }),
        Some(other) => Err(format!("unknown provenance {other:?}")),
        None => Err("missing provenance key".into()),
    }
}

/// Writes a sample with its provenance comment. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_sample<W: Write>(
    mut out: W,
    sample: &PosteriorSample,
    extra: &[(&str, String)],
) -> io::Result<()> {
    write!(out, "# {} n={}", sample.provenance(), sample.len())?;
    for (key, value) in extra {
        write!(out, " {key}={value}")?;
    }
    writeln!(out)?;
    for x in sample.draws() {
        writeln!(out, "{x:?}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn comments_and_blanks() {
        let text = "# a comment\n1.5\n\n  -2e-3 \n# provenance=exact-iid n=2\n";
        let f = read_values(text.as_bytes()).unwrap();
        assert_eq!(f.values, vec![1.5, -0.002]);
        assert_eq!(f.provenance, Some(Provenance::ExactIid));
    }

    #[test]
    fn parse_error_names_line() {
        let err = read_values("1.0\n2.0\nabc\n".as_bytes()).unwrap_err();
        match err {
            ReadError::Parse { line, ref content } => {
                assert_eq!(line, 3);
                assert_eq!(content, "abc");
            }
            other => panic!("{other:?}"),
        }
        assert!(err.to_string().contains("line 3"));
        assert!(matches!(
            read_values("1\nNaN\n".as_bytes()),
            Err(ReadError::NonFinite { line: 2, .. })
        ));
    }

    #[test]
    fn mcmc_provenance_header() {
        let text =
            "# provenance=mcmc burn_in=1000 thinning=5 acceptance_rate=0.43 n=2 seed=9\n0.1\n0.2\n";
        let f = read_values(text.as_bytes()).unwrap();
        assert_eq!(
            f.provenance,
            Some(Provenance::Mcmc {
                burn_in: 1000,
                thinning: 5,
                acceptance_rate: 0.43
            })
        );
        assert!(matches!(
            read_values("# provenance=mcmc burn_in=x\n".as_bytes()),
            Err(ReadError::Provenance { line: 1, .. })
        ));
        assert!(read_values("# provenance=bogus\n".as_bytes()).is_err());
    }

    #[test]
    fn missing_file() {
        let err = read_values_file(Path::new("/nonexistent/sample.txt")).unwrap_err();
        assert!(matches!(err, ReadError::Io { .. }));
        assert!(err.to_string().contains("/nonexistent/sample.txt"));
    }

    proptest! {
        #[test]
        fn sample_round_trip(draws in prop::collection::vec(-1e6f64..1e6, 2..100), tiny in 1e-300f64..1e-290) {
            let mut draws = draws;
            draws.push(tiny);
            let sample = PosteriorSample::new(draws, Provenance::Mcmc { burn_in: 3, thinning: 2, acceptance_rate: 0.25 }).unwrap();
            let mut buf = Vec::new();
            write_sample(&mut buf, &sample, &[("seed", "7".into())]).unwrap();
            let back = read_values(buf.as_slice()).unwrap();
            prop_assert_eq!(back.provenance, Some(sample.provenance()));
            prop_assert_eq!(back.values.len(), sample.len());
            for (a, b) in back.values.iter().zip(sample.draws()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}

//! Report and record writing, and the mapping from errors to exit codes.

use std::io::Write;
use std::path::Path;

use serde::Serialize;

use contactflex::Error;

#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: String) -> Self {
        Self { code: 2, message }
    }

    /// Malformed input is a usage error; anything the numerics reject is a
    /// verification failure.
    pub fn from_core(e: Error) -> Self {
        let code = match e {
            Error::Syntax { .. }
            | Error::UnknownIdentifier { .. }
            | Error::Arity { .. }
            | Error::UnsupportedDimension { .. }
            | Error::InvalidParameter(_)
            | Error::NeedsFamily => 2,
            _ => 1,
        };
        Self {
            code,
            message: e.to_string(),
        }
    }

    /// Failed runs still print a machine-readable report.
    pub fn report(&self) -> Option<String> {
        (self.code == 1).then(|| {
            serde_json::to_string_pretty(&serde_json::json!({
                "passed": false,
                "error": self.message,
            }))
            .expect("json value serializes")
        })
    }
}

fn io(path: &Path, e: std::io::Error) -> Failure {
    Failure::usage(format!("{}: {e}", path.display()))
}

/// Prints the report, or writes it to `out`. With an `out` ending in
/// `.jsonl` the records go there, one per line, and the report to stdout.
pub fn emit<R: Serialize, T: Serialize>(
    out: Option<&Path>,
    report: &R,
    records: impl FnOnce() -> Result<Vec<T>, Failure>,
) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(report).expect("report serializes");
    match out {
        Some(path) if path.extension().is_some_and(|e| e == "jsonl") => {
            let file = std::fs::File::create(path).map_err(|e| io(path, e))?;
            let mut w = std::io::BufWriter::new(file);
            for r in records()? {
                serde_json::to_writer(&mut w, &r).expect("record serializes");
                w.write_all(b"\n").map_err(|e| io(path, e))?;
            }
            w.flush().map_err(|e| io(path, e))?;
            println!("{text}");
        }
        Some(path) => std::fs::write(path, text + "\n").map_err(|e| io(path, e))?,
        None => println!("{text}"),
    }
    Ok(())
}

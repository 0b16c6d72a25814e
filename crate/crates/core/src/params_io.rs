//! Plain-text key-value format for parameter sets.
//!
//! One `key = value` per line, `#` starts a comment. Dimensions are integers,
//! diagonals are whitespace-separated number lists and matrices are row-major
//! number lists:
//!
//! ```text
//! model = extended
//! p = 2
//! q = 2
//! r = 1
//! w = 1 0
//! c = 1 0
//! sigma_t2 = 1
//! psi_e = 0.1 0 0 0.1
//! psi_f = 0.1 0 0 0.1
//! ```
//!
//! Original-model files carry `b`, `sigma_e2`, `sigma_f2`, `sigma_h2` instead
//! of `psi_e`/`psi_f`. Numbers are written in shortest round-trip form, so
//! writing then parsing reproduces every value bit for bit.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{PplsError, Result};
use crate::linalg::Mat;
use crate::model::{Diagonal, ExtendedPplsParams, OriginalPplsParams, PplsParams};

const ORIGINAL_KEYS: &[&str] = &[
    "model", "p", "q", "r", "w", "c", "sigma_t2", "b", "sigma_e2", "sigma_f2", "sigma_h2",
];
const EXTENDED_KEYS: &[&str] = &[
    "model", "p", "q", "r", "w", "c", "sigma_t2", "psi_e", "psi_f",
];

fn push_list(out: &mut String, key: &str, values: impl IntoIterator<Item = f64>) {
    let parts: Vec<String> = values.into_iter().map(|v| format!("{v:?}")).collect();
    let _ = writeln!(out, "{key} = {}", parts.join(" "));
}

fn row_major(m: &Mat) -> Vec<f64> {
    let mut v = Vec::with_capacity(m.len());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            v.push(m[(i, j)]);
        }
    }
    v
}

pub fn write_params(params: &PplsParams) -> String {
    let mut out = String::new();
    let (w, c) = params.weights();
    let model = match params {
        PplsParams::Original(_) => "original",
        PplsParams::Extended(_) => "extended",
    };
    let _ = writeln!(out, "model = {model}");
    let _ = writeln!(out, "p = {}", w.nrows());
    let _ = writeln!(out, "q = {}", c.nrows());
    let _ = writeln!(out, "r = {}", params.r());
    push_list(&mut out, "w", row_major(w));
    push_list(&mut out, "c", row_major(c));
    match params {
        PplsParams::Original(o) => {
            push_list(&mut out, "sigma_t2", o.sigma_t.as_slice().iter().copied());
            push_list(&mut out, "b", o.b.as_slice().iter().copied());
            push_list(&mut out, "sigma_e2", [o.sigma_e2]);
            push_list(&mut out, "sigma_f2", [o.sigma_f2]);
            push_list(&mut out, "sigma_h2", [o.sigma_h2]);
        }
        PplsParams::Extended(e) => {
            push_list(&mut out, "sigma_t2", e.sigma_t.as_slice().iter().copied());
            push_list(&mut out, "psi_e", row_major(&e.psi_e));
            push_list(&mut out, "psi_f", row_major(&e.psi_f));
        }
    }
    out
}

struct Entry {
    line: usize,
    raw: String,
}

struct Fields {
    entries: BTreeMap<String, Entry>,
}

impl Fields {
    fn get(&self, key: &str) -> Result<&Entry> {
        self.entries.get(key).ok_or_else(|| PplsError::Parse {
            line: 0,
            message: format!("missing key `{key}`"),
        })
    }

    fn numbers(&self, key: &str, expected: usize) -> Result<Vec<f64>> {
        let entry = self.get(key)?;
        let values = entry
            .raw
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>().map_err(|_| PplsError::Parse {
                    line: entry.line,
                    message: format!("`{key}`: `{tok}` is not a number"),
                })
            })
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != expected {
            return Err(PplsError::Parse {
                line: entry.line,
                message: format!("`{key}` has {} values, expected {expected}", values.len()),
            });
        }
        Ok(values)
    }

    fn count(&self, key: &str) -> Result<usize> {
        let entry = self.get(key)?;
        entry
            .raw
            .trim()
            .parse::<usize>()
            .map_err(|_| PplsError::Parse {
                line: entry.line,
                message: format!("`{key}` must be a non-negative integer"),
            })
    }

    fn scalar(&self, key: &str) -> Result<f64> {
        Ok(self.numbers(key, 1)?[0])
    }

    fn matrix(&self, key: &str, rows: usize, cols: usize) -> Result<Mat> {
        let v = self.numbers(key, rows * cols)?;
        Ok(Mat::from_row_slice(rows, cols, &v))
    }
}

pub fn parse_params(text: &str) -> Result<PplsParams> {
    let mut entries = BTreeMap::new();
    for (idx, line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| PplsError::Parse {
            line: line_no,
            message: format!("expected `key = value`, found `{content}`"),
        })?;
        let key = key.trim().to_ascii_lowercase();
        if entries
            .insert(
                key.clone(),
                Entry {
                    line: line_no,
                    raw: value.trim().to_string(),
                },
            )
            .is_some()
        {
            return Err(PplsError::Parse {
                line: line_no,
                message: format!("duplicate key `{key}`"),
            });
        }
    }
    let fields = Fields { entries };
    let model = fields.get("model")?.raw.to_ascii_lowercase();
    let allowed = match model.as_str() {
        "original" => ORIGINAL_KEYS,
        "extended" => EXTENDED_KEYS,
        other => {
            return Err(PplsError::Parse {
                line: fields.get("model")?.line,
                message: format!("unknown model `{other}` (expected `original` or `extended`)"),
            })
        }
    };
    if let Some((key, entry)) = fields
        .entries
        .iter()
        .find(|(k, _)| !allowed.contains(&k.as_str()))
    {
        return Err(PplsError::Parse {
            line: entry.line,
            message: format!("unknown key `{key}` for a {model} model"),
        });
    }

    let (p, q, r) = (fields.count("p")?, fields.count("q")?, fields.count("r")?);
    if p == 0 || q == 0 || r == 0 {
        return Err(PplsError::Parse {
            line: 0,
            message: "dimensions p, q, r must be positive".into(),
        });
    }
    let w = fields.matrix("w", p, r)?;
    let c = fields.matrix("c", q, r)?;
    let sigma_t = Diagonal::new(fields.numbers("sigma_t2", r)?);
    Ok(if model == "original" {
        PplsParams::Original(OriginalPplsParams {
            w,
            c,
            b: Diagonal::new(fields.numbers("b", r)?),
            sigma_t,
            sigma_e2: fields.scalar("sigma_e2")?,
            sigma_f2: fields.scalar("sigma_f2")?,
            sigma_h2: fields.scalar("sigma_h2")?,
        })
    } else {
        PplsParams::Extended(ExtendedPplsParams {
            w,
            c,
            sigma_t,
            psi_e: fields.matrix("psi_e", p, p)?,
            psi_f: fields.matrix("psi_f", q, q)?,
        })
    })
}

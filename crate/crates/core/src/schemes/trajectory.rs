use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

/// States `u⁰..u^N` of one run in the coordinates of its space.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub label: String,
    pub alpha: f64,
    pub dt: f64,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn new(label: &str, alpha: f64, dt: f64, states: Vec<Vec<f64>>) -> Self {
        Self {
            label: label.to_string(),
            alpha,
            dt,
            states,
        }
    }

    /// Number of completed steps.
    pub fn steps(&self) -> usize {
        self.states.len().saturating_sub(1)
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn last(&self) -> &[f64] {
        self.states.last().map_or(&[], Vec::as_slice)
    }

    /// Every `stride`-th state, with the time step scaled to match.
    pub fn subsample(&self, stride: usize) -> Result<Trajectory> {
        if stride == 0 {
            return Err(Error::InvalidArgument("zero subsampling stride".into()));
        }
        Ok(Trajectory {
            label: self.label.clone(),
            alpha: self.alpha,
            dt: self.dt * stride as f64,
            states: self.states.iter().step_by(stride).cloned().collect(),
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# space {}", self.label);
        let _ = writeln!(s, "# alpha {}", self.alpha);
        let _ = writeln!(s, "# dt {}", self.dt);
        let _ = writeln!(s, "# rows {} cols {}", self.states.len(), self.dim());
        for u in &self.states {
            let row: Vec<String> = u.iter().map(|v| format!("{v}")).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut label = None;
        let mut alpha = None;
        let mut dt = None;
        let mut shape = None;
        let mut states = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let err = |message: String| Error::Parse { line: ln + 1, message };
            if let Some(rest) = line.strip_prefix("# ") {
                let parts: Vec<&str> = rest.split_whitespace().collect();
                let num = |s: &str| s.parse::<f64>().map_err(|e| err(format!("bad number `{s}`: {e}")));
                match parts.as_slice() {
                    ["space", l] => label = Some(l.to_string()),
                    ["alpha", v] => alpha = Some(num(v)?),
                    ["dt", v] => dt = Some(num(v)?),
                    ["rows", r, "cols", c] => {
                        let r = r.parse::<usize>().map_err(|e| err(e.to_string()))?;
                        let c = c.parse::<usize>().map_err(|e| err(e.to_string()))?;
                        shape = Some((r, c));
                    }
                    _ => return Err(err(format!("unknown header `{rest}`"))),
                }
                continue;
            }
            let row = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| err(format!("bad value `{t}`: {e}"))))
                .collect::<Result<Vec<_>>>()?;
            if let Some((_, c)) = shape {
                if row.len() != c {
                    return Err(err(format!("expected {c} values, found {}", row.len())));
                }
            }
            states.push(row);
        }
        let missing = |what: &str| Error::Parse {
            line: 1,
            message: format!("missing `{what}` header"),
        };
        let (rows, _) = shape.ok_or_else(|| missing("rows"))?;
        if rows != states.len() {
            return Err(Error::Parse {
                line: text.lines().count(),
                message: format!("expected {rows} rows, found {}", states.len()),
            });
        }
        Ok(Trajectory {
            label: label.ok_or_else(|| missing("space"))?,
            alpha: alpha.ok_or_else(|| missing("alpha"))?,
            dt: dt.ok_or_else(|| missing("dt"))?,
            states,
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

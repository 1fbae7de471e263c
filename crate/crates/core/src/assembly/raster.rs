//! Plain-text raster files: a header line `nx ny` followed by `nx·ny` values
//! in row-major lexicographic order (x fastest). Values are written in the
//! shortest form that parses back to the identical `f64`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl Raster {
    pub fn new(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != nx * ny {
            return Err(Error::DimensionMismatch {
                expected: nx * ny,
                actual: values.len(),
                context: "raster values",
            });
        }
        Ok(Self { nx, ny, values })
    }

    pub fn get(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix + iy * self.nx]
    }

    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.values.len() * 8);
        let _ = writeln!(s, "{} {}", self.nx, self.ny);
        for row in self.values.chunks(self.nx.max(1)) {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            s.push_str(&line.join(" "));
            s.push('\n');
        }
        s
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (hline, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            message: "missing header".into(),
        })?;
        let dims: Vec<&str> = header.split_whitespace().collect();
        if dims.len() != 2 {
            return Err(Error::Parse {
                line: hline + 1,
                message: format!("expected `nx ny`, found `{}`", header.trim()),
            });
        }
        let parse_dim = |s: &str| {
            s.parse::<usize>().map_err(|e| Error::Parse {
                line: hline + 1,
                message: format!("bad dimension `{s}`: {e}"),
            })
        };
        let nx = parse_dim(dims[0])?;
        let ny = parse_dim(dims[1])?;
        let mut values = Vec::with_capacity(nx * ny);
        let mut last_line = hline + 1;
        for (ln, line) in lines {
            last_line = ln + 1;
            for tok in line.split_whitespace() {
                let v = tok.parse::<f64>().map_err(|e| Error::Parse {
                    line: ln + 1,
                    message: format!("bad value `{tok}`: {e}"),
                })?;
                if values.len() == nx * ny {
                    return Err(Error::Parse {
                        line: ln + 1,
                        message: format!("more than {} values", nx * ny),
                    });
                }
                values.push(v);
            }
        }
        if values.len() != nx * ny {
            return Err(Error::Parse {
                line: last_line,
                message: format!("expected {} values, found {}", nx * ny, values.len()),
            });
        }
        Ok(Self { nx, ny, values })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn parse_errors_carry_line_numbers() {
        match Raster::parse("2 2\n1 2\n3 x\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        match Raster::parse("2 2\n1 2\n3\n") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        assert!(Raster::parse("").is_err());
        assert!(Raster::parse("2\n").is_err());
        assert!(Raster::parse("1 1\n1 2\n").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("k.txt");
        let r = Raster::new(3, 2, vec![1.0, 1e5, 0.1, 1.0 / 3.0, 2.5e-300, 7.0]).unwrap();
        r.write(&p).unwrap();
        assert_eq!(Raster::read(&p).unwrap(), r);
    }

    proptest! {
        #[test]
        fn text_round_trip_is_bit_exact(vals in proptest::collection::vec(any::<f64>().prop_filter("finite", |v| v.is_finite()), 1..40)) {
            let n = vals.len();
            let r = Raster::new(n, 1, vals).unwrap();
            let back = Raster::parse(&r.to_text()).unwrap();
            for (a, b) in r.values.iter().zip(&back.values) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}

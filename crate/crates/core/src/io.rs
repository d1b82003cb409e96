//! Text formats: cubature grids, coefficient pyramids, samples.
//!
//! Every real number is written with 17 significant digits so that a
//! write/read cycle reproduces the `f64` bit pattern.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::cubature::CubatureRule;
use crate::error::{Error, Result};
use crate::estimator::Sample;
use crate::frame::{CoefficientKind, CoefficientPyramid};
use crate::sphere::UnitVector3;

pub const GRID_MAGIC: &str = "needlet-grid";
pub const COEFFS_MAGIC: &str = "needlet-coeffs";
pub const FORMAT_VERSION: &str = "v1";

/// Tolerance for renormalizing sample points read from CSV.
const SAMPLE_UNIT_SLACK: f64 = 1e-6;

/// `{:.16e}`: 17 significant digits.
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_with(path: &Path, body: impl FnOnce(&mut dyn Write) -> std::io::Result<()>) -> Result<()> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    body(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Error::io(path, e))
}

/// Non-comment, non-blank lines with 1-based line numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

struct Parser<'a> {
    path: &'a Path,
}

impl Parser<'_> {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            message: message.into(),
        }
    }

    fn real(&self, line: usize, field: &str) -> Result<f64> {
        field
            .parse::<f64>()
            .map_err(|_| self.err(line, format!("invalid number {field:?}")))
    }

    fn int<T: std::str::FromStr>(&self, line: usize, field: &str) -> Result<T> {
        field
            .parse::<T>()
            .map_err(|_| self.err(line, format!("invalid integer {field:?}")))
    }

    /// Parses `key=value` tokens of a header after the magic and version.
    fn header<'t>(
        &self,
        line: usize,
        text: &'t str,
        magic: &str,
        keys: &[&str],
    ) -> Result<Vec<&'t str>> {
        let mut tokens = text.split_whitespace();
        if tokens.next() != Some(magic) {
            return Err(self.err(line, format!("expected header starting with {magic:?}")));
        }
        if tokens.next() != Some(FORMAT_VERSION) {
            return Err(self.err(line, format!("unsupported version, expected {FORMAT_VERSION}")));
        }
        let mut values = Vec::with_capacity(keys.len());
        for key in keys {
            let tok = tokens
                .next()
                .ok_or_else(|| self.err(line, format!("missing {key}=")))?;
            let value = tok
                .strip_prefix(key)
                .and_then(|rest| rest.strip_prefix('='))
                .ok_or_else(|| self.err(line, format!("expected {key}=..., found {tok:?}")))?;
            values.push(value);
        }
        if let Some(extra) = tokens.next() {
            return Err(self.err(line, format!("unexpected header token {extra:?}")));
        }
        Ok(values)
    }
}

pub fn write_rule(rule: &CubatureRule, path: &Path) -> Result<()> {
    write_with(path, |out| {
        writeln!(
            out,
            "{GRID_MAGIC} {FORMAT_VERSION} j={} degree={} count={}",
            rule.level(),
            rule.exact_degree(),
            rule.len()
        )?;
        for (x, w) in rule.iter() {
            writeln!(
                out,
                "{} {} {} {}",
                fmt_real(x.x()),
                fmt_real(x.y()),
                fmt_real(x.z()),
                fmt_real(w)
            )?;
        }
        Ok(())
    })
}

pub fn load_rule(path: &Path) -> Result<CubatureRule> {
    let text = read(path)?;
    let p = Parser { path };
    let mut lines = content_lines(&text);
    let (hl, header) = lines.next().ok_or_else(|| p.err(1, "empty grid file"))?;
    let h = p.header(hl, header, GRID_MAGIC, &["j", "degree", "count"])?;
    let level: u32 = p.int(hl, h[0])?;
    let degree: usize = p.int(hl, h[1])?;
    let count: usize = p.int(hl, h[2])?;
    let mut nodes = Vec::with_capacity(count);
    let mut weights = Vec::with_capacity(count);
    let mut last = hl;
    for (ln, line) in lines {
        last = ln;
        if nodes.len() == count {
            return Err(p.err(ln, format!("more than the declared {count} nodes")));
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 4 {
            return Err(p.err(ln, format!("expected `x y z weight`, found {} fields", fields.len())));
        }
        let x = p.real(ln, fields[0])?;
        let y = p.real(ln, fields[1])?;
        let z = p.real(ln, fields[2])?;
        let w = p.real(ln, fields[3])?;
        let node = UnitVector3::new(x, y, z).map_err(|e| p.err(ln, e.to_string()))?;
        nodes.push(node);
        weights.push(w);
    }
    if nodes.len() != count {
        return Err(p.err(
            last + 1,
            format!("truncated: {} of {count} nodes", nodes.len()),
        ));
    }
    CubatureRule::from_parts(level, degree, nodes, weights)
}

pub fn write_pyramid(pyramid: &CoefficientPyramid, path: &Path) -> Result<()> {
    write_with(path, |out| {
        writeln!(
            out,
            "{COEFFS_MAGIC} {FORMAT_VERSION} J={} kind={}",
            pyramid.max_level(),
            pyramid.kind()
        )?;
        writeln!(out, "const {}", fmt_real(pyramid.constant()))?;
        for (j, level) in pyramid.levels().iter().enumerate() {
            for (i, b) in level.iter().enumerate() {
                writeln!(out, "{j} {i} {}", fmt_real(*b))?;
            }
        }
        Ok(())
    })
}

pub fn load_pyramid(path: &Path) -> Result<CoefficientPyramid> {
    let text = read(path)?;
    let p = Parser { path };
    let mut lines = content_lines(&text);
    let (hl, header) = lines.next().ok_or_else(|| p.err(1, "empty coefficient file"))?;
    let h = p.header(hl, header, COEFFS_MAGIC, &["J", "kind"])?;
    let max_level: usize = p.int(hl, h[0])?;
    let kind = match h[1] {
        "exact" => CoefficientKind::Exact,
        "empirical" => CoefficientKind::Empirical,
        other => return Err(p.err(hl, format!("unknown kind {other:?}"))),
    };
    let mut constant = None;
    let mut levels: Vec<Vec<f64>> = vec![Vec::new(); max_level + 1];
    for (ln, line) in lines {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.first() == Some(&"const") {
            if fields.len() != 2 {
                return Err(p.err(ln, "expected `const <value>`"));
            }
            if constant.replace(p.real(ln, fields[1])?).is_some() {
                return Err(p.err(ln, "duplicate const line"));
            }
            continue;
        }
        if fields.len() != 3 {
            return Err(p.err(ln, format!("expected `j node_index beta`, found {} fields", fields.len())));
        }
        let j: usize = p.int(ln, fields[0])?;
        let i: usize = p.int(ln, fields[1])?;
        let beta = p.real(ln, fields[2])?;
        let level = levels
            .get_mut(j)
            .ok_or_else(|| p.err(ln, format!("level {j} exceeds J={max_level}")))?;
        if i != level.len() {
            return Err(p.err(ln, format!("level {j}: expected node {}, found {i}", level.len())));
        }
        level.push(beta);
    }
    let constant = constant.ok_or_else(|| p.err(hl, "missing const line"))?;
    if let Some(j) = levels.iter().position(Vec::is_empty) {
        return Err(p.err(hl, format!("level {j} has no coefficients")));
    }
    CoefficientPyramid::new(kind, constant, levels)
}

pub fn write_sample(sample: &Sample, path: &Path) -> Result<()> {
    write_with(path, |out| {
        writeln!(out, "x,y,z")?;
        for x in sample.points() {
            writeln!(out, "{},{},{}", fmt_real(x.x()), fmt_real(x.y()), fmt_real(x.z()))?;
        }
        Ok(())
    })
}

/// Reads `x,y,z` rows; points off the sphere by less than `1e-6` are
/// renormalized, anything further is an error.
pub fn load_sample(path: &Path) -> Result<Sample> {
    let text = read(path)?;
    let p = Parser { path };
    let mut lines = content_lines(&text);
    let (hl, header) = lines.next().ok_or_else(|| p.err(1, "empty sample file"))?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols != ["x", "y", "z"] {
        return Err(p.err(hl, "expected header `x,y,z`"));
    }
    let mut points = Vec::new();
    for (ln, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 3 {
            return Err(p.err(ln, format!("expected 3 columns, found {}", fields.len())));
        }
        let (x, y, z) = (
            p.real(ln, fields[0])?,
            p.real(ln, fields[1])?,
            p.real(ln, fields[2])?,
        );
        let point = match UnitVector3::new(x, y, z) {
            Ok(v) => v,
            Err(_) if ((x * x + y * y + z * z).sqrt() - 1.0).abs() < SAMPLE_UNIT_SLACK => {
                UnitVector3::normalize(x, y, z)?
            }
            Err(e) => return Err(p.err(ln, e.to_string())),
        };
        points.push(point);
    }
    Sample::new(points).map_err(|_| p.err(hl, "sample has no points"))
}

/// Writes rows of reals under a comma-separated header.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    write_with(path, |out| {
        writeln!(out, "{}", header.join(","))?;
        for row in rows {
            let cells: Vec<String> = row.into_iter().map(fmt_real).collect();
            writeln!(out, "{}", cells.join(","))?;
        }
        Ok(())
    })
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

//! MPS reader (fixed and free format) and a writer for normalized problems.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::problem::{ModelError, Problem, ProblemBuilder, Sense};

#[derive(Debug, Error)]
pub enum MpsError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: duplicate row '{name}'")]
    DuplicateRow { line: usize, name: String },
    #[error("line {line}: duplicate column '{name}'")]
    DuplicateColumn { line: usize, name: String },
    #[error("line {line}: unknown row '{name}'")]
    UnknownRow { line: usize, name: String },
    #[error("line {line}: unknown column '{name}'")]
    UnknownColumn { line: usize, name: String },
    #[error("line {line}: unknown bound type '{kind}'")]
    UnknownBoundType { line: usize, kind: String },
    #[error("line {line}: invalid number '{token}'")]
    BadNumber { line: usize, token: String },
    #[error("{0}")]
    Model(#[from] ModelError),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawRow {
    pub name: String,
    pub sense: Sense,
    pub rhs: f64,
    pub range: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RawColumn {
    pub name: String,
    pub integer: bool,
    pub cost: f64,
    /// `(row index, value)` into [`RawProblem::rows`].
    pub coefs: Vec<(usize, f64)>,
    pub lb: f64,
    pub ub: f64,
    lb_set: bool,
    ub_set: bool,
}

/// An MPS model as written in the file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RawProblem {
    pub name: String,
    pub maximize: bool,
    pub objective_name: Option<String>,
    /// Value given for the objective row in the RHS section.
    pub objective_rhs: f64,
    pub rows: Vec<RawRow>,
    pub columns: Vec<RawColumn>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Section {
    None,
    Name,
    Rows,
    Columns,
    Rhs,
    Ranges,
    Bounds,
    ObjSense,
    End,
}

/// 0-based columns that must be blank in a fixed-format data line.
const FIXED_GAPS: [usize; 10] = [0, 3, 12, 13, 22, 23, 36, 37, 38, 47];
const FIXED_FIELDS: [(usize, usize); 6] = [(1, 3), (4, 12), (14, 22), (24, 36), (39, 47), (49, 61)];

fn fits_fixed(line: &str) -> bool {
    let b = line.as_bytes();
    FIXED_GAPS.iter().all(|&c| c >= b.len() || b[c] == b' ') && (b.len() < 49 || b[48] == b' ')
}

fn fixed_fields(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    for &(s, e) in &FIXED_FIELDS {
        if s >= line.len() {
            break;
        }
        let e = e.min(line.len());
        out.push(line.get(s..e).unwrap_or("").trim().to_string());
    }
    while out.last().is_some_and(|f| f.is_empty()) {
        out.pop();
    }
    out
}

struct Parser {
    raw: RawProblem,
    row_index: HashMap<String, usize>,
    col_index: HashMap<String, usize>,
    free: bool,
    integer: bool,
    rhs_set: Option<String>,
    range_set: Option<String>,
    bound_set: Option<String>,
    line: usize,
}

impl Parser {
    fn err(&self, msg: impl Into<String>) -> MpsError {
        MpsError::Syntax {
            line: self.line,
            msg: msg.into(),
        }
    }

    fn number(&self, tok: &str) -> Result<f64, MpsError> {
        let v = match tok.to_ascii_lowercase().as_str() {
            "inf" | "+inf" | "infinity" | "+infinity" => f64::INFINITY,
            "-inf" | "-infinity" => f64::NEG_INFINITY,
            _ => tok.parse::<f64>().map_err(|_| MpsError::BadNumber {
                line: self.line,
                token: tok.to_string(),
            })?,
        };
        if v.is_nan() {
            return Err(MpsError::BadNumber {
                line: self.line,
                token: tok.to_string(),
            });
        }
        Ok(v)
    }

    fn fields(&mut self, line: &str) -> Vec<String> {
        if line.contains("'MARKER'") {
            return line.split_whitespace().map(str::to_string).collect();
        }
        if !self.free {
            if fits_fixed(line) {
                let f = fixed_fields(line);
                if !f.iter().any(|t| t.contains(char::is_whitespace)) {
                    return f;
                }
            }
            self.free = true;
        }
        line.split_whitespace().map(str::to_string).collect()
    }

    /// Row index, or `None` for the objective row.
    fn row(&self, name: &str) -> Result<Option<usize>, MpsError> {
        if self.raw.objective_name.as_deref() == Some(name) {
            return Ok(None);
        }
        self.row_index
            .get(name)
            .copied()
            .map(Some)
            .ok_or_else(|| MpsError::UnknownRow {
                line: self.line,
                name: name.to_string(),
            })
    }

    fn column(&self, name: &str) -> Result<usize, MpsError> {
        self.col_index
            .get(name)
            .copied()
            .ok_or_else(|| MpsError::UnknownColumn {
                line: self.line,
                name: name.to_string(),
            })
    }

    fn rows_line(&mut self, f: &[String]) -> Result<(), MpsError> {
        if f.len() < 2 {
            return Err(self.err("ROWS entry needs a type and a name"));
        }
        let name = f[1].clone();
        let sense = match f[0].to_ascii_uppercase().as_str() {
            "N" => {
                if self.raw.objective_name.is_none() {
                    self.raw.objective_name = Some(name);
                }
                // further free rows are ignored
                return Ok(());
            }
            "L" => Sense::Le,
            "G" => Sense::Ge,
            "E" => Sense::Eq,
            other => return Err(self.err(format!("unknown row type '{other}'"))),
        };
        if self.row_index.contains_key(&name) || self.raw.objective_name.as_ref() == Some(&name) {
            return Err(MpsError::DuplicateRow {
                line: self.line,
                name,
            });
        }
        self.row_index.insert(name.clone(), self.raw.rows.len());
        self.raw.rows.push(RawRow {
            name,
            sense,
            rhs: 0.0,
            range: None,
        });
        Ok(())
    }

    fn columns_line(&mut self, f: &[String]) -> Result<(), MpsError> {
        if f.len() >= 3 && f[1].trim_matches('\'') == "MARKER" {
            match f[2].trim_matches('\'') {
                "INTORG" => self.integer = true,
                "INTEND" => self.integer = false,
                other => return Err(self.err(format!("unknown marker '{other}'"))),
            }
            return Ok(());
        }
        if f.len() < 3 || f.len().is_multiple_of(2) {
            return Err(self.err("COLUMNS entry needs a column and row/value pairs"));
        }
        let name = &f[0];
        let j = match self.col_index.get(name) {
            Some(&j) if j + 1 == self.raw.columns.len() => j,
            Some(_) => {
                return Err(MpsError::DuplicateColumn {
                    line: self.line,
                    name: name.clone(),
                })
            }
            None => {
                self.col_index.insert(name.clone(), self.raw.columns.len());
                self.raw.columns.push(RawColumn {
                    name: name.clone(),
                    integer: self.integer,
                    cost: 0.0,
                    coefs: Vec::new(),
                    lb: 0.0,
                    ub: f64::INFINITY,
                    lb_set: false,
                    ub_set: false,
                });
                self.raw.columns.len() - 1
            }
        };
        for pair in f[1..].chunks(2) {
            let v = self.number(&pair[1])?;
            match self.row(&pair[0])? {
                None => self.raw.columns[j].cost += v,
                Some(i) => self.raw.columns[j].coefs.push((i, v)),
            }
        }
        Ok(())
    }

    /// Splits an RHS/RANGES entry into its pairs, dropping the optional set name.
    fn set_pairs<'f>(
        &self,
        f: &'f [String],
        set: &mut Option<String>,
    ) -> Result<Option<&'f [String]>, MpsError> {
        let (name, pairs) = if f.len() % 2 == 1 {
            (Some(&f[0]), &f[1..])
        } else {
            (None, f)
        };
        if pairs.is_empty() {
            return Err(self.err("entry needs row/value pairs"));
        }
        if let Some(n) = name {
            match set {
                None => *set = Some(n.clone()),
                Some(s) if s != n => return Ok(None),
                _ => {}
            }
        }
        Ok(Some(pairs))
    }

    fn rhs_line(&mut self, f: &[String]) -> Result<(), MpsError> {
        let mut set = self.rhs_set.take();
        let pairs = self.set_pairs(f, &mut set);
        self.rhs_set = set;
        let Some(pairs) = pairs? else { return Ok(()) };
        for pair in pairs.chunks(2) {
            let v = self.number(&pair[1])?;
            match self.row(&pair[0])? {
                None => self.raw.objective_rhs = v,
                Some(i) => self.raw.rows[i].rhs = v,
            }
        }
        Ok(())
    }

    fn ranges_line(&mut self, f: &[String]) -> Result<(), MpsError> {
        let mut set = self.range_set.take();
        let pairs = self.set_pairs(f, &mut set);
        self.range_set = set;
        let Some(pairs) = pairs? else { return Ok(()) };
        for pair in pairs.chunks(2) {
            let v = self.number(&pair[1])?;
            match self.row(&pair[0])? {
                None => return Err(self.err("range on the objective row")),
                Some(i) => self.raw.rows[i].range = Some(v),
            }
        }
        Ok(())
    }

    fn bounds_line(&mut self, f: &[String]) -> Result<(), MpsError> {
        if f.len() < 2 {
            return Err(self.err("BOUNDS entry needs a type and a column"));
        }
        let kind = f[0].to_ascii_uppercase();
        let needs_value = matches!(kind.as_str(), "UP" | "LO" | "FX" | "LI" | "UI");
        let known = ["UP", "LO", "FX", "LI", "UI", "FR", "MI", "PL", "BV", "SC"];
        if !known.contains(&kind.as_str()) {
            return Err(MpsError::UnknownBoundType {
                line: self.line,
                kind: f[0].clone(),
            });
        }
        let has_set = if needs_value {
            f.len() >= 4
        } else {
            f.len() >= 3 && self.col_index.contains_key(&f[2])
        };
        let (set, col, val) = if has_set {
            (Some(&f[1]), &f[2], f.get(3))
        } else {
            (None, &f[1], f.get(2))
        };
        if let Some(s) = set {
            match &self.bound_set {
                None => self.bound_set = Some(s.clone()),
                Some(b) if b != s => return Ok(()),
                _ => {}
            }
        }
        let j = self.column(col)?;
        let v = match val {
            Some(t) => Some(self.number(t)?),
            None if needs_value => return Err(self.err(format!("{kind} bound needs a value"))),
            None => None,
        };
        let c = &mut self.raw.columns[j];
        match kind.as_str() {
            "UP" | "UI" => {
                let v = v.unwrap_or(f64::INFINITY);
                c.ub = v;
                c.ub_set = true;
                if v < 0.0 && c.lb == 0.0 && !c.lb_set {
                    c.lb = f64::NEG_INFINITY;
                }
                if kind == "UI" {
                    c.integer = true;
                }
            }
            "LO" | "LI" => {
                c.lb = v.unwrap_or(0.0);
                c.lb_set = true;
                if kind == "LI" {
                    c.integer = true;
                }
            }
            "FX" => {
                // a conflicting earlier LO/UP is kept so normalization reports crossed bounds
                let v = v.unwrap_or(0.0);
                if !(c.lb_set && c.lb > v) {
                    c.lb = v;
                }
                if !(c.ub_set && c.ub < v) {
                    c.ub = v;
                }
                c.lb_set = true;
                c.ub_set = true;
            }
            "FR" => {
                c.lb = f64::NEG_INFINITY;
                c.ub = f64::INFINITY;
            }
            "MI" => c.lb = f64::NEG_INFINITY,
            "PL" => c.ub = f64::INFINITY,
            "BV" => {
                c.integer = true;
                c.lb = 0.0;
                c.ub = 1.0;
            }
            _ => {
                return Err(MpsError::UnknownBoundType {
                    line: self.line,
                    kind: f[0].clone(),
                })
            }
        }
        Ok(())
    }

    fn objsense(&mut self, tok: &str) -> Result<(), MpsError> {
        match tok.to_ascii_uppercase().as_str() {
            "MAX" | "MAXIMIZE" => self.raw.maximize = true,
            "MIN" | "MINIMIZE" => self.raw.maximize = false,
            other => return Err(self.err(format!("unknown objective sense '{other}'"))),
        }
        Ok(())
    }
}

/// Parses MPS text. Fixed format is assumed until a data line breaks the fixed column layout.
pub fn parse_mps(text: &str) -> Result<RawProblem, MpsError> {
    let mut ps = Parser {
        raw: RawProblem::default(),
        row_index: HashMap::new(),
        col_index: HashMap::new(),
        free: false,
        integer: false,
        rhs_set: None,
        range_set: None,
        bound_set: None,
        line: 0,
    };
    let mut section = Section::None;
    for (k, line) in text.lines().enumerate() {
        ps.line = k + 1;
        let line = line.trim_end();
        if line.is_empty() || line.starts_with('*') {
            continue;
        }
        if !line.starts_with(' ') && !line.starts_with('\t') {
            let mut head = line.split_whitespace();
            let kw = head.next().unwrap_or("").to_ascii_uppercase();
            section = match kw.as_str() {
                "NAME" => {
                    ps.raw.name = head.collect::<Vec<_>>().join(" ");
                    Section::Name
                }
                "ROWS" => Section::Rows,
                "COLUMNS" => Section::Columns,
                "RHS" => Section::Rhs,
                "RANGES" => Section::Ranges,
                "BOUNDS" => Section::Bounds,
                "OBJSENSE" => {
                    if let Some(s) = head.next() {
                        ps.objsense(s)?;
                    }
                    Section::ObjSense
                }
                "ENDATA" => Section::End,
                other => return Err(ps.err(format!("unknown section '{other}'"))),
            };
            if section == Section::End {
                break;
            }
            continue;
        }
        if section == Section::ObjSense {
            let tok = line.split_whitespace().next().unwrap_or("");
            ps.objsense(tok)?;
            continue;
        }
        let f = ps.fields(line);
        if f.is_empty() {
            continue;
        }
        match section {
            Section::Rows => ps.rows_line(&f)?,
            Section::Columns => ps.columns_line(&f)?,
            Section::Rhs => ps.rhs_line(&f)?,
            Section::Ranges => ps.ranges_line(&f)?,
            Section::Bounds => ps.bounds_line(&f)?,
            Section::None | Section::Name | Section::ObjSense | Section::End => {
                return Err(ps.err("data line outside of a section"))
            }
        }
    }
    if section != Section::End {
        log::warn!("MPS input ended without ENDATA");
    }
    Ok(ps.raw)
}

/// Converts a raw model into the normalized `>=` form.
pub fn normalize(raw: &RawProblem) -> Result<Problem, MpsError> {
    let mut b = ProblemBuilder::new(raw.name.clone());
    b.maximize(raw.maximize);
    b.objective_offset(-raw.objective_rhs);
    for c in &raw.columns {
        b.add_var(c.name.clone(), c.cost, c.lb, c.ub, c.integer);
    }
    let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); raw.rows.len()];
    for (j, c) in raw.columns.iter().enumerate() {
        for &(i, v) in &c.coefs {
            rows[i].push((j, v));
        }
    }
    for (r, coefs) in raw.rows.iter().zip(&rows) {
        let (lo, hi) = match (r.sense, r.range) {
            (s, None) => match s {
                Sense::Ge => (r.rhs, f64::INFINITY),
                Sense::Le => (f64::NEG_INFINITY, r.rhs),
                Sense::Eq => (r.rhs, r.rhs),
            },
            (Sense::Ge, Some(rg)) => (r.rhs, r.rhs + rg.abs()),
            (Sense::Le, Some(rg)) => (r.rhs - rg.abs(), r.rhs),
            (Sense::Eq, Some(rg)) if rg >= 0.0 => (r.rhs, r.rhs + rg),
            (Sense::Eq, Some(rg)) => (r.rhs + rg, r.rhs),
        };
        b.add_ranged_row(r.name.clone(), coefs, lo, hi);
    }
    Ok(b.build()?)
}

pub fn read_mps_str(text: &str) -> Result<Problem, MpsError> {
    normalize(&parse_mps(text)?)
}

/// Reads an MPS file; the problem is named after the file stem when the file has no NAME.
pub fn read_mps_file(path: &Path) -> Result<Problem, MpsError> {
    let mut text = String::new();
    std::fs::File::open(path)?.read_to_string(&mut text)?;
    let p = read_mps_str(&text)?;
    if p.name().is_empty() {
        let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        return Ok(p.with_name(stem));
    }
    Ok(p)
}

fn num(v: f64) -> String {
    format!("{v}")
}

/// Free-format MPS of the normalized problem (all rows as `G`).
pub fn write_mps(p: &Problem) -> String {
    let mut s = String::new();
    let name = if p.name().is_empty() { "problem" } else { p.name() };
    let _ = writeln!(s, "NAME {name}");
    let sign = if p.is_maximize() { -1.0 } else { 1.0 };
    if p.is_maximize() {
        let _ = writeln!(s, "OBJSENSE\n    MAX");
    }
    let _ = writeln!(s, "ROWS\n N  obj");
    for r in p.row_names() {
        let _ = writeln!(s, " G  {r}");
    }
    let _ = writeln!(s, "COLUMNS");
    let a = p.matrix();
    let mut in_int = false;
    for j in 0..p.num_vars() {
        if p.is_integer(j) != in_int {
            in_int = p.is_integer(j);
            let tag = if in_int { "INTORG" } else { "INTEND" };
            let _ = writeln!(s, "    MARKER  'MARKER'  '{tag}'");
        }
        let v = &p.var_names()[j];
        let c = sign * p.objective()[j];
        if c != 0.0 {
            let _ = writeln!(s, "    {v}  obj  {}", num(c));
        }
        let (rows, vals) = a.col(j);
        for (&i, &x) in rows.iter().zip(vals) {
            let _ = writeln!(s, "    {v}  {}  {}", p.row_names()[i], num(x));
        }
        if c == 0.0 && rows.is_empty() {
            let _ = writeln!(s, "    {v}  obj  0");
        }
    }
    if in_int {
        let _ = writeln!(s, "    MARKER  'MARKER'  'INTEND'");
    }
    let _ = writeln!(s, "RHS");
    if p.objective_offset() != 0.0 {
        let _ = writeln!(s, "    RHS  obj  {}", num(-p.objective_offset()));
    }
    for (i, &b) in p.rhs().iter().enumerate() {
        if b != 0.0 {
            let _ = writeln!(s, "    RHS  {}  {}", p.row_names()[i], num(b));
        }
    }
    let _ = writeln!(s, "BOUNDS");
    for j in 0..p.num_vars() {
        let v = &p.var_names()[j];
        let (l, u) = (p.lower()[j], p.upper()[j]);
        if l == u {
            let _ = writeln!(s, " FX BND  {v}  {}", num(l));
            continue;
        }
        match (l.is_finite(), u.is_finite()) {
            (false, false) => {
                let _ = writeln!(s, " FR BND  {v}");
            }
            (false, true) => {
                let _ = writeln!(s, " MI BND  {v}");
                let _ = writeln!(s, " UP BND  {v}  {}", num(u));
            }
            (true, _) => {
                if l != 0.0 || (u.is_finite() && u < 0.0) {
                    let _ = writeln!(s, " LO BND  {v}  {}", num(l));
                }
                if u.is_finite() {
                    let _ = writeln!(s, " UP BND  {v}  {}", num(u));
                }
            }
        }
    }
    s.push_str("ENDATA\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "\
NAME          TINY
ROWS
 N  COST
 L  LIM1
COLUMNS
    X1        COST         1.0   LIM1         1.0
    X2        COST         2.0   LIM1         1.0
RHS
    RHS       LIM1         1.0
ENDATA
";

    #[test]
    fn fixed_format_le_row() {
        let raw = parse_mps(SMALL).unwrap();
        assert_eq!(raw.name, "TINY");
        assert_eq!(raw.rows.len(), 1);
        assert_eq!(raw.rows[0].sense, Sense::Le);
        assert_eq!(raw.rows[0].rhs, 1.0);
        let p = normalize(&raw).unwrap();
        assert_eq!(p.matrix().row(0), (&[0usize, 1][..], &[-1.0, -1.0][..]));
        assert_eq!(p.rhs(), &[-1.0]);
    }

    #[test]
    fn markers_ranges_and_bounds() {
        let text = "\
NAME m
OBJSENSE
    MAX
ROWS
 N obj
 E e1
 G g1
COLUMNS
 MARKER 'MARKER' 'INTORG'
 x obj 1 e1 1
 MARKER 'MARKER' 'INTEND'
 y obj 1 g1 1
 z g1 1
RHS
 rhs e1 3 g1 1 obj -5
RANGES
 rng g1 4
BOUNDS
 UP bnd x 5
 MI bnd y
 UP bnd z -2
ENDATA
";
        let raw = parse_mps(text).unwrap();
        assert!(raw.columns[0].integer && !raw.columns[1].integer);
        assert_eq!(raw.rows[1].range, Some(4.0));
        assert!(raw.maximize);
        assert_eq!(raw.columns[2].lb, f64::NEG_INFINITY);
        let p = normalize(&raw).unwrap();
        // e1 split into two rows, g1 ranged into two rows
        assert_eq!(p.num_rows(), 4);
        assert_eq!(p.rhs(), &[3.0, -3.0, 1.0, -5.0]);
        assert_eq!(p.row_names()[1], "e1__neg");
        assert_eq!(p.objective(), &[-1.0, -1.0, 0.0]);
        assert!(p.is_maximize());
        assert_eq!(p.objective_offset(), 5.0);
        assert_eq!(p.external_objective(-2.0), 7.0);
    }

    #[test]
    fn errors_carry_lines() {
        let bad = "NAME x\nROWS\n N obj\n L r\n L r\nENDATA\n";
        assert!(matches!(parse_mps(bad), Err(MpsError::DuplicateRow { line: 5, .. })));
        let bad = "NAME x\nROWS\n N obj\nCOLUMNS\n x nope 1\nENDATA\n";
        assert!(matches!(parse_mps(bad), Err(MpsError::UnknownRow { line: 5, .. })));
        let bad = "NAME x\nROWS\n N obj\nCOLUMNS\n x obj 1\nBOUNDS\n XX b x 1\nENDATA\n";
        assert!(matches!(parse_mps(bad), Err(MpsError::UnknownBoundType { line: 7, .. })));
        let bad = "NAME x\nROWS\n N obj\nCOLUMNS\n x obj abc\nENDATA\n";
        assert!(matches!(parse_mps(bad), Err(MpsError::BadNumber { line: 5, .. })));
        let bad = "NAME x\nROWS\n N obj\nCOLUMNS\n x obj 1\n y obj 1\n x obj 1\nENDATA\n";
        assert!(matches!(parse_mps(bad), Err(MpsError::DuplicateColumn { line: 7, .. })));
    }

    #[test]
    fn infeasible_fixed_pair() {
        let text = "NAME x\nROWS\n N obj\nCOLUMNS\n x obj 1\nBOUNDS\n LO b x 3\n FX b x 1\nENDATA\n";
        assert!(parse_mps(text).is_ok());
        assert!(matches!(read_mps_str(text), Err(MpsError::Model(ModelError::InfeasibleBounds { .. }))));
        let text = "NAME x\nROWS\n N obj\nCOLUMNS\n x obj 1\nBOUNDS\n FX b x 1\n LO b x 3\nENDATA\n";
        assert!(matches!(read_mps_str(text), Err(MpsError::Model(ModelError::InfeasibleBounds { .. }))));
    }

    #[test]
    fn roundtrip_normalized() {
        let text = "\
NAME rt
ROWS
 N obj
 L c1
 E c2
COLUMNS
 MARKER 'MARKER' 'INTORG'
 a obj -1 c1 2
 b obj -1 c1 2 c2 1
 MARKER 'MARKER' 'INTEND'
 y obj 0.5 c2 1
RHS
 rhs c1 3 c2 1
BOUNDS
 UP bnd a 1
 UP bnd b 1
 UP bnd y 4
ENDATA
";
        let p = read_mps_str(text).unwrap();
        let q = read_mps_str(&write_mps(&p)).unwrap();
        assert_eq!(p.objective(), q.objective());
        assert_eq!(p.rhs(), q.rhs());
        assert_eq!(p.lower(), q.lower());
        assert_eq!(p.upper(), q.upper());
        assert_eq!(p.integer_vars(), q.integer_vars());
        assert_eq!(p.row_names(), q.row_names());
        for i in 0..p.num_rows() {
            assert_eq!(p.matrix().row(i), q.matrix().row(i));
        }
    }
}

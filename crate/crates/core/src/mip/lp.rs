//! CPLEX LP text format, restricted to what [`MipModel`] can express.
//!
//! The symbol map and the objective constant are carried in comment lines so
//! a written file reads back into an identical model.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::mip::model::{Constraint, MipModel, Sense, VarKind, Variable};

fn write_terms(out: &mut String, terms: &[(usize, f64)], vars: &[Variable]) {
    if terms.is_empty() {
        out.push_str(" 0 ");
        out.push_str(vars.first().map_or("x", |v| v.name.as_str()));
        return;
    }
    for &(i, a) in terms {
        let sign = if a < 0.0 { '-' } else { '+' };
        let _ = write!(out, " {sign} {} {}", a.abs(), vars[i].name);
    }
}

fn sense_str(s: Sense) -> &'static str {
    match s {
        Sense::Le => "<=",
        Sense::Eq => "=",
        Sense::Ge => ">=",
    }
}

pub fn write_lp(model: &MipModel) -> String {
    let mut out = String::new();
    for (symbol, name) in model.name_map.iter() {
        let _ = writeln!(out, "\\ map {symbol} {name}");
    }
    if model.objective_offset != 0.0 {
        let _ = writeln!(out, "\\ offset {}", model.objective_offset);
    }
    out.push_str("Minimize\n obj:");
    write_terms(&mut out, &model.objective, &model.variables);
    out.push_str("\nSubject To\n");
    for c in &model.constraints {
        let _ = write!(out, " {}:", c.name);
        write_terms(&mut out, &c.terms, &model.variables);
        let _ = writeln!(out, " {} {}", sense_str(c.sense), c.rhs);
    }
    out.push_str("Bounds\n");
    for v in &model.variables {
        if v.lo == v.hi {
            let _ = writeln!(out, " {} = {}", v.name, v.lo);
        } else {
            let _ = writeln!(out, " {} <= {} <= {}", v.lo, v.name, v.hi);
        }
    }
    let binaries: Vec<&str> = model
        .variables
        .iter()
        .filter(|v| v.kind == VarKind::Binary)
        .map(|v| v.name.as_str())
        .collect();
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for b in binaries {
            let _ = writeln!(out, " {b}");
        }
    }
    out.push_str("End\n");
    out
}

#[derive(PartialEq)]
enum Section {
    Head,
    Objective,
    Rows,
    Bounds,
    Binaries,
    End,
}

fn num(tok: &str, line: usize) -> Result<f64> {
    tok.parse::<f64>().map_err(|_| Error::Parse {
        line,
        detail: format!("expected a number, got {tok:?}"),
    })
}

fn parse_sense(tok: &str) -> Option<Sense> {
    match tok {
        "<=" | "=<" | "<" => Some(Sense::Le),
        ">=" | "=>" | ">" => Some(Sense::Ge),
        "=" => Some(Sense::Eq),
        _ => None,
    }
}

/// Parse `[+|-] coef name ...` into named terms.
fn parse_terms(tokens: &[&str], line: usize) -> Result<Vec<(String, f64)>> {
    let mut terms = Vec::new();
    let mut sign = 1.0;
    let mut coef: Option<f64> = None;
    for &tok in tokens {
        match tok {
            "+" => sign = 1.0,
            "-" => sign = -1.0,
            _ => {
                if let Ok(v) = tok.parse::<f64>() {
                    coef = Some(v);
                } else {
                    terms.push((tok.to_string(), sign * coef.unwrap_or(1.0)));
                    sign = 1.0;
                    coef = None;
                }
            }
        }
    }
    if coef.is_some() {
        return Err(Error::Parse {
            line,
            detail: "dangling coefficient".into(),
        });
    }
    Ok(terms)
}

struct PendingRow {
    name: String,
    terms: Vec<(String, f64)>,
    sense: Sense,
    rhs: f64,
}

/// Read a file produced by [`write_lp`]. Variables are ordered as in the
/// Bounds section.
pub fn read_lp(text: &str) -> Result<MipModel> {
    let mut section = Section::Head;
    let mut map = Vec::new();
    let mut offset = 0.0;
    let mut objective = Vec::new();
    let mut rows = Vec::new();
    let mut variables: Vec<Variable> = Vec::new();
    let mut binaries = Vec::new();
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let trimmed = raw.trim();
        if let Some(comment) = trimmed.strip_prefix('\\') {
            let parts: Vec<&str> = comment.split_whitespace().collect();
            match parts.as_slice() {
                ["map", symbol, name] => map.push((symbol.to_string(), name.to_string())),
                ["offset", v] => offset = num(v, line)?,
                _ => {}
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        match trimmed.to_ascii_lowercase().as_str() {
            "minimize" | "minimise" | "min" => {
                section = Section::Objective;
                continue;
            }
            "subject to" | "st" | "s.t." => {
                section = Section::Rows;
                continue;
            }
            "bounds" => {
                section = Section::Bounds;
                continue;
            }
            "binaries" | "binary" => {
                section = Section::Binaries;
                continue;
            }
            "end" => {
                section = Section::End;
                continue;
            }
            _ => {}
        }
        let (label, body) = match trimmed.split_once(':') {
            Some((l, b)) if matches!(section, Section::Objective | Section::Rows) => {
                (Some(l.trim()), b)
            }
            _ => (None, trimmed),
        };
        let tokens: Vec<&str> = body.split_whitespace().collect();
        match section {
            Section::Objective => objective.extend(parse_terms(&tokens, line)?),
            Section::Rows => {
                let pos = tokens
                    .iter()
                    .position(|t| parse_sense(t).is_some())
                    .ok_or_else(|| Error::Parse {
                        line,
                        detail: "row without sense".into(),
                    })?;
                let sense = parse_sense(tokens[pos]).expect("checked");
                let rhs_tok = tokens.get(pos + 1).ok_or_else(|| Error::Parse {
                    line,
                    detail: "missing rhs".into(),
                })?;
                let name = label.ok_or_else(|| Error::Parse {
                    line,
                    detail: "unnamed row".into(),
                })?;
                rows.push(PendingRow {
                    name: name.to_string(),
                    terms: parse_terms(&tokens[..pos], line)?,
                    sense,
                    rhs: num(rhs_tok, line)?,
                });
            }
            Section::Bounds => {
                let var = match tokens.as_slice() {
                    [name, "=", v] => {
                        let v = num(v, line)?;
                        Variable {
                            name: name.to_string(),
                            lo: v,
                            hi: v,
                            kind: VarKind::Continuous,
                        }
                    }
                    [lo, "<=", name, "<=", hi] => Variable {
                        name: name.to_string(),
                        lo: num(lo, line)?,
                        hi: num(hi, line)?,
                        kind: VarKind::Continuous,
                    },
                    _ => {
                        return Err(Error::Parse {
                            line,
                            detail: format!("unsupported bound {trimmed:?}"),
                        })
                    }
                };
                variables.push(var);
            }
            Section::Binaries => binaries.extend(tokens.iter().map(|t| t.to_string())),
            Section::Head | Section::End => {
                return Err(Error::Parse {
                    line,
                    detail: format!("unexpected content {trimmed:?}"),
                })
            }
        }
    }
    if section != Section::End {
        return Err(Error::Parse {
            line: text.lines().count(),
            detail: "missing End".into(),
        });
    }
    assemble(variables, &binaries, &map, offset, objective, rows)
}

fn assemble(
    variables: Vec<Variable>,
    binaries: &[String],
    map: &[(String, String)],
    offset: f64,
    objective: Vec<(String, f64)>,
    rows: Vec<PendingRow>,
) -> Result<MipModel> {
    let mut model = MipModel::new();
    model.variables = variables;
    model.rebuild_index();
    for b in binaries {
        let i = model
            .var_index(b)
            .ok_or_else(|| Error::UnknownVariable(b.clone()))?;
        model.variables[i].kind = VarKind::Binary;
    }
    for (symbol, name) in map {
        model.name_map.insert(symbol, name)?;
    }
    let resolve = |model: &MipModel, terms: Vec<(String, f64)>| -> Result<Vec<(usize, f64)>> {
        terms
            .into_iter()
            .filter(|&(_, a)| a != 0.0)
            .map(|(n, a)| {
                model
                    .var_index(&n)
                    .map(|i| (i, a))
                    .ok_or(Error::UnknownVariable(n))
            })
            .collect()
    };
    model.objective = resolve(&model, objective)?;
    model.objective_offset = offset;
    for r in rows {
        let terms = resolve(&model, r.terms)?;
        model.constraints.push(Constraint {
            name: r.name,
            terms,
            sense: r.sense,
            rhs: r.rhs,
        });
    }
    Ok(model)
}

/// Free-format MPS. Binaries are integer columns between markers.
pub fn write_mps(model: &MipModel) -> String {
    let mut out = String::new();
    for (symbol, name) in model.name_map.iter() {
        let _ = writeln!(out, "* map {symbol} {name}");
    }
    out.push_str("NAME model\nROWS\n N obj\n");
    for c in &model.constraints {
        let t = match c.sense {
            Sense::Le => 'L',
            Sense::Eq => 'E',
            Sense::Ge => 'G',
        };
        let _ = writeln!(out, " {t} {}", c.name);
    }
    let mut columns: Vec<Vec<(&str, f64)>> = vec![Vec::new(); model.variables.len()];
    for &(i, a) in &model.objective {
        columns[i].push(("obj", a));
    }
    for c in &model.constraints {
        for &(i, a) in &c.terms {
            columns[i].push((c.name.as_str(), a));
        }
    }
    out.push_str("COLUMNS\n");
    let mut integer = false;
    for (v, col) in model.variables.iter().zip(&columns) {
        let is_int = v.kind == VarKind::Binary;
        if is_int != integer {
            let tag = if is_int { "INTORG" } else { "INTEND" };
            let _ = writeln!(out, " MARKER 'MARKER' '{tag}'");
            integer = is_int;
        }
        if col.is_empty() {
            let _ = writeln!(out, " {} obj 0", v.name);
        }
        for (row, a) in col {
            let _ = writeln!(out, " {} {row} {a}", v.name);
        }
    }
    if integer {
        out.push_str(" MARKER 'MARKER' 'INTEND'\n");
    }
    out.push_str("RHS\n");
    if model.objective_offset != 0.0 {
        let _ = writeln!(out, " RHS obj {}", -model.objective_offset);
    }
    for c in &model.constraints {
        if c.rhs != 0.0 {
            let _ = writeln!(out, " RHS {} {}", c.name, c.rhs);
        }
    }
    out.push_str("BOUNDS\n");
    for v in &model.variables {
        if v.lo == v.hi {
            let _ = writeln!(out, " FX BND {} {}", v.name, v.lo);
        } else {
            let _ = writeln!(out, " LO BND {} {}", v.name, v.lo);
            let _ = writeln!(out, " UP BND {} {}", v.name, v.hi);
        }
    }
    out.push_str("ENDATA\n");
    out
}

/// Read a file produced by [`write_mps`].
pub fn read_mps(text: &str) -> Result<MipModel> {
    let mut section = "";
    let mut map = Vec::new();
    let mut row_order: Vec<(String, Sense)> = Vec::new();
    let mut var_order: Vec<String> = Vec::new();
    let mut entries: Vec<(String, String, f64)> = Vec::new();
    let mut rhs: std::collections::HashMap<String, f64> = Default::default();
    let mut bounds: std::collections::HashMap<String, (f64, f64, bool)> = Default::default();
    let mut integer = false;
    let mut integers = Vec::new();
    let mut ended = false;
    for (ln, raw) in text.lines().enumerate() {
        let line = ln + 1;
        let trimmed = raw.trim();
        if let Some(comment) = trimmed.strip_prefix('*') {
            if let ["map", symbol, name] = comment.split_whitespace().collect::<Vec<_>>().as_slice()
            {
                map.push((symbol.to_string(), name.to_string()));
            }
            continue;
        }
        if trimmed.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if !raw.starts_with(' ') {
            section = match tokens[0] {
                "NAME" => "",
                "ROWS" | "COLUMNS" | "RHS" | "BOUNDS" => tokens[0],
                "ENDATA" => {
                    ended = true;
                    "END"
                }
                other => {
                    return Err(Error::Parse {
                        line,
                        detail: format!("unknown section {other}"),
                    })
                }
            };
            continue;
        }
        let bad = || Error::Parse {
            line,
            detail: format!("malformed {section} line {trimmed:?}"),
        };
        match (section, tokens.as_slice()) {
            ("ROWS", ["N", _]) => {}
            ("ROWS", [t, name]) => {
                let sense = match *t {
                    "L" => Sense::Le,
                    "E" => Sense::Eq,
                    "G" => Sense::Ge,
                    _ => return Err(bad()),
                };
                row_order.push((name.to_string(), sense));
            }
            ("COLUMNS", [_, "'MARKER'", tag]) => match *tag {
                "'INTORG'" => integer = true,
                "'INTEND'" => integer = false,
                _ => return Err(bad()),
            },
            ("COLUMNS", [var, row, a]) => {
                if var_order.last().map(String::as_str) != Some(*var) {
                    var_order.push(var.to_string());
                    if integer {
                        integers.push(var.to_string());
                    }
                }
                entries.push((var.to_string(), row.to_string(), num(a, line)?));
            }
            ("RHS", [_, row, v]) => {
                rhs.insert(row.to_string(), num(v, line)?);
            }
            ("BOUNDS", [kind, _, var, rest @ ..]) => {
                let e = bounds
                    .entry(var.to_string())
                    .or_insert((0.0, f64::INFINITY, false));
                match (*kind, rest) {
                    ("BV", []) => *e = (0.0, 1.0, true),
                    ("FX", [v]) => {
                        let v = num(v, line)?;
                        e.0 = v;
                        e.1 = v;
                    }
                    ("LO", [v]) => e.0 = num(v, line)?,
                    ("UP", [v]) => e.1 = num(v, line)?,
                    _ => return Err(bad()),
                }
            }
            _ => return Err(bad()),
        }
    }
    if !ended {
        return Err(Error::Parse {
            line: text.lines().count(),
            detail: "missing ENDATA".into(),
        });
    }
    let variables: Vec<Variable> = var_order
        .iter()
        .map(|name| {
            let (lo, hi, bin) = bounds
                .get(name)
                .copied()
                .unwrap_or((0.0, f64::INFINITY, false));
            Variable {
                name: name.clone(),
                lo,
                hi,
                kind: if bin {
                    VarKind::Binary
                } else {
                    VarKind::Continuous
                },
            }
        })
        .collect();
    let mut objective = Vec::new();
    let mut by_row: std::collections::HashMap<&str, Vec<(String, f64)>> = Default::default();
    for (var, row, a) in &entries {
        if *a == 0.0 {
            continue;
        }
        if row == "obj" {
            objective.push((var.clone(), *a));
        } else {
            by_row
                .entry(row.as_str())
                .or_default()
                .push((var.clone(), *a));
        }
    }
    let rows = row_order
        .iter()
        .map(|(name, sense)| PendingRow {
            name: name.clone(),
            terms: by_row.remove(name.as_str()).unwrap_or_default(),
            sense: *sense,
            rhs: rhs.get(name).copied().unwrap_or(0.0),
        })
        .collect();
    let offset = rhs.get("obj").map_or(0.0, |v| -v);
    assemble(variables, &integers, &map, offset, objective, rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> MipModel {
        let mut m = MipModel::new();
        let x = m.add_var("x[0]", -1.5, 2.0, VarKind::Continuous).unwrap();
        let y = m.add_var("y", 0.0, 1.0, VarKind::Binary).unwrap();
        let z = m.add_var("z", 3.0, 3.0, VarKind::Continuous).unwrap();
        m.add_row("r1", vec![(x, 1.0), (y, -0.1)], Sense::Le, 0.3);
        m.add_row("r2", vec![(x, 2.5), (z, 1e-7)], Sense::Eq, -1.0);
        m.add_row("r3", vec![(y, 1.0)], Sense::Ge, 0.0);
        m.set_objective(vec![(x, 1.0), (y, 1.0 / 3.0)], 0.25);
        m
    }

    #[test]
    fn lp_round_trip() {
        let m = tiny();
        let back = read_lp(&write_lp(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn mps_round_trip() {
        let m = tiny();
        let back = read_mps(&write_mps(&m)).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn malformed_lp_reports_line() {
        let err = read_lp("Minimize\n obj: + 1 x\nSubject To\n r: + 1 x 3\nEnd\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err:?}");
    }
}

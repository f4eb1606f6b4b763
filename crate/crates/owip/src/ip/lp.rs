//! LP-format text export plus a plain `name value` assignment codec, the
//! interchange surface for external solvers.

use std::fmt::Write as _;

use thiserror::Error;

use super::{Assignment, IpModel, LinTerm};

fn push_terms(out: &mut String, terms: &[LinTerm], model: &IpModel) {
    for (i, t) in terms.iter().enumerate() {
        let name = &model.var(t.var).name;
        let mag = t.coef.abs();
        if i == 0 {
            if t.coef < 0 {
                out.push_str("- ");
            }
        } else if t.coef < 0 {
            out.push_str(" - ");
        } else {
            out.push_str(" + ");
        }
        if mag != 1 {
            let _ = write!(out, "{mag} ");
        }
        out.push_str(name);
    }
}

/// Renders the model as LP text. Output is fully determined by the model:
/// the same build yields byte-identical files.
pub fn export_lp(model: &IpModel) -> String {
    let mut out = String::new();
    out.push_str("\\ One-way warehouse routing\n");
    out.push_str("Minimize\n obj: ");
    push_terms(&mut out, &model.objective, model);
    out.push('\n');
    out.push_str("Subject To\n");
    for c in &model.constraints {
        let _ = write!(out, " {}: ", c.name);
        push_terms(&mut out, &c.terms, model);
        let _ = writeln!(out, " {} {}", c.cmp.as_str(), c.rhs);
    }
    let generals: Vec<_> = model.vars.iter().filter(|v| !v.is_binary()).collect();
    let binaries: Vec<_> = model.vars.iter().filter(|v| v.is_binary()).collect();
    if !generals.is_empty() {
        out.push_str("Bounds\n");
        for v in &generals {
            let _ = writeln!(out, " {} <= {} <= {}", v.lo, v.name, v.hi);
        }
        out.push_str("Generals\n");
        for v in &generals {
            let _ = writeln!(out, " {}", v.name);
        }
    }
    if !binaries.is_empty() {
        out.push_str("Binaries\n");
        for v in &binaries {
            let _ = writeln!(out, " {}", v.name);
        }
    }
    out.push_str("End\n");
    out
}

/// Writes one `name value` line per nonzero variable, in variable order.
pub fn export_assignment(model: &IpModel, asg: &Assignment) -> String {
    let mut out = String::new();
    for (i, v) in model.vars.iter().enumerate() {
        let val = asg.values[i];
        if val != 0 {
            let _ = writeln!(out, "{} {}", v.name, val);
        }
    }
    out
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AssignmentParseError {
    #[error("line {line}: expected `name value`, got {got:?}")]
    Malformed { line: usize, got: String },
    #[error("line {line}: unknown variable {name:?}")]
    UnknownVariable { line: usize, name: String },
    #[error("line {line}: value {value:?} is not an integer")]
    BadValue { line: usize, value: String },
    #[error("line {line}: {name} = {value} is outside [{lo}, {hi}]")]
    OutOfBounds { line: usize, name: String, value: i64, lo: i64, hi: i64 },
}

/// Parses `name value` lines. Blank lines and `#` comments are skipped;
/// variables never mentioned stay zero.
pub fn parse_assignment(model: &IpModel, text: &str) -> Result<Assignment, AssignmentParseError> {
    let mut asg = Assignment::zeros(model);
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut parts = trimmed.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(AssignmentParseError::Malformed { line, got: trimmed.to_string() });
        };
        let Some(var) = model.var_by_name(name) else {
            return Err(AssignmentParseError::UnknownVariable { line, name: name.to_string() });
        };
        let Ok(v) = value.parse::<i64>() else {
            return Err(AssignmentParseError::BadValue { line, value: value.to_string() });
        };
        let spec = model.var(var);
        if v < spec.lo || v > spec.hi {
            return Err(AssignmentParseError::OutOfBounds {
                line,
                name: name.to_string(),
                value: v,
                lo: spec.lo,
                hi: spec.hi,
            });
        }
        asg.set(var, v);
    }
    Ok(asg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{GridMap, GridVertex, Instance, Robot};
    use crate::ip::build_model;
    use crate::topo::{extract_topo, map_endpoints, split_identical_endpoints, ObjectiveKind};

    fn model() -> IpModel {
        let map = GridMap::new(7, 13, vec![1, 4, 7], vec![1, 7, 13]).unwrap();
        let topo = extract_topo(&map);
        let inst = Instance {
            robots: vec![Robot { id: 0, start: GridVertex::new(1, 1), goal: GridVertex::new(4, 7) }],
            seed: 0,
        };
        let mapped = map_endpoints(&topo, &inst);
        let (topo, mapped) = split_identical_endpoints(&topo, &mapped);
        build_model(&topo, &mapped, ObjectiveKind::Total, false)
    }

    #[test]
    fn lp_export_is_deterministic_and_well_formed() {
        let m = model();
        let a = export_lp(&m);
        let b = export_lp(&m);
        assert_eq!(a, b);
        assert!(a.starts_with("\\ One-way warehouse routing\nMinimize\n obj: "));
        assert!(a.ends_with("End\n"));
        for section in ["Subject To\n", "Bounds\n", "Generals\n", "Binaries\n"] {
            assert!(a.contains(section), "missing {section:?}");
        }
        assert!(a.contains(" Eq1_r0: "));
        assert!(a.contains(" 3 <= u_r0_"));
    }

    #[test]
    fn negative_coefficients_render_with_minus_signs() {
        let m = model();
        let lp = export_lp(&m);
        let bal = lp.lines().find(|l| l.trim_start().starts_with("Eq3_bal_r0_c1_7:")).unwrap();
        assert!(bal.contains(" - x_r0_"), "{bal}");
        assert!(bal.ends_with("= 0"), "{bal}");
    }

    #[test]
    fn assignment_roundtrips_through_text() {
        let m = model();
        let mut asg = Assignment::zeros(&m);
        asg.set(m.var_by_name("x_r0_c1_1_p1_4").unwrap(), 1);
        asg.set(m.var_by_name("u_r0_p1_4").unwrap(), 3);
        let text = export_assignment(&m, &asg);
        assert_eq!(text, "x_r0_c1_1_p1_4 1\nu_r0_p1_4 3\n");
        let parsed = parse_assignment(&m, &text).unwrap();
        assert_eq!(parsed, asg);
    }

    #[test]
    fn parser_skips_comments_and_rejects_junk() {
        let m = model();
        let ok = parse_assignment(&m, "# comment\n\n  x_r0_c1_1_p1_4   1  \n").unwrap();
        assert_eq!(ok.get(m.var_by_name("x_r0_c1_1_p1_4").unwrap()), 1);

        assert!(matches!(
            parse_assignment(&m, "x_r0_c1_1_p1_4").unwrap_err(),
            AssignmentParseError::Malformed { line: 1, .. }
        ));
        assert!(matches!(
            parse_assignment(&m, "nope 1").unwrap_err(),
            AssignmentParseError::UnknownVariable { line: 1, .. }
        ));
        assert!(matches!(
            parse_assignment(&m, "x_r0_c1_1_p1_4 1.5").unwrap_err(),
            AssignmentParseError::BadValue { line: 1, .. }
        ));
        assert!(matches!(
            parse_assignment(&m, "u_r0_p1_4 2").unwrap_err(),
            AssignmentParseError::OutOfBounds { line: 1, value: 2, .. }
        ));
    }
}

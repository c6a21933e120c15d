//! CPLEX LP-format export for cross-checking with external solvers.

use std::collections::HashSet;
use std::fmt::Write;

use super::{Integrality, IntegerProgram};

fn sanitize(name: &str) -> String {
    let s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_.".contains(c) { c } else { '_' })
        .collect();
    match s.chars().next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => s,
        _ => format!("v_{s}"),
    }
}

fn unique_names<'a>(names: impl Iterator<Item = &'a str>) -> Vec<String> {
    let mut seen = HashSet::new();
    names
        .enumerate()
        .map(|(i, n)| {
            let mut s = sanitize(n);
            if !seen.insert(s.clone()) {
                s = format!("{s}_{i}");
                seen.insert(s.clone());
            }
            s
        })
        .collect()
}

fn term(out: &mut String, first: bool, coef: f64, var: &str) {
    match (coef < 0.0, first) {
        (false, true) => write!(out, " {coef} {var}"),
        (neg, _) => write!(out, " {} {} {var}", if neg { "-" } else { "+" }, coef.abs()),
    }
    .expect("writing to a String");
}

pub fn to_lp_format(ip: &IntegerProgram) -> String {
    let vars = unique_names(ip.variables.iter().map(|v| v.name.as_str()));
    let rows = unique_names(ip.constraints.iter().map(|c| c.name.as_str()));
    let mut out = String::from("Minimize\n obj:");
    if ip.objective.is_empty() {
        let _ = write!(out, " 0 {}", vars.first().map(String::as_str).unwrap_or("dummy"));
    }
    for (n, &(j, a)) in ip.objective.iter().enumerate() {
        term(&mut out, n == 0, a, &vars[j]);
    }
    out.push_str("\nSubject To\n");
    for (c, name) in ip.constraints.iter().zip(&rows) {
        let _ = write!(out, " {name}:");
        if c.coefficients.is_empty() {
            let _ = write!(out, " 0 {}", vars.first().map(String::as_str).unwrap_or("dummy"));
        }
        for (n, &(j, a)) in c.coefficients.iter().enumerate() {
            term(&mut out, n == 0, a, &vars[j]);
        }
        let _ = writeln!(out, " <= {}", c.rhs);
    }
    out.push_str("Bounds\n");
    for (v, name) in ip.variables.iter().zip(&vars) {
        let _ = writeln!(out, " {} <= {name} <= {}", v.lower, v.upper);
    }
    for (label, kind) in [("General", Integrality::Integer), ("Binary", Integrality::Binary)] {
        let names: Vec<&str> = ip
            .variables
            .iter()
            .zip(&vars)
            .filter(|(v, _)| v.integrality == kind)
            .map(|(_, n)| n.as_str())
            .collect();
        if !names.is_empty() {
            let _ = writeln!(out, "{label}\n {}", names.join(" "));
        }
    }
    out.push_str("End\n");
    out
}

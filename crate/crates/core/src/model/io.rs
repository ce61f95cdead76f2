//! Line-oriented text format for models.
//!
//! ```text
//! # comment lines start with '#'
//! <num_vars>
//! <cardinalities, space separated>
//! <num_factors>
//! <scope_size> <idx...>        one line per factor
//! <node table>                 one line per variable, state-major
//! <factor table>               one line per factor, row-major,
//!                              last scope variable fastest
//! ```
//!
//! Numbers are printed with 17 significant digits, which round-trips f64
//! exactly.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::model::{FactorGraph, LogPotentials};
use crate::real::Real;

pub(crate) fn fmt_real<T: Real>(x: T) -> String {
    format!("{:.16e}", x)
}

pub fn serialize_model<T: Real>(graph: &FactorGraph, potentials: &LogPotentials<T>) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{}", graph.num_vars());
    let cards: Vec<String> = graph.cardinalities().iter().map(|c| c.to_string()).collect();
    let _ = writeln!(out, "{}", cards.join(" "));
    let _ = writeln!(out, "{}", graph.num_factors());
    for a in 0..graph.num_factors() {
        let scope = graph.scope(a);
        let mut line = scope.len().to_string();
        for i in scope {
            let _ = write!(line, " {i}");
        }
        let _ = writeln!(out, "{line}");
    }
    for i in 0..graph.num_vars() {
        let entries: Vec<String> = potentials.node_table(i).iter().map(|&x| fmt_real(x)).collect();
        let _ = writeln!(out, "{}", entries.join(" "));
    }
    for a in 0..graph.num_factors() {
        let entries: Vec<String> = potentials
            .factor_table(a)
            .iter()
            .map(|&x| fmt_real(x))
            .collect();
        let _ = writeln!(out, "{}", entries.join(" "));
    }
    out
}

/// Iterator over meaningful lines with their 1-based numbers.
struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(text: &'a str) -> Self {
        Lines {
            inner: text.lines().enumerate(),
        }
    }

    fn next_content(&mut self, expect: &str) -> Result<(usize, &'a str)> {
        for (idx, line) in self.inner.by_ref() {
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            return Ok((idx + 1, trimmed));
        }
        Err(Error::Parse {
            line: 0,
            msg: format!("unexpected end of input, expected {expect}"),
        })
    }
}

fn parse_usize(line: usize, tok: &str, what: &str) -> Result<usize> {
    tok.parse::<usize>().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid {what}: '{tok}'"),
    })
}

fn parse_real<T: Real>(line: usize, tok: &str) -> Result<T> {
    let v = tok.parse::<f64>().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid number: '{tok}'"),
    })?;
    Ok(T::of(v))
}

fn parse_real_line<T: Real>(line: usize, text: &str, expected: usize, what: &str) -> Result<Vec<T>> {
    let vals: Vec<T> = text
        .split_whitespace()
        .map(|tok| parse_real(line, tok))
        .collect::<Result<_>>()?;
    if vals.len() != expected {
        return Err(Error::Parse {
            line,
            msg: format!("{what}: expected {expected} entries, found {}", vals.len()),
        });
    }
    Ok(vals)
}

pub fn parse_model<T: Real>(text: &str) -> Result<(FactorGraph, LogPotentials<T>)> {
    let mut lines = Lines::new(text);

    let (ln, tok) = lines.next_content("variable count")?;
    let num_vars = parse_usize(ln, tok, "variable count")?;

    let (ln, tok) = lines.next_content("cardinality line")?;
    let cards: Vec<usize> = tok
        .split_whitespace()
        .map(|t| parse_usize(ln, t, "cardinality"))
        .collect::<Result<_>>()?;
    if cards.len() != num_vars {
        return Err(Error::Parse {
            line: ln,
            msg: format!("expected {num_vars} cardinalities, found {}", cards.len()),
        });
    }

    let (ln, tok) = lines.next_content("factor count")?;
    let num_factors = parse_usize(ln, tok, "factor count")?;

    let mut factors = Vec::with_capacity(num_factors);
    for a in 0..num_factors {
        let (ln, tok) = lines.next_content("factor scope line")?;
        let toks: Vec<&str> = tok.split_whitespace().collect();
        if toks.is_empty() {
            return Err(Error::Parse {
                line: ln,
                msg: "empty factor scope line".into(),
            });
        }
        let size = parse_usize(ln, toks[0], "scope size")?;
        if toks.len() != size + 1 {
            return Err(Error::Parse {
                line: ln,
                msg: format!(
                    "factor {a}: scope size {size} but {} indices given",
                    toks.len() - 1
                ),
            });
        }
        let scope: Vec<usize> = toks[1..]
            .iter()
            .map(|t| parse_usize(ln, t, "scope index"))
            .collect::<Result<_>>()?;
        factors.push(scope);
    }

    let graph = FactorGraph::new(cards, factors).map_err(|e| Error::Parse {
        line: 0,
        msg: e.to_string(),
    })?;

    let mut node_tables = Vec::with_capacity(num_vars);
    for i in 0..num_vars {
        let (ln, tok) = lines.next_content("node table line")?;
        node_tables.push(parse_real_line(
            ln,
            tok,
            graph.cardinality(i),
            &format!("node table {i}"),
        )?);
    }
    let mut factor_tables = Vec::with_capacity(num_factors);
    for a in 0..num_factors {
        let (ln, tok) = lines.next_content("factor table line")?;
        factor_tables.push(parse_real_line(
            ln,
            tok,
            graph.factor_states(a),
            &format!("factor table {a}"),
        )?);
    }

    let potentials = LogPotentials::new(&graph, node_tables, factor_tables).map_err(|e| {
        Error::Parse {
            line: 0,
            msg: e.to_string(),
        }
    })?;
    Ok((graph, potentials))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_grid, sample_ising, CouplingMode, EnsembleSpec};

    #[test]
    fn round_trip_is_bitwise_identity() {
        let g = build_grid(3, 3, true).unwrap();
        let spec = EnsembleSpec {
            field_strength: 1.0,
            interaction_strength: 2.0,
            coupling: CouplingMode::Mixed,
            seed: 17,
            num_models: 1,
        };
        let p: LogPotentials = sample_ising(&g, &spec, 0).unwrap();
        let text = serialize_model(&g, &p);
        let (g2, p2): (_, LogPotentials) = parse_model(&text).unwrap();
        assert_eq!(g, g2);
        assert_eq!(p, p2);
        // Serializing again gives the same bytes.
        assert_eq!(text, serialize_model(&g2, &p2));
    }

    #[test]
    fn empty_factor_list_is_valid() {
        let text = "2\n2 3\n0\n0 0\n0 0 0\n";
        let (g, p): (_, LogPotentials) = parse_model(text).unwrap();
        assert_eq!(g.num_vars(), 2);
        assert_eq!(g.num_factors(), 0);
        assert_eq!(p.node_table(1), &[0.0, 0.0, 0.0]);
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = "# model\n\n2\n# cards\n2 2\n1\n2 0 1\n0 0\n0 0\n# table\n1 2 3 4\n";
        let (g, p): (_, LogPotentials) = parse_model(text).unwrap();
        assert_eq!(g.num_factors(), 1);
        assert_eq!(p.factor_table(0), &[1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn malformed_cardinality_reports_line() {
        let text = "2\n2 x\n0\n";
        match parse_model::<f64>(text) {
            Err(Error::Parse { line, msg }) => {
                assert_eq!(line, 2);
                assert!(msg.contains("cardinality"), "{msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_input_reports_missing_section() {
        let text = "2\n2 2\n1\n2 0 1\n0 0\n";
        assert!(parse_model::<f64>(text).is_err());
    }
}

use std::fmt::Write;

use super::{CnfFormula, Literal};
use crate::error::{Error, Result};

fn parse_err(line: usize, msg: impl std::fmt::Display) -> Error {
    Error::Parse(format!("dimacs line {line}: {msg}"))
}

/// Parses DIMACS CNF: `c` comment lines, one `p cnf <vars> <clauses>`
/// header, then clauses as whitespace-separated literals terminated by `0`.
/// A line starting with `%` ends the input.
pub fn parse_dimacs(text: &str) -> Result<CnfFormula> {
    let mut header: Option<(u32, usize)> = None;
    let mut clauses: Vec<Vec<Literal>> = Vec::new();
    let mut current: Vec<Literal> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('c') {
            continue;
        }
        if line.starts_with('%') {
            break;
        }
        if line.starts_with('p') {
            if header.is_some() {
                return Err(parse_err(lineno, "duplicate header"));
            }
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 4 || parts[0] != "p" || parts[1] != "cnf" {
                return Err(parse_err(lineno, "expected `p cnf <vars> <clauses>`"));
            }
            let vars = parts[2].parse::<u32>().map_err(|e| parse_err(lineno, e))?;
            let count = parts[3].parse::<usize>().map_err(|e| parse_err(lineno, e))?;
            header = Some((vars, count));
            continue;
        }
        let Some((vars, _)) = header else {
            return Err(parse_err(lineno, "clause before header"));
        };
        for tok in line.split_whitespace() {
            let lit = tok
                .parse::<Literal>()
                .map_err(|e| parse_err(lineno, format!("{tok:?}: {e}")))?;
            if lit == 0 {
                if current.is_empty() {
                    return Err(parse_err(lineno, "empty clause"));
                }
                clauses.push(std::mem::take(&mut current));
                continue;
            }
            if lit.unsigned_abs() > vars {
                return Err(parse_err(
                    lineno,
                    format!("literal {lit} exceeds declared {vars} variables"),
                ));
            }
            if current.len() == 3 {
                return Err(parse_err(lineno, "clause has more than 3 literals"));
            }
            current.push(lit);
        }
    }
    let Some((vars, count)) = header else {
        return Err(Error::Parse("dimacs: missing `p cnf` header".into()));
    };
    if !current.is_empty() {
        return Err(Error::Parse("dimacs: last clause is not terminated by 0".into()));
    }
    if clauses.len() != count {
        return Err(Error::Parse(format!(
            "dimacs: header declares {count} clauses, found {}",
            clauses.len()
        )));
    }
    CnfFormula::new(vars, clauses)
}

pub fn to_dimacs(f: &CnfFormula) -> String {
    let mut out = format!("p cnf {} {}\n", f.num_vars(), f.clauses().len());
    for c in f.clauses() {
        for l in c {
            write!(out, "{l} ").expect("writing to a String");
        }
        out.push_str("0\n");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_standard_input() {
        let f = parse_dimacs("c example\np cnf 3 2\n1 -2 3 0\n-1\n 2 0\n%\n0\n").unwrap();
        assert_eq!(f.num_vars(), 3);
        assert_eq!(f.clauses(), &[vec![1, -2, 3], vec![-1, 2]]);
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in [
            "",
            "1 2 0\n",
            "p cnf 2 1\n1 3 0\n",
            "p cnf 2 1\n1 2\n",
            "p cnf 2 2\n1 2 0\n",
            "p cnf 4 1\n1 2 3 4 0\n",
            "p cnf 2 1\n0\n",
            "p dnf 2 1\n1 0\n",
            "p cnf 2 1\np cnf 2 1\n1 0\n",
            "p cnf 2 1\n1 x 0\n",
        ] {
            assert!(parse_dimacs(bad).is_err(), "{bad:?}");
        }
    }

    proptest! {
        #[test]
        fn round_trip(clauses in prop::collection::vec(prop::collection::vec((1i32..=6, any::<bool>()), 1..=3), 0..8)) {
            let clauses: Vec<Vec<Literal>> = clauses
                .into_iter()
                .map(|c| c.into_iter().map(|(v, neg)| if neg { -v } else { v }).collect())
                .collect();
            let f = CnfFormula::new(6, clauses).unwrap();
            prop_assert_eq!(parse_dimacs(&to_dimacs(&f)).unwrap(), f);
        }
    }
}

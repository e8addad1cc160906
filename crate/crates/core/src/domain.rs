//! Chart domains as conjunctions of strict or non-strict inequalities
//! between coordinate expressions, e.g. `x4 > 0 and x1^2 + x2^2 < 1`.

use std::fmt;

use crate::expr::{self, Expr, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Cmp {
    Lt,
    Le,
    Gt,
    Ge,
}

#[derive(Debug, Clone, PartialEq)]
struct Constraint {
    lhs: Expr,
    op: Cmp,
    rhs: Expr,
    text: String,
}

impl Constraint {
    /// Positive when satisfied, measured as the distance of the two sides.
    fn slack(&self, point: &[f64]) -> f64 {
        let (l, r) = match (self.lhs.eval(point), self.rhs.eval(point)) {
            (Ok(l), Ok(r)) => (l, r),
            _ => return f64::NEG_INFINITY,
        };
        match self.op {
            Cmp::Gt | Cmp::Ge => l - r,
            Cmp::Lt | Cmp::Le => r - l,
        }
    }

    fn holds(&self, point: &[f64]) -> bool {
        let s = self.slack(point);
        match self.op {
            Cmp::Gt | Cmp::Lt => s > 0.0,
            Cmp::Ge | Cmp::Le => s >= 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Domain {
    source: String,
    constraints: Vec<Constraint>,
}

impl Default for Domain {
    fn default() -> Self {
        Domain::everywhere()
    }
}

impl fmt::Display for Domain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.constraints.is_empty() {
            f.write_str("true")
        } else {
            f.write_str(&self.source)
        }
    }
}

impl Domain {
    pub fn everywhere() -> Domain {
        Domain {
            source: "true".into(),
            constraints: Vec::new(),
        }
    }

    /// Conditions are separated by `and`, `&&` or `,`. An empty text or
    /// `true` is the whole coordinate space.
    pub fn parse(text: &str, coords: &[impl AsRef<str>]) -> Result<Domain, ParseError> {
        let trimmed = text.trim();
        if trimmed.is_empty() || trimmed == "true" {
            return Ok(Domain::everywhere());
        }
        let mut constraints = Vec::new();
        for (start, part) in split_conditions(text) {
            if part.trim().is_empty() {
                return Err(ParseError::Syntax {
                    offset: start,
                    message: "empty condition".into(),
                });
            }
            constraints.push(parse_condition(part, coords).map_err(|e| e.shifted(start))?);
        }
        Ok(Domain {
            source: trimmed.to_string(),
            constraints,
        })
    }

    pub fn contains(&self, point: &[f64]) -> bool {
        self.constraints.iter().all(|c| c.holds(point))
    }

    /// Text of the first condition that fails at `point`.
    pub fn violation(&self, point: &[f64]) -> Option<&str> {
        self.constraints
            .iter()
            .find(|c| !c.holds(point))
            .map(|c| c.text.as_str())
    }

    /// Smallest signed gap `lhs - rhs` (or `rhs - lhs` for `<`) over all
    /// conditions; `+inf` for the whole space.
    pub fn slack(&self, point: &[f64]) -> f64 {
        self.constraints
            .iter()
            .map(|c| c.slack(point))
            .fold(f64::INFINITY, f64::min)
    }

    /// First condition whose gap is below `margin`.
    pub fn margin_violation(&self, point: &[f64], margin: f64) -> Option<&str> {
        self.constraints
            .iter()
            .find(|c| !(c.slack(point) >= margin) || !c.holds(point))
            .map(|c| c.text.as_str())
    }
}

fn split_conditions(text: &str) -> Vec<(usize, &str)> {
    let bytes = text.as_bytes();
    let mut parts = Vec::new();
    let mut start = 0;
    let mut i = 0;
    let is_word = |b: u8| b.is_ascii_alphanumeric() || b == b'_';
    while i < bytes.len() {
        let sep = if bytes[i] == b',' {
            1
        } else if text[i..].starts_with("&&") {
            2
        } else if text[i..].starts_with("and")
            && (i == 0 || !is_word(bytes[i - 1]))
            && bytes.get(i + 3).map_or(true, |&b| !is_word(b))
        {
            3
        } else {
            0
        };
        if sep > 0 {
            parts.push((start, &text[start..i]));
            i += sep;
            start = i;
        } else {
            i += 1;
        }
    }
    parts.push((start, &text[start..]));
    parts
}

fn parse_condition(text: &str, coords: &[impl AsRef<str>]) -> Result<Constraint, ParseError> {
    let bytes = text.as_bytes();
    let pos = bytes.iter().position(|&b| b == b'<' || b == b'>').ok_or_else(|| {
        ParseError::Syntax {
            offset: 0,
            message: "condition needs one of <, <=, >, >=".into(),
        }
    })?;
    let strict = bytes.get(pos + 1) != Some(&b'=');
    let op = match (bytes[pos], strict) {
        (b'<', true) => Cmp::Lt,
        (b'<', false) => Cmp::Le,
        (_, true) => Cmp::Gt,
        (_, false) => Cmp::Ge,
    };
    let rhs_start = if strict { pos + 1 } else { pos + 2 };
    if text[rhs_start..].contains(['<', '>']) {
        return Err(ParseError::Syntax {
            offset: rhs_start + text[rhs_start..].find(['<', '>']).unwrap_or(0),
            message: "chained comparisons are not supported".into(),
        });
    }
    let lhs = expr::parse(&text[..pos], coords)?;
    let rhs = expr::parse(&text[rhs_start..], coords).map_err(|e| e.shifted(rhs_start))?;
    Ok(Constraint {
        lhs,
        op,
        rhs,
        text: text.trim().to_string(),
    })
}

//! Integer partitions and the explicit zonal polynomials of degree at most three.
//!
//! Each `C_pi` is evaluated from the power sums `p_i = trace(X^i)`:
//!
//! | partition | value |
//! |-----------|-------|
//! | (1)       | `p1` |
//! | (2)       | `(p1^2 + 2 p2) / 3` |
//! | (1,1)     | `2 (p1^2 - p2) / 3` |
//! | (3)       | `(p1^3 + 6 p1 p2 + 8 p3) / 15` |
//! | (2,1)     | `3 (p1^3 + p1 p2 - 2 p3) / 5` |
//! | (1,1,1)   | `(p1^3 - 3 p1 p2 + 2 p3) / 3` |

use std::fmt;

use crate::error::{Error, Result};
use crate::symcore::{power_sums, SymMatrix};

/// Highest degree with an explicit closed form.
pub const MAX_ZONAL_DEGREE: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Partition {
    parts: Vec<usize>,
}

impl Partition {
    pub fn new(parts: Vec<usize>) -> Result<Self> {
        if parts.is_empty() || parts.contains(&0) {
            return Err(Error::InvalidParameter(
                "partition parts must be positive and nonempty".into(),
            ));
        }
        if parts.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter(
                "partition parts must be nonincreasing".into(),
            ));
        }
        Ok(Self { parts })
    }

    pub fn parts(&self) -> &[usize] {
        &self.parts
    }

    pub fn weight(&self) -> usize {
        self.parts.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.parts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.parts.is_empty()
    }
}

impl fmt::Display for Partition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s: Vec<String> = self.parts.iter().map(|p| p.to_string()).collect();
        write!(f, "({})", s.join(","))
    }
}

/// All partitions of `t` with at most `max_parts` parts, lexicographically decreasing.
pub fn partitions(t: usize, max_parts: usize) -> Vec<Partition> {
    fn rec(rest: usize, cap: usize, slots: usize, cur: &mut Vec<usize>, out: &mut Vec<Partition>) {
        if rest == 0 {
            out.push(Partition { parts: cur.clone() });
            return;
        }
        if slots == 0 {
            return;
        }
        for p in (1..=cap.min(rest)).rev() {
            cur.push(p);
            rec(rest - p, p, slots - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    if t == 0 || max_parts == 0 {
        return out;
    }
    rec(t, t, max_parts, &mut Vec::new(), &mut out);
    out
}

/// `C_pi` from the power sums `(p1, p2, p3)` of the argument.
pub fn zonal_from_power_sums(pi: &Partition, p: [f64; 3]) -> Result<f64> {
    let [p1, p2, p3] = p;
    let v = match pi.parts() {
        [1] => p1,
        [2] => (p1 * p1 + 2.0 * p2) / 3.0,
        [1, 1] => 2.0 * (p1 * p1 - p2) / 3.0,
        [3] => (p1.powi(3) + 6.0 * p1 * p2 + 8.0 * p3) / 15.0,
        [2, 1] => 3.0 * (p1.powi(3) + p1 * p2 - 2.0 * p3) / 5.0,
        [1, 1, 1] => (p1.powi(3) - 3.0 * p1 * p2 + 2.0 * p3) / 3.0,
        _ => return Err(Error::UnsupportedDegree { t: pi.weight() }),
    };
    Ok(v)
}

/// Evaluates the zonal polynomial `C_pi(X)` for `|pi| <= 3`.
pub fn zonal_eval(pi: &Partition, x: &SymMatrix) -> Result<f64> {
    if pi.weight() > MAX_ZONAL_DEGREE {
        return Err(Error::UnsupportedDegree { t: pi.weight() });
    }
    let p = power_sums(x, 3)?;
    zonal_from_power_sums(pi, [p[0], p[1], p[2]])
}

/// `C_pi(I_d)`: every power sum of the identity equals `d`.
pub fn zonal_at_identity(pi: &Partition, d: usize) -> Result<f64> {
    let d = d as f64;
    zonal_from_power_sums(pi, [d, d, d])
}

use std::fmt;
use std::str::FromStr;

use num_traits::{One, Zero};

use crate::error::ParseError;
use crate::scalar::{format_rational, parse_rational, Rational};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    Min,
    Max,
}

impl Direction {
    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Min => "min",
            Direction::Max => "max",
        }
    }

    pub fn flip(self) -> Direction {
        match self {
            Direction::Min => Direction::Max,
            Direction::Max => Direction::Min,
        }
    }
}

impl FromStr for Direction {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "min" => Ok(Direction::Min),
            "max" => Ok(Direction::Max),
            other => Err(ParseError::syntax(0, format!("unknown direction `{other}`"))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Relation {
    Ge,
    Gt,
    Le,
    Lt,
}

impl Relation {
    pub fn holds<T: PartialOrd>(self, lhs: &T, rhs: &T) -> bool {
        match self {
            Relation::Ge => lhs >= rhs,
            Relation::Gt => lhs > rhs,
            Relation::Le => lhs <= rhs,
            Relation::Lt => lhs < rhs,
        }
    }

    pub fn is_lower_bound(self) -> bool {
        matches!(self, Relation::Ge | Relation::Gt)
    }

    pub fn is_strict(self) -> bool {
        matches!(self, Relation::Gt | Relation::Lt)
    }

    pub fn non_strict(self) -> Relation {
        match self {
            Relation::Gt => Relation::Ge,
            Relation::Lt => Relation::Le,
            r => r,
        }
    }

    /// Relation obtained when both sides are subtracted from one.
    pub fn complement(self) -> Relation {
        match self {
            Relation::Ge => Relation::Le,
            Relation::Gt => Relation::Lt,
            Relation::Le => Relation::Ge,
            Relation::Lt => Relation::Gt,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Relation::Ge => ">=",
            Relation::Gt => ">",
            Relation::Le => "<=",
            Relation::Lt => "<",
        }
    }

    pub fn keyword(self) -> &'static str {
        match self {
            Relation::Ge => "ge",
            Relation::Gt => "gt",
            Relation::Le => "le",
            Relation::Lt => "lt",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Relation> {
        match s {
            "ge" => Some(Relation::Ge),
            "gt" => Some(Relation::Gt),
            "le" => Some(Relation::Le),
            "lt" => Some(Relation::Lt),
            _ => None,
        }
    }
}

/// A threshold property `Pr^dir_{s0}(<>goal) rel lambda`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PropertySpec {
    pub direction: Direction,
    pub relation: Relation,
    pub lambda: Rational,
}

impl PropertySpec {
    pub fn new(direction: Direction, relation: Relation, lambda: Rational) -> Result<Self, ParseError> {
        if lambda < Rational::zero() || lambda > Rational::one() {
            return Err(ParseError::syntax(0, format!("threshold {} outside [0,1]", format_rational(&lambda))));
        }
        Ok(PropertySpec { direction, relation, lambda })
    }

    pub fn holds_for(&self, probability: &Rational) -> bool {
        self.relation.holds(probability, &self.lambda)
    }

    /// The equivalent property after exchanging goal and fail.
    pub fn swapped(&self) -> PropertySpec {
        PropertySpec {
            direction: self.direction.flip(),
            relation: self.relation.complement(),
            lambda: Rational::one() - &self.lambda,
        }
    }

    /// `<dir> <rel-keyword> <lambda>`, as used in certificate files.
    pub fn to_keyword_form(&self) -> String {
        format!("{} {} {}", self.direction, self.relation.keyword(), format_rational(&self.lambda))
    }

    pub fn from_keyword_form(s: &str) -> Result<Self, ParseError> {
        let parts: Vec<&str> = s.split_whitespace().collect();
        if parts.len() != 3 {
            return Err(ParseError::syntax(0, format!("malformed property `{s}`")));
        }
        let direction = parts[0].parse()?;
        let relation = Relation::from_keyword(parts[1])
            .ok_or_else(|| ParseError::syntax(0, format!("unknown relation `{}`", parts[1])))?;
        PropertySpec::new(direction, relation, parse_rational(parts[2])?)
    }
}

/// Grammar: `min>=2/5`, `max<0.3`, whitespace allowed around the operator.
impl FromStr for PropertySpec {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let s = s.trim();
        let (direction, rest) = if let Some(r) = s.strip_prefix("min") {
            (Direction::Min, r)
        } else if let Some(r) = s.strip_prefix("max") {
            (Direction::Max, r)
        } else {
            return Err(ParseError::syntax(0, format!("property must start with min or max: `{s}`")));
        };
        let rest = rest.trim_start();
        let (relation, value) = if let Some(v) = rest.strip_prefix(">=") {
            (Relation::Ge, v)
        } else if let Some(v) = rest.strip_prefix("<=") {
            (Relation::Le, v)
        } else if let Some(v) = rest.strip_prefix('>') {
            (Relation::Gt, v)
        } else if let Some(v) = rest.strip_prefix('<') {
            (Relation::Lt, v)
        } else {
            return Err(ParseError::syntax(0, format!("missing relation in `{s}`")));
        };
        PropertySpec::new(direction, relation, parse_rational(value)?)
    }
}

impl fmt::Display for PropertySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.direction, self.relation.symbol(), format_rational(&self.lambda))
    }
}

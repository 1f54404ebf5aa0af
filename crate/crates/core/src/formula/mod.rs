//! Model formulae in `y ~ a + b + a:b` notation.
//!
//! Supported operators: `+`, `:`, `*`, `-` (term removal), and the numeric
//! terms `1` / `0` for the intercept. Nesting, random effects and in-formula
//! function calls are rejected with [`Error::UnsupportedOperator`].

mod describe;
mod parser;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::dataset::{ColumnType, Dataset};
use crate::error::{Error, Result};
use crate::family::FamilyKind;

pub use self::describe::describe_model;

/// A main effect (one variable) or an interaction (several).
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Term {
    pub variables: Vec<String>,
}

impl Term {
    pub fn new<S: Into<String>>(variables: impl IntoIterator<Item = S>) -> Term {
        let mut vars: Vec<String> = Vec::new();
        for v in variables {
            let v = v.into();
            if !vars.contains(&v) {
                vars.push(v);
            }
        }
        assert!(!vars.is_empty(), "a term needs at least one variable");
        Term { variables: vars }
    }

    pub fn order(&self) -> usize {
        self.variables.len()
    }

    pub fn same_set(&self, other: &Term) -> bool {
        self.as_set() == other.as_set()
    }

    pub fn as_set(&self) -> BTreeSet<&str> {
        self.variables.iter().map(String::as_str).collect()
    }
}

fn quote(name: &str) -> String {
    let mut chars = name.chars();
    let plain = chars
        .next()
        .is_some_and(|c| c.is_alphabetic() || c == '_' || c == '.')
        && name.chars().all(|c| c.is_alphanumeric() || c == '_' || c == '.');
    if plain {
        name.to_string()
    } else {
        format!("`{name}`")
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.variables.iter().map(|v| quote(v)).collect();
        f.write_str(&parts.join(":"))
    }
}

/// Parsed formula. Term order is canonical: ascending interaction order,
/// ties broken by first appearance in the source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Formula {
    pub response: Option<String>,
    pub intercept: bool,
    pub terms: Vec<Term>,
}

impl Formula {
    /// Intercept-only formula without a response (`~ 1`).
    pub fn intercept_only() -> Formula {
        Formula {
            response: None,
            intercept: true,
            terms: Vec::new(),
        }
    }

    pub fn parse_location(text: &str) -> Result<Formula> {
        parse_formula(text, true)
    }

    /// Empty text is allowed and means intercept-only.
    pub fn parse_scale(text: &str) -> Result<Formula> {
        parse_formula(text, false)
    }

    pub fn is_intercept_only(&self) -> bool {
        self.terms.is_empty()
    }

    /// Predictor variables in first-use order, without duplicates.
    pub fn variables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for t in &self.terms {
            for v in &t.variables {
                if !out.contains(&v.as_str()) {
                    out.push(v);
                }
            }
        }
        out
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(r) = &self.response {
            write!(f, "{} ", quote(r))?;
        }
        f.write_str("~ ")?;
        let mut parts: Vec<String> = Vec::new();
        if !self.intercept {
            parts.push("0".into());
        } else if self.terms.is_empty() {
            parts.push("1".into());
        }
        parts.extend(self.terms.iter().map(Term::to_string));
        f.write_str(&parts.join(" + "))
    }
}

/// Parses formula text; duplicate terms are dropped with a logged warning.
pub fn parse_formula(text: &str, expects_response: bool) -> Result<Formula> {
    parse_formula_with_warnings(text, expects_response).map(|(f, _)| f)
}

pub fn parse_formula_with_warnings(
    text: &str,
    expects_response: bool,
) -> Result<(Formula, Vec<String>)> {
    parser::parse(text, expects_response)
}

/// The analyst's provisional model: family plus location and scale sub-models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: FamilyKind,
    pub location: Formula,
    pub scale: Option<Formula>,
    pub label: String,
}

impl ModelSpec {
    /// Parses both sub-models. For families with a scale parameter a missing
    /// or blank scale formula means a constant scale.
    pub fn parse(
        family: FamilyKind,
        location: &str,
        scale: Option<&str>,
        label: impl Into<String>,
    ) -> Result<ModelSpec> {
        let location = Formula::parse_location(location)?;
        let scale = match (family.has_scale(), scale) {
            (true, Some(text)) => Some(Formula::parse_scale(text)?),
            (true, None) => Some(Formula::intercept_only()),
            (false, Some(text)) if text.trim().is_empty() => None,
            (false, Some(_)) => return Err(Error::NoScaleParameter),
            (false, None) => None,
        };
        Ok(ModelSpec {
            family,
            location,
            scale,
            label: label.into(),
        })
    }

    pub fn response(&self) -> &str {
        self.location.response.as_deref().unwrap_or_default()
    }

    /// Response first, then location and scale predictors, deduplicated.
    pub fn variables(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        let all = self
            .location
            .response
            .as_deref()
            .into_iter()
            .chain(self.location.variables())
            .chain(self.scale.iter().flat_map(|s| s.variables()));
        for v in all {
            if !out.contains(&v) {
                out.push(v);
            }
        }
        out
    }

    /// Scale formula actually used by the family (`None` for scale-free families).
    pub fn effective_scale(&self) -> Option<Formula> {
        if self.family.has_scale() {
            Some(self.scale.clone().unwrap_or_else(Formula::intercept_only))
        } else {
            None
        }
    }
}

impl fmt::Display for ModelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {} [{}]", self.label, self.location, self.family)?;
        if let Some(s) = &self.scale {
            write!(f, " scale {s}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Binding {
    pub variable: String,
    #[serde(rename = "type")]
    pub ty: ColumnType,
}

/// Resolves every variable of `spec` against `d`.
pub fn validate_spec(spec: &ModelSpec, d: &Dataset) -> Result<Vec<Binding>> {
    if spec.location.response.is_none() {
        return Err(Error::Syntax {
            position: 0,
            message: "location formula requires a response".into(),
        });
    }
    if spec.scale.is_some() && !spec.family.has_scale() {
        return Err(Error::NoScaleParameter);
    }
    if spec.scale.as_ref().is_some_and(|s| s.response.is_some()) {
        return Err(Error::Syntax {
            position: 0,
            message: "a scale formula has no response".into(),
        });
    }
    spec.variables()
        .into_iter()
        .map(|v| {
            Ok(Binding {
                variable: v.to_string(),
                ty: d.column_type(v)?.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn terms(f: &Formula) -> Vec<Vec<&str>> {
        f.terms
            .iter()
            .map(|t| t.variables.iter().map(String::as_str).collect())
            .collect()
    }

    #[test]
    fn cylinders_location_and_scale() {
        let spec = ModelSpec::parse(FamilyKind::Normal, "mpg ~ cyl", Some("~ cyl"), "m").unwrap();
        assert_eq!(spec.location.response.as_deref(), Some("mpg"));
        assert!(spec.location.intercept);
        assert_eq!(terms(&spec.location), vec![vec!["cyl"]]);
        let scale = spec.scale.unwrap();
        assert_eq!(scale.response, None);
        assert!(scale.intercept);
        assert_eq!(terms(&scale), vec![vec!["cyl"]]);
    }

    #[test]
    fn constant_mean() {
        let f = Formula::parse_location("absences ~ 1").unwrap();
        assert_eq!(f.response.as_deref(), Some("absences"));
        assert!(f.intercept);
        assert!(f.terms.is_empty());
    }

    #[test]
    fn star_expands() {
        let f = Formula::parse_location("y ~ a*b").unwrap();
        assert_eq!(terms(&f), vec![vec!["a"], vec!["b"], vec!["a", "b"]]);
        let g = Formula::parse_location("y ~ b*a").unwrap();
        let set = |f: &Formula| -> BTreeSet<BTreeSet<String>> {
            f.terms
                .iter()
                .map(|t| t.variables.iter().cloned().collect())
                .collect()
        };
        assert_eq!(set(&f), set(&g));
    }

    #[test]
    fn canonical_order() {
        let f = Formula::parse_location("y ~ a:b + c + a").unwrap();
        assert_eq!(terms(&f), vec![vec!["c"], vec!["a"], vec!["a", "b"]]);
    }

    #[test]
    fn intercept_removal() {
        for text in ["y ~ 0 + x", "y ~ x - 1", "y ~ -1 + x", "y ~ x + 0"] {
            let f = Formula::parse_location(text).unwrap();
            assert!(!f.intercept, "{text}");
            assert_eq!(terms(&f), vec![vec!["x"]]);
        }
    }

    #[test]
    fn term_removal() {
        let f = Formula::parse_location("y ~ a*b - a:b").unwrap();
        assert_eq!(terms(&f), vec![vec!["a"], vec!["b"]]);
    }

    #[test]
    fn duplicates_warn() {
        let (f, w) = parse_formula_with_warnings("y ~ a + a + b:a + a:b", true).unwrap();
        assert_eq!(terms(&f), vec![vec!["a"], vec!["b", "a"]]);
        assert_eq!(w.len(), 2);
    }

    #[test]
    fn empty_scale_is_intercept_only() {
        assert_eq!(Formula::parse_scale("").unwrap(), Formula::intercept_only());
        assert_eq!(Formula::parse_scale("  ~ ").unwrap(), Formula::intercept_only());
        assert_eq!(Formula::parse_scale("1").unwrap(), Formula::intercept_only());
    }

    #[test]
    fn errors() {
        let e = Formula::parse_location("y ~~ x").unwrap_err();
        assert!(matches!(e, Error::Syntax { position: 3, .. }), "{e:?}");
        let e = Formula::parse_location("y ~ x + (1|g)").unwrap_err();
        assert!(matches!(e, Error::UnsupportedOperator { position: 8, .. }), "{e:?}");
        let e = Formula::parse_location("y ~ a/b").unwrap_err();
        assert!(matches!(e, Error::UnsupportedOperator { .. }));
        let e = Formula::parse_location("y ~ log(x)").unwrap_err();
        assert!(matches!(e, Error::UnsupportedOperator { position: 7, .. }), "{e:?}");
        assert!(Formula::parse_location("x + z").is_err());
        assert!(Formula::parse_scale("y ~ x").is_err());
        assert!(Formula::parse_location("y ~ x +").is_err());
        assert!(Formula::parse_location("y ~ 2").is_err());
        assert!(Formula::parse_location("y ~").is_err());
        assert!(Formula::parse_location("   ").is_err());
    }

    #[test]
    fn display_round_trip() {
        for text in ["y ~ a*b", "y ~ 0 + a + b:c", "y ~ 1", "~ x", "`my var` ~ `a b`:c"] {
            let f = parse_formula(text, text.contains("y") || text.starts_with('`')).unwrap();
            let printed = f.to_string();
            let again = parse_formula(&printed, f.response.is_some()).unwrap();
            assert_eq!(again, f, "{text} -> {printed}");
        }
    }

    #[test]
    fn scale_rejected_for_poisson() {
        assert_eq!(
            ModelSpec::parse(FamilyKind::Poisson, "y ~ x", Some("~ x"), "p").unwrap_err(),
            Error::NoScaleParameter
        );
        let s = ModelSpec::parse(FamilyKind::NegativeBinomial, "y ~ x", None, "nb").unwrap();
        assert_eq!(s.scale, Some(Formula::intercept_only()));
    }
}

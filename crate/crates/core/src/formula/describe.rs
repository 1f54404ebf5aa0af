use super::{Formula, ModelSpec, Term};
use crate::family::FamilyKind;

fn distribution_sentence(family: FamilyKind, response: &str) -> String {
    match family {
        FamilyKind::Normal => format!("{response} is normally distributed"),
        FamilyKind::LogNormal => format!("{response} is log-normally distributed"),
        FamilyKind::LogitNormal => format!("{response} is logit-normally distributed"),
        FamilyKind::Logistic => format!("{response} is a binary outcome with logistic probability"),
        FamilyKind::Poisson => format!("{response} is Poisson distributed"),
        FamilyKind::NegativeBinomial => {
            format!("{response} follows a negative binomial distribution")
        }
    }
}

fn list(names: &[String]) -> String {
    match names {
        [] => String::new(),
        [one] => one.clone(),
        [init @ .., last] => format!("{} and {}", init.join(", "), last),
    }
}

fn effect_sentence(term: &Term, parameter: &str) -> String {
    match term.variables.as_slice() {
        [single] => format!("its {parameter} depends on {single}"),
        [first, rest @ ..] => format!(
            "the effect of {first} on the {parameter} depends on {}",
            list(rest)
        ),
        [] => unreachable!("terms are non-empty"),
    }
}

fn sub_model(formula: &Formula, parameter: &str, out: &mut Vec<String>) {
    if formula.is_intercept_only() {
        out.push(format!("its {parameter} is constant"));
    } else {
        out.extend(formula.terms.iter().map(|t| effect_sentence(t, parameter)));
    }
}

/// Plain-language sentences for the model bar: the distributional
/// assumption, then one sentence per asserted location and scale effect.
pub fn describe_model(spec: &ModelSpec) -> Vec<String> {
    let mut out = vec![distribution_sentence(spec.family, spec.response())];
    let location = if spec.family == FamilyKind::Logistic {
        "probability"
    } else {
        "mean"
    };
    sub_model(&spec.location, location, &mut out);
    if let Some(scale) = spec.effective_scale() {
        let parameter = if spec.family == FamilyKind::NegativeBinomial {
            "dispersion"
        } else {
            "variance"
        };
        sub_model(&scale, parameter, &mut out);
    }
    out
}

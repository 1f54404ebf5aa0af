//! Parses a handful of model formulas and prints their canonical form and
//! plain-language description.
//!
//! `cargo run --example parse_formulas`

use vismodel::family::FamilyKind;
use vismodel::formula::{describe_model, parse_formula, parse_formula_with_warnings, ModelSpec};

fn main() {
    for text in ["y ~ a*b*c", "y ~ a*b - a:b", "y ~ 0 + x", "y ~ x + x", "y ~~ x", "y ~ (1|g)"] {
        match parse_formula_with_warnings(text, true) {
            Ok((f, warnings)) => {
                let terms: Vec<String> = f.terms.iter().map(ToString::to_string).collect();
                println!("{text:<16} -> {f}   terms [{}]", terms.join(", "));
                for w in warnings {
                    println!("{:<16}    note: {w}", "");
                }
            }
            Err(e) => println!("{text:<16} -> error: {e}"),
        }
    }

    println!();
    let models = [
        (FamilyKind::Normal, "mpg ~ cyl", Some("~ cyl")),
        (FamilyKind::Normal, "absences ~ 1", Some("~ study_time")),
        (FamilyKind::NegativeBinomial, "absences ~ g_edu + study_time", None),
        (FamilyKind::Logistic, "passed ~ hours * tutor", None),
    ];
    for (family, loc, scale) in models {
        let spec = ModelSpec::parse(family, loc, scale, loc).expect("valid model");
        println!("{family} {loc}{}", scale.map(|s| format!(", scale {s}")).unwrap_or_default());
        for line in describe_model(&spec) {
            println!("  {line}");
        }
    }

    // Scale formulas take no response.
    assert!(parse_formula("~ study_time", false).is_ok());
}

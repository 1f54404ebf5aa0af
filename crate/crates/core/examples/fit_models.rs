//! Fits several families to the bundled data and prints coefficient tables
//! and log-likelihoods, including a fit that is flagged rather than failed.
//!
//! `cargo run --release --example fit_models`

use vismodel::dataset::{load_csv, Dataset};
use vismodel::family::FamilyKind;
use vismodel::fit::{coefficient_table, fit_model};
use vismodel::formula::ModelSpec;

fn load(name: &str) -> Dataset {
    let path = format!("{}/data/{name}.csv", env!("CARGO_MANIFEST_DIR"));
    load_csv(std::fs::File::open(path).expect("bundled data present"), name).expect("valid csv")
}

fn report(d: &Dataset, family: FamilyKind, loc: &str, scale: Option<&str>) -> vismodel::Result<()> {
    let spec = ModelSpec::parse(family, loc, scale, loc)?;
    let m = fit_model(d, &spec)?;
    println!(
        "{family} {loc}{}  log_lik={:.3} iterations={} n_obs={}",
        scale.map(|s| format!(" | {s}")).unwrap_or_default(),
        m.log_lik,
        m.iterations,
        m.n_obs
    );
    match coefficient_table(&m) {
        Ok(table) => {
            for c in table {
                println!("  {:<20} {:>10.4}  ({:.4})", c.label, c.estimate, c.std_error);
            }
        }
        Err(e) => println!("  {e}: {}", m.diagnostic.as_deref().unwrap_or("")),
    }
    Ok(())
}

fn main() -> vismodel::Result<()> {
    let absences = load("absences");
    let cars = load("cars");
    report(&absences, FamilyKind::Poisson, "absences ~ g_edu + study_time", None)?;
    report(&absences, FamilyKind::NegativeBinomial, "absences ~ g_edu + study_time", None)?;
    report(&absences, FamilyKind::Normal, "absences ~ 1", Some("~ study_time"))?;
    report(&cars, FamilyKind::Normal, "mpg ~ cyl", Some("~ cyl"))?;
    report(&cars, FamilyKind::LogNormal, "hp ~ wt", None)?;
    report(&cars, FamilyKind::Logistic, "am ~ wt + hp + mpg", None)?;
    // A constant outcome has no spread to estimate; the fit is flagged, not failed.
    let flat = vismodel::dataset::Dataset::new(
        "flat",
        vec![vismodel::dataset::Column::infer(
            "y",
            vismodel::dataset::ColumnData::Numeric(vec![Some(2.0); 12]),
            10,
        )],
    )?;
    report(&flat, FamilyKind::Normal, "y ~ 1", None)?;
    Ok(())
}

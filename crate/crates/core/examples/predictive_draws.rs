//! Draws coefficient vectors from a fitted model's sampling distribution,
//! simulates one predictive dataset per draw and compares it with the data.
//!
//! `cargo run --release --example predictive_draws`

use vismodel::dataset::load_csv;
use vismodel::family::FamilyKind;
use vismodel::fit::fit_model;
use vismodel::formula::ModelSpec;
use vismodel::predict::{draw_parameters, model_seed, predictive_dataset, residuals};

fn summary(values: &[f64]) -> (f64, f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let zeros = values.iter().filter(|&&v| v == 0.0).count() as f64 / n;
    (mean, var.sqrt(), zeros)
}

fn main() -> vismodel::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/absences.csv");
    let d = load_csv(std::fs::File::open(path).expect("bundled data present"), "absences")?;
    let observed: Vec<f64> = d
        .column("absences")?
        .numeric()
        .expect("numeric outcome")
        .iter()
        .flatten()
        .copied()
        .collect();
    let (mean, sd, zeros) = summary(&observed);
    println!("observed           mean {mean:6.2}  sd {sd:6.2}  zeros {:4.1}%", 100.0 * zeros);

    for family in [FamilyKind::Poisson, FamilyKind::NegativeBinomial] {
        let spec = ModelSpec::parse(family, "absences ~ g_edu + study_time", None, family.as_str())?;
        let m = fit_model(&d, &spec)?;
        let seed = model_seed(42, &spec.label);
        for draw in draw_parameters(&m, 3, seed)? {
            let block = predictive_dataset(&m, &d, &draw, seed)?;
            let (mean, sd, zeros) = summary(&block.outcome);
            println!(
                "{:<18} mean {mean:6.2}  sd {sd:6.2}  zeros {:4.1}%",
                format!("{family} draw {}", draw.draw_index),
                100.0 * zeros
            );
        }
        let r = residuals(&m, &d)?;
        let rss: f64 = r.residuals.iter().map(|e| e * e).sum();
        println!("{:<18} residual rms {:.3}", family.as_str(), (rss / r.residuals.len() as f64).sqrt());
    }
    Ok(())
}

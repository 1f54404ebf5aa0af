//! Builds a model check for two nested negative binomial models and writes
//! the layout JSON and predictive table CSV a front end would render.
//!
//! `cargo run --release --example check_layout -- [OUT_DIR]`

use vismodel::chart::{compose_check, ChartSpec, Scale};
use vismodel::dataset::load_csv;
use vismodel::family::FamilyKind;
use vismodel::fit::fit_model;
use vismodel::formula::ModelSpec;
use vismodel::predict::assemble_check;

fn main() -> vismodel::Result<()> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "target/check_layout".into());
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/absences.csv");
    let d = load_csv(std::fs::File::open(path).expect("bundled data present"), "absences")?;

    let models = ["absences ~ g_edu", "absences ~ g_edu + study_time"]
        .into_iter()
        .map(|loc| fit_model(&d, &ModelSpec::parse(FamilyKind::NegativeBinomial, loc, None, loc)?))
        .collect::<vismodel::Result<Vec<_>>>()?;
    let table = assemble_check(&d, &models, 50, 517)?;

    for chart in [
        ChartSpec::xy("study_time", "absences"),
        ChartSpec { column: Some("g_edu".into()), ..ChartSpec { y: Some("absences".into()), ..Default::default() } },
        ChartSpec { show_residuals: true, ..ChartSpec::xy("study_time", "absences") },
    ] {
        let layout = compose_check(&chart, &table)?;
        let y = match &layout.panels[0].scales.y {
            Some(Scale::Quantitative { domain: Some([lo, hi]) }) => format!("[{lo:.2}, {hi:.2}]"),
            other => format!("{other:?}"),
        };
        println!(
            "{:?} {:?}: {} panels, y domain {y}",
            layout.kind,
            layout.view,
            layout.panels.len(),
        );
    }

    std::fs::create_dir_all(&out).expect("create output directory");
    let layout = compose_check(&ChartSpec::xy("study_time", "absences"), &table)?;
    std::fs::write(format!("{out}/layout.json"), serde_json::to_string_pretty(&layout).unwrap())
        .expect("write layout");
    table.write_csv(std::fs::File::create(format!("{out}/predictions.csv")).expect("create csv"))?;
    println!("wrote {out}/layout.json and {out}/predictions.csv ({} records)", table.len());
    Ok(())
}

//! Loads the bundled absences data, prints its inferred schema, then applies
//! a filter and a transform. Filters always run before transforms, whatever
//! order they are listed in.
//!
//! `cargo run --example load_and_pipeline`

use vismodel::dataset::{load_csv, ColumnType, CompareOp, Filter, Transform};

fn main() -> vismodel::Result<()> {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/absences.csv");
    let file = std::fs::File::open(path).expect("bundled data present");
    let d = load_csv(file, "absences")?;

    println!("{} rows", d.n_rows());
    for col in d.columns() {
        match &col.ty {
            ColumnType::Continuous => println!("  {:<12} continuous", col.name),
            ColumnType::Discrete { levels } => {
                let levels: Vec<String> = levels.iter().map(ToString::to_string).collect();
                println!("  {:<12} discrete [{}]", col.name, levels.join(", "));
            }
        }
    }

    let transforms = [Transform::log("study_time")];
    let filters = [
        Filter::exclude("g_edu", CompareOp::Eq, "none"),
        Filter::include("age", CompareOp::Le, 18.0),
    ];
    let out = d.apply_pipeline(&filters, &transforms)?;
    println!("\nafter pipeline: {} rows", out.n_rows());
    for (i, step) in out.pipeline().iter().enumerate() {
        println!("  {}. {step}", i + 1);
    }

    // A transform outside its domain names the offending rows.
    match d.apply_transform(&Transform::log("absences")) {
        Ok(_) => println!("\nunexpected: log(absences) succeeded"),
        Err(e) => println!("\nlog(absences): {e}"),
    }
    Ok(())
}

//! Regenerates the bundled synthetic datasets in `data/`.
//!
//! `absences.csv`: 517 students, 10 variables. Absences are negative binomial
//! with a clear guardian-education (`g_edu`) effect and a weak `study_time`
//! effect; the other columns are noise for faceting.
//!
//! `cars.csv`: 32 cars whose mileage mean and spread both depend on the
//! number of cylinders.
//!
//! Run with `cargo run --example generate_data`; the output is deterministic.

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Normal, Poisson};

/// Log-mean of absences per guardian-education level.
const EDU_EFFECT: [(&str, f64); 4] = [
    ("higher", 0.9),
    ("none", 1.9),
    ("primary", 1.6),
    ("secondary", 1.25),
];
const STUDY_TIME_EFFECT: f64 = -0.04;
/// Negative binomial size (theta); sigma = 1/sqrt(theta).
const THETA: f64 = 1.6;

fn absences(rng: &mut ChaCha8Rng) -> String {
    let mut out = String::from(
        "school,sex,age,address,famsize,g_edu,study_time,failures,health,absences\n",
    );
    let study = Gamma::new(3.0, 1.6).unwrap();
    for _ in 0..517 {
        let school = if rng.random::<f64>() < 0.65 { "GP" } else { "MS" };
        let sex = if rng.random::<bool>() { "F" } else { "M" };
        let age = rng.random_range(15..=21);
        let address = if rng.random::<f64>() < 0.7 { "U" } else { "R" };
        let famsize = if rng.random::<f64>() < 0.7 { "GT3" } else { "LE3" };
        let (edu, effect) = EDU_EFFECT[rng.random_range(0..4)];
        let study_time: f64 = (study.sample(rng) * 100.0_f64).round() / 100.0;
        let failures = [0, 0, 0, 0, 0, 1, 1, 2, 3][rng.random_range(0..9)];
        let health = rng.random_range(1..=5);

        let lambda = (effect + STUDY_TIME_EFFECT * study_time).exp();
        let rate = Gamma::new(THETA, lambda / THETA).unwrap().sample(rng);
        let y = if rate > 0.0 {
            Poisson::new(rate).unwrap().sample(rng) as u64
        } else {
            0
        };
        writeln!(
            out,
            "{school},{sex},{age},{address},{famsize},{edu},{study_time},{failures},{health},{y}"
        )
        .unwrap();
    }
    out
}

fn cars(rng: &mut ChaCha8Rng) -> String {
    let mut out = String::from("model,mpg,cyl,hp,wt,am\n");
    // (cylinders, mean mpg, sd mpg, mean hp, mean weight)
    let groups = [(4, 26.7, 4.5, 82.0, 2.3), (6, 19.7, 1.5, 122.0, 3.1), (8, 15.1, 2.6, 209.0, 4.0)];
    for i in 0..32 {
        let (cyl, mean, sd, hp, wt) = groups[[0, 0, 1, 2, 2][i % 5]];
        let mpg: f64 = Normal::new(mean, sd).unwrap().sample(rng);
        let hp: f64 = Normal::new(hp, hp * 0.15).unwrap().sample(rng);
        let wt: f64 = Normal::new(wt, 0.3).unwrap().sample(rng);
        let am = u8::from(rng.random::<f64>() < 0.4);
        writeln!(
            out,
            "car{:02},{:.1},{cyl},{:.0},{:.3},{am}",
            i + 1,
            mpg,
            hp.max(50.0),
            wt.max(1.5)
        )
        .unwrap();
    }
    out
}

fn main() -> std::io::Result<()> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    std::fs::create_dir_all(&dir)?;
    let mut rng = ChaCha8Rng::seed_from_u64(20_240_517);
    std::fs::write(dir.join("absences.csv"), absences(&mut rng))?;
    let mut rng = ChaCha8Rng::seed_from_u64(1_974);
    std::fs::write(dir.join("cars.csv"), cars(&mut rng))?;
    println!("wrote {}", dir.display());
    Ok(())
}

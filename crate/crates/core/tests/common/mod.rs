#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use vismodel::dataset::{Column, ColumnData, Dataset};
use vismodel::family::{FamilyKind, FamilyParams};
use vismodel::formula::ModelSpec;

pub const LOCATION: &str = "y ~ x1 + x2 + g";
pub const SCALE: &str = "~ x1";

/// True coefficients for [`LOCATION`] (intercept, x1, x2, gb, gc) and, for
/// scale families, [`SCALE`] (intercept, x1).
pub fn truth(family: FamilyKind) -> (Vec<f64>, Vec<f64>) {
    match family {
        FamilyKind::Normal => (vec![1.0, 0.8, -0.5, 0.4, -0.3], vec![-0.3, 0.2]),
        FamilyKind::LogNormal => (vec![0.5, 0.3, -0.4, 0.2, 0.3], vec![-0.5, 0.15]),
        FamilyKind::LogitNormal => (vec![0.2, 0.5, -0.3, 0.3, -0.2], vec![-0.4, 0.2]),
        FamilyKind::Logistic => (vec![0.3, 0.9, -0.6, 0.5, -0.4], vec![]),
        FamilyKind::Poisson => (vec![0.7, 0.3, -0.3, 0.25, -0.2], vec![]),
        FamilyKind::NegativeBinomial => (vec![0.9, 0.3, -0.3, 0.25, -0.2], vec![-0.4, 0.2]),
    }
}

pub struct Simulated {
    pub data: Dataset,
    pub spec: ModelSpec,
    /// Location then scale coefficients.
    pub truth: Vec<f64>,
}

pub fn numeric(name: &str, values: Vec<f64>) -> Column {
    Column::infer(name, ColumnData::Numeric(values.into_iter().map(Some).collect()), 10)
}

pub fn text(name: &str, values: Vec<&str>) -> Column {
    Column::infer(
        name,
        ColumnData::Text(values.into_iter().map(|s| Some(s.to_string())).collect()),
        10,
    )
}

/// `n` rows from the model `LOCATION` / `SCALE` with the family's true coefficients.
pub fn simulate(family: FamilyKind, n: usize, seed: u64) -> Simulated {
    let (loc, scale) = truth(family);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    let mut g = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let a: f64 = rng.sample(StandardNormal);
        let b: f64 = rng.random_range(-1.0..1.0);
        // Cycle levels so every level is present even for tiny n.
        let level = ["a", "b", "c"][(i + rng.random_range(0..3)) % 3];
        let gb = f64::from(u8::from(level == "b"));
        let gc = f64::from(u8::from(level == "c"));
        let eta = loc[0] + loc[1] * a + loc[2] * b + loc[3] * gb + loc[4] * gc;
        let params = if family.has_scale() {
            FamilyParams::with_scale(eta, (scale[0] + scale[1] * a).exp())
        } else {
            FamilyParams::location(eta)
        };
        y.push(family.sample_outcome(params, &mut rng).unwrap());
        x1.push(a);
        x2.push(b);
        g.push(level);
    }
    let data = Dataset::new(
        "sim",
        vec![numeric("y", y), numeric("x1", x1), numeric("x2", x2), text("g", g)],
    )
    .unwrap();
    let spec = ModelSpec::parse(family, LOCATION, family.has_scale().then_some(SCALE), family.as_str())
        .unwrap();
    Simulated {
        data,
        spec,
        truth: loc.into_iter().chain(scale).collect(),
    }
}

pub fn normal_draws(rng: &mut ChaCha8Rng, n: usize, mean: f64, sd: f64) -> Vec<f64> {
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            mean + sd * z
        })
        .collect()
}

//! Synthetic decision-process generator with known potential outcomes.
//!
//! The design draws a binary sensitive attribute, Gaussian covariates whose
//! mean is shifted for the disadvantaged group, a capped logistic treatment
//! decision, and Bernoulli potential outcomes under logistic models; the
//! observed outcome reveals the potential outcome selected by the decision.
//! Oracle columns are kept so evaluation against the counterfactual ground
//! truth stays possible.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Record};
use crate::error::Result;
use crate::stats::expit;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct DgpSpec {
    pub n: usize,
    pub seed: u64,
    /// P(A = 1).
    pub p_a: f64,
    /// Covariate mean shift applied when A = 1.
    pub shift: [f64; 4],
    /// Logit coefficients on (A, X1..X4) for the decision probability.
    pub d_coefs: [f64; 5],
    /// Logit coefficients on (A, X1..X4) for P(Y0 = 1).
    pub y0_coefs: [f64; 5],
    /// Logit coefficients on (A, X1..X4) for P(Y1 = 1).
    pub y1_coefs: [f64; 5],
    /// Upper cap on the decision probability, so every unit retains positive
    /// probability of remaining untreated.
    pub cap: f64,
}

impl Default for DgpSpec {
    fn default() -> Self {
        DgpSpec {
            n: 1000,
            seed: 0,
            p_a: 0.3,
            shift: [1.0, -0.8, 4.0, 2.0],
            d_coefs: [0.2, -1.0, 1.0, -1.0, 1.0],
            y0_coefs: [-5.0, 2.0, -3.0, 4.0, -5.0],
            y1_coefs: [1.0, -2.0, 3.0, -4.0, 5.0],
            cap: 0.975,
        }
    }
}

fn dot5(coefs: &[f64; 5], a: f64, x: &[f64]) -> f64 {
    coefs[0] * a + coefs[1] * x[0] + coefs[2] * x[1] + coefs[3] * x[2] + coefs[4] * x[3]
}

impl DgpSpec {
    /// Decision probability for a unit, including the cap.
    pub fn propensity(&self, a: f64, x: &[f64]) -> f64 {
        expit(dot5(&self.d_coefs, a, x)).min(self.cap)
    }

    /// P(Y0 = 1 | A, X): both the untreated mean outcome and, because the
    /// outcome is binary, its conditional second moment.
    pub fn mu0(&self, a: f64, x: &[f64]) -> f64 {
        expit(dot5(&self.y0_coefs, a, x))
    }

    pub fn mu1(&self, a: f64, x: &[f64]) -> f64 {
        expit(dot5(&self.y1_coefs, a, x))
    }
}

/// Derived stream ids; each column of the table consumes an independent
/// stream of the seeded generator so edits to one column's sampling never
/// perturb another's.
enum Stream {
    Attribute = 0,
    Covariates = 1,
    Decision = 2,
    Outcome0 = 3,
    Outcome1 = 4,
}

fn column_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// Draws a dataset of `spec.n` units. Deterministic in `spec.seed`.
pub fn generate(spec: &DgpSpec) -> Result<Dataset> {
    let n = spec.n;
    let mut a_rng = column_rng(spec.seed, Stream::Attribute);
    let mut x_rng = column_rng(spec.seed, Stream::Covariates);
    let mut d_rng = column_rng(spec.seed, Stream::Decision);
    let mut y0_rng = column_rng(spec.seed, Stream::Outcome0);
    let mut y1_rng = column_rng(spec.seed, Stream::Outcome1);

    let a: Vec<u8> = (0..n).map(|_| u8::from(a_rng.gen::<f64>() < spec.p_a)).collect();
    let mut records = Vec::with_capacity(n);
    for &ai in &a {
        let af = f64::from(ai);
        let x: Vec<f64> = (0..4)
            .map(|j| {
                let z: f64 = StandardNormal.sample(&mut x_rng);
                z + af * spec.shift[j]
            })
            .collect();
        let pi = spec.propensity(af, &x);
        let d = u8::from(d_rng.gen::<f64>() < pi);
        let y0 = f64::from(y0_rng.gen::<f64>() < spec.mu0(af, &x));
        let y1 = f64::from(y1_rng.gen::<f64>() < spec.mu1(af, &x));
        let y = if d == 0 { y0 } else { y1 };
        records.push(Record {
            a: ai,
            x,
            s: vec![],
            d: Some(d),
            y,
            y0: Some(y0),
            y1: Some(y1),
        });
    }
    Dataset::new(records, (0.0, 1.0))
}

/// The accuracy-optimal prediction of the untreated outcome: its true
/// conditional mean under the design.
pub fn bayes_predictions(spec: &DgpSpec, data: &Dataset) -> Vec<f64> {
    data.records()
        .iter()
        .map(|r| spec.mu0(f64::from(r.a), &r.x))
        .collect()
}

/// True per-row nuisance values (propensity, untreated mean, untreated second
/// moment), for analyses that assume known nuisances.
pub fn true_nuisances(spec: &DgpSpec, data: &Dataset) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut pi = Vec::with_capacity(data.n());
    let mut mu0 = Vec::with_capacity(data.n());
    for r in data.records() {
        let af = f64::from(r.a);
        pi.push(spec.propensity(af, &r.x));
        mu0.push(spec.mu0(af, &r.x));
    }
    let nu0 = mu0.clone();
    (pi, mu0, nu0)
}

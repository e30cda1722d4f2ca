use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Gradients, NeuralError, ParamId, ParamStore};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    /// Central-difference step.
    pub epsilon: f64,
    /// Pass threshold on the maximum relative error.
    pub tolerance: f64,
    /// Minimum number of coordinates to probe overall.
    pub samples: usize,
    /// Minimum number of coordinates to probe per parameter tensor.
    pub min_per_param: usize,
    /// Denominator floor for the relative error, so coordinates whose
    /// analytic and numeric gradients are both ~0 do not divide by zero.
    pub abs_floor: f64,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            epsilon: 1e-5,
            tolerance: 1e-4,
            samples: 200,
            min_per_param: 8,
            abs_floor: 1e-6,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateCheck {
    pub param: String,
    pub index: usize,
    pub analytic: f64,
    pub numeric: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checks: Vec<CoordinateCheck>,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl GradCheckReport {
    /// Worst relative error per parameter tensor, in store order.
    pub fn per_param(&self) -> Vec<(String, f64)> {
        let mut out: Vec<(String, f64)> = Vec::new();
        for c in &self.checks {
            match out.iter_mut().find(|(n, _)| *n == c.param) {
                Some((_, e)) => *e = e.max(c.rel_error),
                None => out.push((c.param.clone(), c.rel_error)),
            }
        }
        out
    }
}

/// `|a - n| / max(|a| + |n|, floor)`
pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = (analytic.abs() + numeric.abs()).max(floor);
    if denom == 0.0 {
        0.0
    } else {
        (analytic - numeric).abs() / denom
    }
}

/// Compares `analytic` against central finite differences of `loss_fn`.
///
/// Probes a seeded random subset of coordinates covering every parameter
/// tensor; every coordinate is probed when the store is small enough.
pub fn gradient_check<F>(
    store: &ParamStore,
    analytic: &Gradients,
    mut loss_fn: F,
    options: &GradCheckOptions,
) -> Result<GradCheckReport, NeuralError>
where
    F: FnMut(&ParamStore) -> Result<f64, NeuralError>,
{
    if analytic.len() != store.len() {
        return Err(NeuralError::ShapeMismatch {
            context: "gradient check",
            expected: vec![store.len()],
            found: vec![analytic.len()],
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let total = store.num_scalars();
    let groups = store.len().max(1);
    let per_param = options
        .min_per_param
        .max(options.samples.div_ceil(groups));

    let mut coords: Vec<(ParamId, usize)> = Vec::new();
    for (id, _, t) in store.iter() {
        let take = if total <= options.samples {
            t.len()
        } else {
            per_param.min(t.len())
        };
        let mut picked: Vec<usize> = sample(&mut rng, t.len(), take).into_vec();
        picked.sort_unstable();
        coords.extend(picked.into_iter().map(|i| (id, i)));
    }

    let mut work = store.clone();
    let mut checks = Vec::with_capacity(coords.len());
    let (mut max_rel, mut max_abs) = (0.0f64, 0.0f64);
    for (id, i) in coords {
        let orig = work.get(id).data()[i];
        work.get_mut(id).data_mut()[i] = orig + options.epsilon;
        let plus = loss_fn(&work)?;
        work.get_mut(id).data_mut()[i] = orig - options.epsilon;
        let minus = loss_fn(&work)?;
        work.get_mut(id).data_mut()[i] = orig;

        let numeric = (plus - minus) / (2.0 * options.epsilon);
        let a = analytic.get(id).data()[i];
        let rel = relative_error(a, numeric, options.abs_floor);
        max_rel = max_rel.max(rel);
        max_abs = max_abs.max((a - numeric).abs());
        checks.push(CoordinateCheck {
            param: store.name(id).to_string(),
            index: i,
            analytic: a,
            numeric,
            rel_error: rel,
        });
    }
    Ok(GradCheckReport {
        checks,
        max_rel_error: max_rel,
        max_abs_error: max_abs,
        tolerance: options.tolerance,
        passed: max_rel < options.tolerance,
    })
}

//! Central finite-difference validation of [`Graph::backward`].

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Graph, Var};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// How the numeric derivative of one coordinate is estimated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Difference {
    /// `(f(θ+h) − f(θ−h)) / 2h`.
    #[default]
    Central,
    /// Ridders' extrapolation over a shrinking ladder of central
    /// differences starting at `100·h`. Resolves coordinates whose
    /// gradient is small enough for round-off to swamp a single quotient.
    Ridders,
}

#[derive(Clone, Debug)]
pub struct GradCheckOptions {
    /// Central-difference half step.
    pub step: f64,
    pub difference: Difference,
    /// Minimum number of coordinates to probe; everything is probed when
    /// the parameters have fewer coordinates in total.
    pub coordinates: usize,
    /// Lower bound on probes per parameter tensor, so small tensors are
    /// never skipped.
    pub min_per_param: usize,
    pub seed: u64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        Self {
            step: 1e-5,
            difference: Difference::Central,
            coordinates: 200,
            min_per_param: 8,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub coordinates_checked: usize,
    /// (parameter index, flat coordinate, analytic, numeric) of the worst probe.
    pub worst: Option<(usize, usize, f64, f64)>,
}

/// Worst relative error between analytic and central-difference gradients,
/// with default probing options apart from `step_h`.
pub fn grad_check<F>(forward: F, params: &[Tensor<f64>], step_h: f64) -> Result<f64>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    let opts = GradCheckOptions {
        step: step_h,
        ..GradCheckOptions::default()
    };
    Ok(grad_check_with(forward, params, &opts)?.max_relative_error)
}

/// `forward` receives a fresh graph and one variable per entry of
/// `params` (bound as differentiable leaves) and must return a scalar node.
pub fn grad_check_with<F>(forward: F, params: &[Tensor<f64>], opts: &GradCheckOptions) -> Result<GradCheckReport>
where
    F: Fn(&mut Graph<f64>, &[Var]) -> Result<Var>,
{
    if !opts.step.is_finite() || opts.step <= 0.0 {
        return Err(Error::Contract(format!(
            "finite-difference step must be positive, got {}",
            opts.step
        )));
    }

    let mut graph = Graph::new();
    let vars: Vec<Var> = params.iter().map(|p| graph.param(p.clone())).collect();
    let objective = forward(&mut graph, &vars)?;
    let base = graph.value(objective).item()?;
    let grads = graph.backward(objective)?;

    let eval = |values: &[Tensor<f64>]| -> Result<f64> {
        let mut g = Graph::new();
        let vs: Vec<Var> = values.iter().map(|p| g.param(p.clone())).collect();
        let out = forward(&mut g, &vs)?;
        g.value(out).item()
    };
    let again = eval(params)?;
    if again.to_bits() != base.to_bits() {
        return Err(Error::Determinism(format!(
            "two evaluations at the same point gave {base} and {again}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let total: usize = params.iter().map(Tensor::len).sum();
    let mut report = GradCheckReport::default();
    let mut perturbed = params.to_vec();

    for (pi, p) in params.iter().enumerate() {
        let n = p.len();
        let quota = if total <= opts.coordinates {
            n
        } else {
            let share = (opts.coordinates * n).div_ceil(total);
            share.max(opts.min_per_param).min(n)
        };
        let analytic = grads.get(vars[pi]).expect("every bound parameter has a gradient entry");
        let mut coords: Vec<usize> = index::sample(&mut rng, n, quota).into_vec();
        coords.sort_unstable();

        for c in coords {
            let orig = p.data()[c];
            let mut quotient = |h: f64| -> Result<f64> {
                perturbed[pi].data_mut()[c] = orig + h;
                let plus = eval(&perturbed)?;
                perturbed[pi].data_mut()[c] = orig - h;
                let minus = eval(&perturbed)?;
                perturbed[pi].data_mut()[c] = orig;
                Ok((plus - minus) / (2.0 * h))
            };
            let numeric = match opts.difference {
                Difference::Central => quotient(opts.step)?,
                Difference::Ridders => ridders(&mut quotient, 100.0 * opts.step)?,
            };
            let a = analytic.data()[c];
            let denom = a.abs().max(numeric.abs()).max(1e-8);
            let rel = (a - numeric).abs() / denom;
            report.coordinates_checked += 1;
            if rel > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = rel.max(report.max_relative_error);
                report.worst = Some((pi, c, a, numeric));
            }
        }
    }
    Ok(report)
}

/// Polynomial extrapolation of central differences to zero step.
fn ridders(quotient: &mut impl FnMut(f64) -> Result<f64>, h0: f64) -> Result<f64> {
    const SHRINK: f64 = 1.4;
    const LEVELS: usize = 10;
    let shrink2 = SHRINK * SHRINK;
    let mut table = [[0.0f64; LEVELS]; LEVELS];
    let mut h = h0;
    table[0][0] = quotient(h)?;
    let mut best = table[0][0];
    let mut err = f64::INFINITY;
    for i in 1..LEVELS {
        h /= SHRINK;
        table[0][i] = quotient(h)?;
        let mut fac = shrink2;
        for j in 1..=i {
            table[j][i] = (table[j - 1][i] * fac - table[j - 1][i - 1]) / (fac - 1.0);
            fac *= shrink2;
            let e = (table[j][i] - table[j - 1][i])
                .abs()
                .max((table[j][i] - table[j - 1][i - 1]).abs());
            if e <= err {
                err = e;
                best = table[j][i];
            }
        }
        if (table[i][i] - table[i - 1][i - 1]).abs() >= 2.0 * err {
            break;
        }
    }
    Ok(best)
}

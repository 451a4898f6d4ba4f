//! Least-squares Gaussian fits to 1D histograms.

use thiserror::Error;

/// Lower bound on fitted widths, in lattice sites.
pub const MIN_WIDTH: f64 = 0.5;
/// Iteration cap for the Levenberg–Marquardt loop.
pub const MAX_ITERATIONS: usize = 500;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("histogram is empty")]
    Empty,
    #[error("histogram has a negative or non-finite entry at index {0}")]
    InvalidEntry(usize),
    #[error("histogram has zero total mass")]
    ZeroMass,
    #[error("fit did not converge within {0} iterations")]
    NoConvergence(usize),
}

/// `amplitude · exp(−(x − center)² / 2 width²)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GaussianFit {
    pub center: f64,
    pub width: f64,
    pub amplitude: f64,
    /// Root-mean-square misfit over the histogram.
    pub residual: f64,
}

impl GaussianFit {
    pub fn eval(&self, x: f64) -> f64 {
        gauss(x, self.amplitude, self.center, self.width)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TwoGaussianFit {
    /// Components sorted by descending weight (`amplitude · width`).
    pub components: [GaussianFit; 2],
    pub residual: f64,
}

impl TwoGaussianFit {
    pub fn dominant(&self) -> &GaussianFit {
        &self.components[0]
    }
}

fn gauss(x: f64, a: f64, c: f64, w: f64) -> f64 {
    let d = (x - c) / w;
    a * (-0.5 * d * d).exp()
}

/// Fits a Gaussian to `histogram[i]` sampled at `x = i`.
pub fn fit_gaussian(histogram: &[f64]) -> Result<GaussianFit, FitError> {
    let xs: Vec<f64> = (0..histogram.len()).map(|i| i as f64).collect();
    fit_gaussian_at(&xs, histogram)
}

/// Fits a Gaussian to samples `(xs[i], ys[i])`.
pub fn fit_gaussian_at(xs: &[f64], ys: &[f64]) -> Result<GaussianFit, FitError> {
    let (mean, sd, peak) = moments(xs, ys)?;
    let p0 = [peak, mean, sd.max(MIN_WIDTH)];
    let model = |x: f64, p: &[f64], grad: &mut [f64]| -> f64 {
        let (a, c, w) = (p[0], p[1], p[2]);
        let d = (x - c) / w;
        let e = (-0.5 * d * d).exp();
        grad[0] = e;
        grad[1] = a * e * d / w;
        grad[2] = a * e * d * d / w;
        a * e
    };
    let lower = [f64::NEG_INFINITY, f64::NEG_INFINITY, MIN_WIDTH];
    let (p, rms) = levenberg_marquardt(xs, ys, &p0, &lower, model)?;
    Ok(GaussianFit {
        center: p[1],
        width: p[2],
        amplitude: p[0],
        residual: rms,
    })
}

/// Fits the sum of two Gaussians, seeded from the single-Gaussian fit and
/// the largest residual peak.
pub fn fit_two_gaussians_at(xs: &[f64], ys: &[f64]) -> Result<TwoGaussianFit, FitError> {
    let single = fit_gaussian_at(xs, ys)?;
    let (mut best_i, mut best_r) = (0, f64::NEG_INFINITY);
    for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
        let r = y - single.eval(x);
        if r > best_r {
            best_r = r;
            best_i = i;
        }
    }
    let p0 = [
        single.amplitude,
        single.center,
        single.width,
        best_r.max(single.amplitude * 0.05),
        xs[best_i],
        single.width,
    ];
    let model = |x: f64, p: &[f64], grad: &mut [f64]| -> f64 {
        let mut total = 0.0;
        for j in 0..2 {
            let (a, c, w) = (p[3 * j], p[3 * j + 1], p[3 * j + 2]);
            let d = (x - c) / w;
            let e = (-0.5 * d * d).exp();
            grad[3 * j] = e;
            grad[3 * j + 1] = a * e * d / w;
            grad[3 * j + 2] = a * e * d * d / w;
            total += a * e;
        }
        total
    };
    let lower = [
        0.0,
        f64::NEG_INFINITY,
        MIN_WIDTH,
        0.0,
        f64::NEG_INFINITY,
        MIN_WIDTH,
    ];
    let (p, rms) = levenberg_marquardt(xs, ys, &p0, &lower, model)?;
    let mk = |j: usize| GaussianFit {
        center: p[3 * j + 1],
        width: p[3 * j + 2],
        amplitude: p[3 * j],
        residual: rms,
    };
    let (a, b) = (mk(0), mk(1));
    let components = if a.amplitude * a.width >= b.amplitude * b.width {
        [a, b]
    } else {
        [b, a]
    };
    Ok(TwoGaussianFit {
        components,
        residual: rms,
    })
}

fn moments(xs: &[f64], ys: &[f64]) -> Result<(f64, f64, f64), FitError> {
    if ys.is_empty() || xs.len() != ys.len() {
        return Err(FitError::Empty);
    }
    if let Some(i) = ys.iter().position(|y| !y.is_finite() || *y < 0.0) {
        return Err(FitError::InvalidEntry(i));
    }
    let mass: f64 = ys.iter().sum();
    if mass <= 0.0 {
        return Err(FitError::ZeroMass);
    }
    let mean = xs.iter().zip(ys).map(|(x, y)| x * y).sum::<f64>() / mass;
    let var = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (x - mean) * (x - mean) * y)
        .sum::<f64>()
        / mass;
    let peak = ys.iter().cloned().fold(0.0, f64::max);
    Ok((mean, var.sqrt(), peak))
}

/// Box-constrained Levenberg–Marquardt on up to 6 parameters. Returns the
/// parameters and the RMS residual.
fn levenberg_marquardt<M>(
    xs: &[f64],
    ys: &[f64],
    p0: &[f64],
    lower: &[f64],
    model: M,
) -> Result<(Vec<f64>, f64), FitError>
where
    M: Fn(f64, &[f64], &mut [f64]) -> f64,
{
    let n = p0.len();
    let mut p = p0.to_vec();
    let mut grad = vec![0.0; n];
    let cost = |p: &[f64], grad: &mut [f64]| -> f64 {
        xs.iter()
            .zip(ys)
            .map(|(&x, &y)| {
                let r = model(x, p, grad) - y;
                r * r
            })
            .sum()
    };
    let mut current = cost(&p, &mut grad);
    let mut lambda = 1e-3;
    let scale = ys.iter().map(|y| y * y).sum::<f64>().max(f64::MIN_POSITIVE);

    for _ in 0..MAX_ITERATIONS {
        let mut jtj = vec![vec![0.0; n]; n];
        let mut jtr = vec![0.0; n];
        for (&x, &y) in xs.iter().zip(ys) {
            let r = model(x, &p, &mut grad) - y;
            for a in 0..n {
                jtr[a] += grad[a] * r;
                for b in 0..n {
                    jtj[a][b] += grad[a] * grad[b];
                }
            }
        }
        // Parameters pinned at their bound with the gradient pushing outward
        // are frozen for this iteration.
        let frozen: Vec<bool> = (0..n)
            .map(|a| p[a] <= lower[a] && jtr[a] > 0.0)
            .collect();
        // Inner loop: raise damping until the step lowers the cost.
        let mut accepted = false;
        let mut step_norm = 0.0;
        for _ in 0..60 {
            let mut m = jtj.clone();
            for (a, row) in m.iter_mut().enumerate() {
                row[a] += lambda * (jtj[a][a].max(1e-12));
            }
            let mut rhs: Vec<f64> = jtr.iter().map(|v| -v).collect();
            for a in (0..n).filter(|&a| frozen[a]) {
                for b in 0..n {
                    m[a][b] = 0.0;
                    m[b][a] = 0.0;
                }
                m[a][a] = 1.0;
                rhs[a] = 0.0;
            }
            let Some(delta) = solve(m, rhs) else {
                lambda *= 10.0;
                continue;
            };
            let trial: Vec<f64> = p
                .iter()
                .zip(&delta)
                .zip(lower)
                .map(|((v, d), lo)| (v + d).max(*lo))
                .collect();
            let c = cost(&trial, &mut grad);
            if c.is_finite() && c <= current {
                step_norm = trial
                    .iter()
                    .zip(&p)
                    .map(|(a, b)| (a - b).abs() / (b.abs() + 1e-8))
                    .fold(0.0, f64::max);
                let improvement = current - c;
                p = trial;
                current = c;
                lambda = (lambda * 0.3).max(1e-12);
                accepted = true;
                if improvement <= 1e-15 * scale && step_norm < 1e-6 {
                    step_norm = 0.0;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted || step_norm < 1e-10 {
            // No descent direction left: converged to a (constrained) minimum.
            let rms = (current / xs.len() as f64).sqrt();
            return Ok((p, rms));
        }
    }
    Err(FitError::NoConvergence(MAX_ITERATIONS))
}

/// Gaussian elimination with partial pivoting; `None` if singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(n: usize, a: f64, c: f64, w: f64) -> Vec<f64> {
        (0..n).map(|i| gauss(i as f64, a, c, w)).collect()
    }

    #[test]
    fn exact_gaussian_recovers_center() {
        let h = sample(20, 0.3, 5.0, 2.0);
        let f = fit_gaussian(&h).unwrap();
        assert!((f.center - 5.0).abs() < 1e-6, "{f:?}");
        assert!((f.width - 2.0).abs() < 1e-6);
        assert!((f.amplitude - 0.3).abs() < 1e-6);
        assert!(f.residual < 1e-8);
    }

    #[test]
    fn off_grid_center() {
        let h = sample(40, 1.0, 17.37, 3.1);
        let f = fit_gaussian(&h).unwrap();
        assert!((f.center - 17.37).abs() < 1e-6);
    }

    #[test]
    fn delta_collapses_to_width_floor() {
        let mut h = vec![0.0; 15];
        h[6] = 1.0;
        let f = fit_gaussian(&h).unwrap();
        assert!((f.width - MIN_WIDTH).abs() < 1e-9, "{f:?}");
        assert!((f.center - 6.0).abs() < 1e-6);
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(fit_gaussian(&[]), Err(FitError::Empty));
        assert_eq!(fit_gaussian(&[0.0; 8]), Err(FitError::ZeroMass));
        assert_eq!(fit_gaussian(&[0.0, -1.0]), Err(FitError::InvalidEntry(1)));
        assert_eq!(
            fit_gaussian(&[0.0, f64::NAN]),
            Err(FitError::InvalidEntry(1))
        );
    }

    #[test]
    fn mixture_fit_tracks_dominant_peak() {
        // 0.9/0.1 probability split between peaks at 20 and 30.
        let w = 2.0;
        let norm = 1.0 / (w * (2.0 * std::f64::consts::PI).sqrt());
        let h: Vec<f64> = (0..50)
            .map(|i| {
                let x = i as f64;
                0.9 * gauss(x, norm, 20.0, w) + 0.1 * gauss(x, norm, 30.0, w)
            })
            .collect();
        let single = fit_gaussian(&h).unwrap();
        assert!((single.center - 20.0).abs() < 0.15, "{single:?}");
        let xs: Vec<f64> = (0..50).map(|i| i as f64).collect();
        let two = fit_two_gaussians_at(&xs, &h).unwrap();
        assert!((two.dominant().center - 20.0).abs() < 1e-4, "{two:?}");
        assert!((two.components[1].center - 30.0).abs() < 1e-3);
    }

    #[test]
    fn solve_small_system() {
        let x = solve(vec![vec![2.0, 1.0], vec![1.0, 3.0]], vec![3.0, 5.0]).unwrap();
        assert!((x[0] - 0.8).abs() < 1e-12 && (x[1] - 1.4).abs() < 1e-12);
        assert!(solve(vec![vec![1.0, 2.0], vec![2.0, 4.0]], vec![1.0, 1.0]).is_none());
    }
}

//! Local minimizers used by the fit: damped Gauss-Newton on a residual
//! vector (Levenberg-Marquardt with a forward-difference Jacobian) and a
//! derivative-free simplex search.

use nalgebra::{DMatrix, DVector};

#[derive(Clone, Debug, PartialEq)]
pub struct Minimum {
    pub x: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

fn sum_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Minimize Σ r_i(x)² where `residuals(x, out)` fills `m` residuals.
/// Stops once three consecutive accepted steps each lower the cost by less
/// than `tol·max(cost, 1)`, or when the damping can no longer find a
/// descent step.
pub fn levenberg_marquardt<F>(
    mut residuals: F,
    x0: &[f64],
    m: usize,
    max_iterations: usize,
    tol: f64,
) -> Minimum
where
    F: FnMut(&[f64], &mut [f64]),
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = vec![0.0; m];
    residuals(&x, &mut r);
    let mut evaluations = 1;
    let mut cost = sum_sq(&r);
    let mut jac = DMatrix::<f64>::zeros(m, n);
    let mut rp = vec![0.0; m];
    let mut trial = vec![0.0; n];
    let mut r_trial = vec![0.0; m];
    let mut mu = -1.0;
    let mut nu = 2.0;
    let mut small_steps = 0;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iterations && !converged {
        iterations += 1;
        if cost == 0.0 {
            converged = true;
            break;
        }
        for j in 0..n {
            let h = 1.5e-8 * x[j].abs().max(1e-2);
            let keep = x[j];
            x[j] = keep + h;
            residuals(&x, &mut rp);
            x[j] = keep;
            for i in 0..m {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }
        evaluations += n;
        let rv = DVector::from_column_slice(&r);
        let g = jac.tr_mul(&rv);
        let a = jac.tr_mul(&jac);
        let max_diag = (0..n).map(|i| a[(i, i)]).fold(0.0, f64::max);
        if max_diag == 0.0 {
            converged = true;
            break;
        }
        let floor = 1e-12 * max_diag;
        if mu < 0.0 {
            mu = 1e-3;
        }
        loop {
            let mut damped = a.clone();
            for i in 0..n {
                damped[(i, i)] += mu * a[(i, i)].max(floor);
            }
            let step = match damped.cholesky() {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    mu *= nu;
                    nu *= 2.0;
                    if mu > 1e30 {
                        converged = true;
                        break;
                    }
                    continue;
                }
            };
            for i in 0..n {
                trial[i] = x[i] + step[i];
            }
            residuals(&trial, &mut r_trial);
            evaluations += 1;
            let new_cost = sum_sq(&r_trial);
            // reduction predicted by the linear model
            let predicted = -(2.0 * step.dot(&g) + (&a * &step).dot(&step));
            if new_cost.is_finite() && new_cost < cost {
                let rho = if predicted > 0.0 {
                    (cost - new_cost) / predicted
                } else {
                    1.0
                };
                let improvement = (cost - new_cost) / cost.max(1.0);
                x.copy_from_slice(&trial);
                r.copy_from_slice(&r_trial);
                cost = new_cost;
                mu *= (1.0 - (2.0 * rho - 1.0).powi(3)).max(1.0 / 3.0);
                nu = 2.0;
                if improvement < tol {
                    small_steps += 1;
                    if small_steps >= 3 {
                        converged = true;
                    }
                } else {
                    small_steps = 0;
                }
                let xnorm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                if step.norm() <= 1e-14 * (xnorm + 1e-14) {
                    converged = true;
                }
                break;
            }
            mu *= nu;
            nu *= 2.0;
            if mu > 1e30 {
                // no descent direction left at working precision
                converged = true;
                break;
            }
        }
    }
    Minimum {
        x,
        cost,
        iterations,
        evaluations,
        converged,
    }
}

/// Nelder-Mead with dimension-adapted coefficients. The initial simplex
/// steps each coordinate by 5% (or 0.05 for coordinates near zero).
/// Converges when the spread of simplex values falls below
/// `tol·(1 + |f_best|)`.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], max_evaluations: usize, tol: f64) -> Minimum
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let nf = n as f64;
    let (alpha, beta, gamma, delta) =
        (1.0, 1.0 + 2.0 / nf, 0.75 - 1.0 / (2.0 * nf), 1.0 - 1.0 / nf);
    let mut simplex: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut v = x0.to_vec();
        v[i] += if v[i].abs() > 1.0 { 0.05 * v[i] } else { 0.05 };
        simplex.push(v);
    }
    let mut values: Vec<f64> = simplex.iter().map(|v| f(v)).collect();
    let mut evaluations = n + 1;
    let mut iterations = 0;
    let mut converged = false;

    let point = |c: &[f64], w: &[f64], t: f64| -> Vec<f64> {
        c.iter().zip(w).map(|(a, b)| a + t * (b - a)).collect()
    };

    while evaluations < max_evaluations {
        iterations += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();
        if values[n] - values[0] <= tol * (1.0 + values[0].abs()) {
            converged = true;
            break;
        }
        let mut centroid = vec![0.0; n];
        for v in &simplex[..n] {
            for (c, x) in centroid.iter_mut().zip(v) {
                *c += x / nf;
            }
        }
        let worst = simplex[n].clone();
        let xr = point(&centroid, &worst, -alpha);
        let fr = f(&xr);
        evaluations += 1;
        if fr < values[0] {
            let xe = point(&centroid, &worst, -alpha * beta);
            let fe = f(&xe);
            evaluations += 1;
            if fe < fr {
                simplex[n] = xe;
                values[n] = fe;
            } else {
                simplex[n] = xr;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = xr;
            values[n] = fr;
        } else {
            let (xc, fc) = if fr < values[n] {
                let xc = point(&centroid, &xr, gamma);
                let fc = f(&xc);
                (xc, fc)
            } else {
                let xc = point(&centroid, &worst, gamma);
                let fc = f(&xc);
                (xc, fc)
            };
            evaluations += 1;
            if fc < values[n].min(fr) {
                simplex[n] = xc;
                values[n] = fc;
            } else {
                let best = simplex[0].clone();
                for i in 1..=n {
                    simplex[i] = point(&best, &simplex[i], delta);
                    values[i] = f(&simplex[i]);
                }
                evaluations += n;
            }
        }
    }
    let best = (0..=n)
        .min_by(|&a, &b| values[a].total_cmp(&values[b]))
        .expect("non-empty simplex");
    Minimum {
        x: simplex[best].clone(),
        cost: values[best],
        iterations,
        evaluations,
        converged,
    }
}

//! Projected Polak-Ribière+ nonlinear conjugate gradients on a box.

use super::OptimizerConfig;
use crate::error::{check_len, Error, Result};

/// A smooth function with its gradient. Trial points of a line search are
/// evaluated first and `accept` is called once a point becomes an iterate.
pub trait Objective {
    fn evaluate(&mut self, x: &[f64]) -> Result<(f64, Vec<f64>)>;

    fn accept(&mut self, _x: &[f64], _info: &AcceptInfo) -> Result<()> {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AcceptInfo {
    pub iteration: usize,
    pub value: f64,
    /// Line-search parameter of the step leading here (0 for the start).
    pub step: f64,
    pub projected_grad_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    Gradient,
    Objective,
    MaxIterations,
    /// No trial satisfied the Armijo condition.
    Stalled,
}

#[derive(Debug, Clone)]
pub struct BncgResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub termination: Termination,
    /// Objective of every accepted iterate, starting with `x0`.
    pub values: Vec<f64>,
}

impl BncgResult {
    pub fn stalled(&self) -> bool {
        self.termination == Termination::Stalled
    }
}

fn project(x: &mut [f64], lower: &[f64], upper: &[f64]) {
    for ((v, l), u) in x.iter_mut().zip(lower).zip(upper) {
        *v = v.clamp(*l, *u);
    }
}

/// Gradient with the components blocked by active bounds zeroed.
fn free_gradient(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> Vec<f64> {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&l, &u))| {
            if (xi <= l && gi > 0.0) || (xi >= u && gi < 0.0) {
                0.0
            } else {
                gi
            }
        })
        .collect()
}

/// `‖x − P(x − g)‖₂`.
pub(crate) fn projected_gradient_norm(x: &[f64], g: &[f64], lower: &[f64], upper: &[f64]) -> f64 {
    x.iter()
        .zip(g)
        .zip(lower.iter().zip(upper))
        .map(|((&xi, &gi), (&l, &u))| {
            let d = xi - (xi - gi).clamp(l, u);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct Trial {
    t: f64,
    x: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
}

/// Minimizes `obj` over `lower ≤ x ≤ upper` from `x0` (projected first).
pub fn bncg_minimize<O: Objective + ?Sized>(
    obj: &mut O,
    x0: &[f64],
    lower: &[f64],
    upper: &[f64],
    cfg: &OptimizerConfig,
) -> Result<BncgResult> {
    cfg.validate()?;
    check_len("lower bounds", x0.len(), lower.len())?;
    check_len("upper bounds", x0.len(), upper.len())?;
    if lower.iter().zip(upper).any(|(l, u)| !(l <= u)) {
        return Err(Error::InvalidParameter("empty box: lower bound exceeds upper bound".into()));
    }

    let mut x = x0.to_vec();
    project(&mut x, lower, upper);
    let (mut f, mut g) = obj.evaluate(&x)?;
    check_len("gradient", x.len(), g.len())?;
    let pg0 = projected_gradient_norm(&x, &g, lower, upper);
    let gtol = cfg.grad_atol.max(cfg.grad_rtol * pg0);
    obj.accept(
        &x,
        &AcceptInfo {
            iteration: 0,
            value: f,
            step: 0.0,
            projected_grad_norm: pg0,
        },
    )?;
    let mut values = vec![f];

    let mut gr = free_gradient(&x, &g, lower, upper);
    let mut d: Vec<f64> = gr.iter().map(|v| -v).collect();
    let mut prev_slope: Option<(f64, f64)> = None; // (t, g·d) of the last step
    let mut small_decreases = 0usize;
    let mut since_restart = 0usize;
    let mut pg = pg0;
    let mut termination = Termination::MaxIterations;
    let mut iteration = 0;

    if pg <= gtol {
        termination = Termination::Gradient;
    }
    while termination == Termination::MaxIterations && iteration < cfg.max_outer_iters {
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            d = gr.iter().map(|v| -v).collect();
            slope = dot(&g, &d);
            since_restart = 0;
            prev_slope = None;
        }
        let dmax = d.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if dmax == 0.0 || !(slope < 0.0) {
            termination = Termination::Gradient;
            break;
        }

        let t0 = match prev_slope {
            // equal first-order change as the previous step
            Some((t_prev, s_prev)) => (t_prev * s_prev / slope).min(1e3 * cfg.initial_step / dmax),
            None => cfg.initial_step / dmax,
        };
        let accepted = line_search(obj, &x, f, &g, &d, t0, lower, upper, cfg)?;
        let Some(trial) = accepted else {
            log::warn!("line search failed at iteration {}", iteration + 1);
            termination = Termination::Stalled;
            break;
        };

        iteration += 1;
        let rel = (f - trial.value).abs() / f.abs().max(f64::MIN_POSITIVE);
        small_decreases = if rel <= cfg.obj_rtol { small_decreases + 1 } else { 0 };
        prev_slope = Some((trial.t, slope));
        x = trial.x;
        f = trial.value;
        g = trial.grad;
        pg = projected_gradient_norm(&x, &g, lower, upper);
        obj.accept(
            &x,
            &AcceptInfo {
                iteration,
                value: f,
                step: trial.t,
                projected_grad_norm: pg,
            },
        )?;
        values.push(f);

        if pg <= gtol {
            termination = Termination::Gradient;
            break;
        }
        if small_decreases >= 5 {
            termination = Termination::Objective;
            break;
        }

        let gr_new = free_gradient(&x, &g, lower, upper);
        since_restart += 1;
        let denom = dot(&gr, &gr);
        let beta = if cfg.restart_period > 0 && since_restart >= cfg.restart_period || denom == 0.0 {
            since_restart = 0;
            0.0
        } else {
            let num: f64 = gr_new.iter().zip(&gr).map(|(a, b)| a * (a - b)).sum();
            (num / denom).max(0.0)
        };
        d = gr_new
            .iter()
            .zip(&d)
            .map(|(gi, di)| -gi + beta * di)
            .collect();
        // directions must not push against active bounds
        for (i, di) in d.iter_mut().enumerate() {
            if (x[i] <= lower[i] && *di < 0.0) || (x[i] >= upper[i] && *di > 0.0) {
                *di = 0.0;
            }
        }
        gr = gr_new;
    }

    Ok(BncgResult {
        x,
        value: f,
        iterations: iteration,
        termination,
        values,
    })
}

/// Projected backtracking with a safeguarded quadratic model. Returns `None`
/// if no trial satisfies the Armijo condition.
#[allow(clippy::too_many_arguments)]
fn line_search<O: Objective + ?Sized>(
    obj: &mut O,
    x: &[f64],
    f0: f64,
    g: &[f64],
    d: &[f64],
    t0: f64,
    lower: &[f64],
    upper: &[f64],
    cfg: &OptimizerConfig,
) -> Result<Option<Trial>> {
    let point = |t: f64| {
        let mut y: Vec<f64> = x.iter().zip(d).map(|(a, b)| a + t * b).collect();
        project(&mut y, lower, upper);
        y
    };
    let slope = dot(g, d);
    let mut t = t0;
    for k in 0..cfg.max_line_search {
        let y = point(t);
        let decrease = dot(g, &y.iter().zip(x).map(|(a, b)| a - b).collect::<Vec<_>>());
        if decrease == 0.0 {
            // the projected path has collapsed onto x
            return Ok(None);
        }
        let (fy, gy) = obj.evaluate(&y)?;
        if fy.is_finite() && fy <= f0 + cfg.armijo * decrease {
            let mut best = Trial {
                t,
                x: y,
                value: fy,
                grad: gy,
            };
            // on the first trial, try the minimizer of the quadratic model
            if k == 0 {
                let curv = fy - f0 - slope * t;
                if curv > 0.0 {
                    let t_star = (-slope * t * t / (2.0 * curv)).min(100.0 * t);
                    if t_star > 2.0 * t {
                        let y2 = point(t_star);
                        let dec2 = dot(g, &y2.iter().zip(x).map(|(a, b)| a - b).collect::<Vec<_>>());
                        let (f2, g2) = obj.evaluate(&y2)?;
                        if f2.is_finite() && f2 < best.value && f2 <= f0 + cfg.armijo * dec2 {
                            best = Trial {
                                t: t_star,
                                x: y2,
                                value: f2,
                                grad: g2,
                            };
                        }
                    }
                }
            }
            return Ok(Some(best));
        }
        // safeguarded interpolation, never shrinking by more than 10x
        let curv = fy - f0 - slope * t;
        let t_q = if fy.is_finite() && curv > 0.0 {
            -slope * t * t / (2.0 * curv)
        } else {
            cfg.backtrack * t
        };
        t = t_q.clamp(0.1 * t, cfg.backtrack * t);
    }
    Ok(None)
}

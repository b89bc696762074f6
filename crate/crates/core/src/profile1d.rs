//! 1D bistable profiles: `(-Delta)^{1/2} phi = -beta_tilde W'(phi)`,
//! `phi(+-inf) = +-1`, on a truncated grid with algebraic-tail closure.

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::operator::{halflap_1d, HalflapOperator};
use crate::params::MisfitPotential;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use std::f64::consts::PI;
use std::io::Write;

const MONOTONE_TOL: f64 = 1e-10;
const BOUND_TOL: f64 = 1e-8;

/// Truncated-domain bistable profile with far states and tail metadata.
#[derive(Debug, Clone)]
pub struct Profile1D {
    pub grid: Grid1D,
    pub values: Vec<f64>,
    pub far_states: (f64, f64),
    pub beta_tilde: f64,
    /// `c` in `phi(x) ~ +-1 -/+ c/|x|`; known exactly for the sinusoidal
    /// solution, otherwise fitted.
    pub tail_coefficient: Option<f64>,
}

impl Profile1D {
    /// Validating constructor: monotone nondecreasing values within the
    /// bracket `[-1 - 1e-8, 1 + 1e-8]`.
    pub fn from_values(
        grid: Grid1D,
        values: Vec<f64>,
        beta_tilde: f64,
        far_states: (f64, f64),
        tail_coefficient: Option<f64>,
    ) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::Validation(format!(
                "profile has {} values for a grid of {} nodes",
                values.len(),
                grid.n
            )));
        }
        for w in values.windows(2) {
            if w[1] < w[0] - MONOTONE_TOL {
                return Err(Error::InvariantViolation(
                    "profile values are not monotone nondecreasing".into(),
                ));
            }
        }
        let lo = far_states.0.min(far_states.1) - BOUND_TOL;
        let hi = far_states.0.max(far_states.1) + BOUND_TOL;
        if values.iter().any(|&v| v < lo || v > hi) {
            return Err(Error::InvariantViolation(
                "profile values leave the far-state bracket".into(),
            ));
        }
        Ok(Self {
            grid,
            values,
            far_states,
            beta_tilde,
            tail_coefficient,
        })
    }

    /// The exact solution `(2/pi) arctan(beta_tilde x)` of the sinusoidal
    /// problem, with its known tail coefficient `2/(pi beta_tilde)`.
    pub fn exact_sinusoidal(beta_tilde: f64, grid: Grid1D) -> Result<Self> {
        if !(beta_tilde > 0.0) {
            return Err(Error::Validation(format!(
                "beta_tilde = {beta_tilde} must be positive"
            )));
        }
        let values = grid
            .nodes()
            .iter()
            .map(|&x| (2.0 / PI) * (beta_tilde * x).atan())
            .collect();
        Self::from_values(
            grid,
            values,
            beta_tilde,
            (-1.0, 1.0),
            Some(2.0 / (PI * beta_tilde)),
        )
    }

    /// Evaluates the profile anywhere: cubic interpolation inside the grid,
    /// the `far - c/x` tail model outside.
    pub fn eval(&self, t: f64) -> f64 {
        let g = &self.grid;
        let first = g.node(0);
        let last = g.last_node();
        let c = self.tail_coefficient.unwrap_or(0.0);
        if t < first || t > last {
            let f = if t > 0.0 { self.far_states.1 } else { self.far_states.0 };
            return if t == 0.0 { f } else { f - c / t };
        }
        let s_full = (t - first) / g.h;
        let mut j = s_full.floor() as usize;
        if j >= g.n - 1 {
            j = g.n - 2;
        }
        let s = s_full - j as f64;
        let fetch = |idx: i64| -> f64 {
            if idx < 0 || idx as usize >= g.n {
                let y = first + idx as f64 * g.h;
                let f = if y > 0.0 { self.far_states.1 } else { self.far_states.0 };
                f - c / y
            } else {
                self.values[idx as usize]
            }
        };
        let p0 = fetch(j as i64 - 1);
        let p1 = fetch(j as i64);
        let p2 = fetch(j as i64 + 1);
        let p3 = fetch(j as i64 + 2);
        p1 + 0.5
            * s
            * (p2 - p0 + s * (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3 + s * (3.0 * (p1 - p2) + p3 - p0)))
    }

    /// Max-norm equation residual `|(-Delta)^{1/2} phi + beta_tilde W'(phi)|`
    /// over nodes with `|x| <= half_width / 2`.
    pub fn interior_residual(&self, w: &MisfitPotential) -> Result<f64> {
        let lap = halflap_1d(self)?;
        let mut worst = 0.0_f64;
        for (j, &x) in self.grid.nodes().iter().enumerate() {
            if x.abs() <= 0.5 * self.grid.half_width {
                let r = lap[j] + self.beta_tilde * w.deriv(self.values[j]);
                worst = worst.max(r.abs());
            }
        }
        Ok(worst)
    }

    /// CSV export `x,phi`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,phi")?;
        for (x, v) in self.grid.nodes().iter().zip(self.values.iter()) {
            writeln!(out, "{x:.17e},{v:.17e}")?;
        }
        Ok(())
    }
}

/// JSON sidecar accompanying profile exports.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileMetadata {
    pub beta_tilde: f64,
    pub tail_coefficient: Option<f64>,
    pub residual: f64,
    pub grid_half_width: f64,
    pub grid_n: usize,
}

/// Result of the algebraic tail fit over the outer quarter of the grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TailFit {
    pub c: f64,
    pub rel_residual: f64,
    /// False signals a warning: the data does not look like `c/x` yet
    /// (wrong decay class or the domain is too small).
    pub asymptotic: bool,
}

/// Least-squares fit of `c` in `1 -/+ phi ~ c/|x|` over nodes with
/// `|x| >= half_width/2`, stored into the profile.
pub fn fit_tail(phi: &mut Profile1D) -> TailFit {
    let mut num = 0.0;
    let mut den = 0.0;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for (j, &x) in phi.grid.nodes().iter().enumerate() {
        if x.abs() >= 0.5 * phi.grid.half_width {
            let r = if x > 0.0 {
                phi.far_states.1 - phi.values[j]
            } else {
                phi.values[j] - phi.far_states.0
            };
            pts.push((x.abs(), r));
            num += r / x.abs();
            den += 1.0 / (x * x);
        }
    }
    let c = num / den;
    let mut ss_res = 0.0;
    let mut ss_tot = 0.0;
    for &(ax, r) in &pts {
        ss_res += (r - c / ax).powi(2);
        ss_tot += r * r;
    }
    let rel = if ss_tot > 0.0 {
        (ss_res / ss_tot).sqrt()
    } else {
        1.0
    };
    let asymptotic = rel <= 0.05 && ss_tot.sqrt() > 1e-13;
    let fit = TailFit {
        c,
        rel_residual: rel,
        asymptotic,
    };
    phi.tail_coefficient = Some(c);
    fit
}

/// Convergence report attached to solved profiles.
#[derive(Debug, Clone, Serialize)]
pub struct ProfileSolveReport {
    pub iterations: usize,
    pub residual: f64,
    pub residual_history: Vec<f64>,
    pub used_gradient_fallback: bool,
}

/// Solves the 1D problem by damped Newton on the dense affine operator, with
/// the translation gauge `phi(0) = 0`.
pub fn solve_profile(
    w: &MisfitPotential,
    beta_tilde: f64,
    grid: Grid1D,
    tol: f64,
) -> Result<(Profile1D, ProfileSolveReport)> {
    solve_profile_gauged(w, beta_tilde, grid, tol, 0.0)
}

/// Same solver with the gauge `phi(gauge_x) = 0` pinned at the node nearest
/// `gauge_x`.
pub fn solve_profile_gauged(
    w: &MisfitPotential,
    beta_tilde: f64,
    grid: Grid1D,
    tol: f64,
    gauge_x: f64,
) -> Result<(Profile1D, ProfileSolveReport)> {
    solve_profile_from(w, beta_tilde, grid, tol, gauge_x, None)
}

/// Full-control entry point: optional custom initial guess (defaults to the
/// arctan family member centered at the gauge).
pub fn solve_profile_from(
    w: &MisfitPotential,
    beta_tilde: f64,
    grid: Grid1D,
    tol: f64,
    gauge_x: f64,
    init: Option<&[f64]>,
) -> Result<(Profile1D, ProfileSolveReport)> {
    if !(beta_tilde > 0.0) {
        return Err(Error::Validation(format!(
            "beta_tilde = {beta_tilde} must be positive"
        )));
    }
    if grid.half_width < 50.0 {
        return Err(Error::Validation(format!(
            "profile solves need half-width >= 50, got {}",
            grid.half_width
        )));
    }
    let n = grid.n;
    let gauge = ((gauge_x + grid.half_width) / grid.h).round() as usize;
    let gauge = gauge.min(n - 1);
    let gauge_node = grid.node(gauge);

    // Leading tail constant: c = 2 / (pi beta_tilde W''(1)); exact for the
    // sinusoidal potential.
    let wpp1 = w.second_deriv(1.0);
    let tail_c = if wpp1 > 0.0 {
        2.0 / (PI * beta_tilde * wpp1)
    } else {
        2.0 / (PI * beta_tilde)
    };

    let op = HalflapOperator::new(grid, (-1.0, 1.0), tail_c).with_center(gauge_node);
    let (h_mat, e_vec) = op.dense();

    // Initial guess: the arctan family member centered at the gauge unless
    // the caller supplies one.
    let mut phi = match init {
        Some(values) => {
            if values.len() != n {
                return Err(Error::Validation(
                    "initial guess length does not match the grid".into(),
                ));
            }
            DVector::from_column_slice(values)
        }
        None => DVector::from_iterator(
            n,
            grid.nodes()
                .iter()
                .map(|&x| (2.0 / PI) * (beta_tilde * (x - gauge_node)).atan()),
        ),
    };

    let residual = |phi: &DVector<f64>| -> DVector<f64> {
        let mut r = &h_mat * phi + &e_vec;
        for j in 0..n {
            r[j] += beta_tilde * w.deriv(phi[j]);
        }
        r[gauge] = phi[gauge];
        r
    };
    let interior_norm = |r: &DVector<f64>| -> f64 {
        let mut worst = 0.0_f64;
        for j in 0..n {
            if grid.node(j).abs() <= 0.5 * grid.half_width {
                worst = worst.max(r[j].abs());
            }
        }
        worst
    };

    let mut history = Vec::new();
    let mut used_fallback = false;
    let mut r = residual(&phi);
    let max_newton = 40;
    for it in 0..=max_newton {
        let res_now = interior_norm(&r);
        history.push(res_now);
        if res_now <= tol {
            let values: Vec<f64> = phi.iter().copied().collect();
            let profile =
                Profile1D::from_values(grid, values, beta_tilde, (-1.0, 1.0), Some(tail_c))
                    .map_err(|e| match e {
                        Error::InvariantViolation(msg) => Error::InvariantViolation(format!(
                            "converged iterate is a spurious critical point: {msg}"
                        )),
                        other => other,
                    })?;
            return Ok((
                profile,
                ProfileSolveReport {
                    iterations: it,
                    residual: res_now,
                    residual_history: history,
                    used_gradient_fallback: used_fallback,
                },
            ));
        }
        if it == max_newton {
            break;
        }

        // Jacobian: H + beta_tilde diag(W''(phi)), gauge row replaced.
        let mut jac = h_mat.clone();
        for j in 0..n {
            jac[(j, j)] += beta_tilde * w.second_deriv(phi[j]);
        }
        for j in 0..n {
            jac[(gauge, j)] = if j == gauge { 1.0 } else { 0.0 };
        }
        let lu = jac.lu();
        let step = match lu.solve(&r) {
            Some(s) => s,
            None => {
                used_fallback = true;
                gradient_fallback(&h_mat, &e_vec, w, beta_tilde, gauge, &mut phi);
                r = residual(&phi);
                continue;
            }
        };

        // Armijo backtracking on the l2 residual norm.
        let base = r.norm();
        let mut lambda = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial = &phi - lambda * &step;
            let rt = residual(&trial);
            if rt.norm() <= (1.0 - 0.25 * lambda) * base {
                phi = trial;
                r = rt;
                accepted = true;
                break;
            }
            lambda *= 0.5;
        }
        if !accepted {
            used_fallback = true;
            gradient_fallback(&h_mat, &e_vec, w, beta_tilde, gauge, &mut phi);
            r = residual(&phi);
        }
    }
    Err(Error::Numerical(format!(
        "profile solve did not converge after {max_newton} iterations; last interior residual {:.3e}",
        history.last().copied().unwrap_or(f64::NAN)
    )))
}

/// Damped explicit descent used when a Newton step is rejected.
fn gradient_fallback(
    h_mat: &DMatrix<f64>,
    e_vec: &DVector<f64>,
    w: &MisfitPotential,
    beta_tilde: f64,
    gauge: usize,
    phi: &mut DVector<f64>,
) {
    // Step bounded by the largest diagonal entry of H (~ the top of the
    // discrete spectrum).
    let mut dmax = 0.0_f64;
    for j in 0..h_mat.nrows() {
        dmax = dmax.max(h_mat[(j, j)]);
    }
    let tau = 0.5 / (dmax + beta_tilde);
    for _ in 0..200 {
        let mut r = h_mat * &*phi + e_vec;
        for j in 0..phi.len() {
            r[j] += beta_tilde * w.deriv(phi[j]);
        }
        r[gauge] = phi[gauge];
        *phi -= tau * r;
    }
}

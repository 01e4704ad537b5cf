//! The transformed Camassa-Holm system in the variable `rho = sqrt(eta_x)`.
//!
//! With `P = int_0^x rho^2` and the common integrand
//! `w = rho^2 G^2 + 2 rho_t^2`, the state `(rho, rho_t)` evolves by
//!
//! ```text
//! rho_tt = rho (G^2 - F) / 2
//! G(x)   = int_0^x 2 rho rho_t + c,   c = mu - quad(int_0^. 2 rho rho_t * rho^2)
//! F(x)   = int_0^1 cosh(|P(x) - P(y)| - 1/2) / (2 sinh 1/2) w(y) dy
//! H(x)   = int_0^x sinh(P(x) - P(y) - 1/2) / (2 sinh 1/2) w dy
//!        - int_x^1 sinh(P(y) - P(x) - 1/2) / (2 sinh 1/2) w dy
//! ```
//!
//! `H` uses the sign convention under which `F_x = rho^2 H`,
//! `H_x = rho^2 F - w` and constant states are stationary; `G_t = -H`.
//!
//! Spatial antiderivatives are exact for the trigonometric interpolant, so
//! the identities above hold to spectral accuracy on resolved states.

use crate::error::{Error, Result};
use crate::grid::{self, ensure_same_grid, GridFunction};
use crate::kernel;

pub const DEFAULT_SPHERE_TOL: f64 = 1e-12;
pub const DEFAULT_TANGENCY_TOL: f64 = 1e-12;

/// `(rho, rho_t, k0, t)`: `k0` is the lifted position of particle label 0.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianState {
    pub rho: GridFunction,
    pub rho_t: GridFunction,
    pub k0: f64,
    pub t: f64,
}

impl LagrangianState {
    pub fn new(rho: GridFunction, rho_t: GridFunction, k0: f64, t: f64) -> Result<Self> {
        ensure_same_grid(&rho, &rho_t)?;
        if !k0.is_finite() || !t.is_finite() {
            return Err(Error::InvalidParameter(format!("k0 = {k0}, t = {t} must be finite")));
        }
        Ok(Self { rho, rho_t, k0, t })
    }

    pub fn n(&self) -> usize {
        self.rho.n()
    }

    /// `|quad(rho^2) - 1|`
    pub fn sphere_defect(&self) -> f64 {
        (self.rho.inner_unchecked(&self.rho) - 1.0).abs()
    }

    /// `|quad(rho rho_t)|`
    pub fn tangency_defect(&self) -> f64 {
        self.rho.inner_unchecked(&self.rho_t).abs()
    }

    pub fn is_feasible(&self, sphere_tol: f64, tangency_tol: f64) -> bool {
        self.sphere_defect() <= sphere_tol && self.tangency_defect() <= tangency_tol
    }

    pub fn is_finite(&self) -> bool {
        self.rho.is_finite() && self.rho_t.is_finite() && self.k0.is_finite() && self.t.is_finite()
    }

    /// `rho^2`, the Jacobian `K_x` of the flow map.
    pub fn jacobian(&self) -> GridFunction {
        self.rho.map(|r| r * r)
    }
}

/// Quantities fixed by the initial data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConservedQuantities {
    /// Mean velocity `int u_0`.
    pub mu: f64,
    /// `int rho^2 G^2 + 4 rho_t^2`, equal to the H^1 energy of `u`.
    pub energy: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KernelMode {
    /// O(n log n): prefix integrals plus the exponential addition formula.
    #[default]
    Fast,
    /// O(n^2) double quadrature, kept as an independent check.
    Direct,
}

/// `G` together with how far `int_0^1 2 rho rho_t` is from zero. A nonzero
/// closure defect means `G` does not close up around the circle.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianVelocity {
    pub g: GridFunction,
    pub closure_defect: f64,
}

impl LagrangianVelocity {
    pub fn is_periodic(&self, tol: f64) -> bool {
        self.closure_defect <= tol
    }
}

fn two_rho_rho_t(state: &LagrangianState) -> GridFunction {
    state.rho.zip_map_unchecked(&state.rho_t, |r, rt| 2.0 * r * rt)
}

fn c_from_ramp(ramp: &GridFunction, jac: &GridFunction, mu: f64) -> f64 {
    mu - ramp.inner_unchecked(jac)
}

/// `c = mu - quad(int_0^x 2 rho rho_t * rho^2)`.
pub fn compute_c(state: &LagrangianState, mu: f64) -> f64 {
    let ramp = grid::antiderivative(&two_rho_rho_t(state));
    c_from_ramp(&ramp, &state.jacobian(), mu)
}

/// `G = int_0^x 2 rho rho_t + c`, the Lagrangian velocity `eta_t`.
pub fn compute_g(state: &LagrangianState, mu: f64) -> LagrangianVelocity {
    let f = two_rho_rho_t(state);
    let closure_defect = f.mean().abs();
    let ramp = grid::antiderivative(&f);
    let c = c_from_ramp(&ramp, &state.jacobian(), mu);
    LagrangianVelocity {
        g: ramp.map(|v| v + c),
        closure_defect,
    }
}

/// `w = rho^2 G^2 + 2 rho_t^2`, shared by `F` and `H`.
pub fn kernel_weight(state: &LagrangianState, g: &GridFunction) -> Result<GridFunction> {
    ensure_same_grid(&state.rho, g)?;
    let r = state.rho.values();
    let rt = state.rho_t.values();
    Ok(GridFunction::from_vec_unchecked(
        (0..state.n())
            .map(|j| {
                let rg = r[j] * g.values()[j];
                rg * rg + 2.0 * rt[j] * rt[j]
            })
            .collect(),
    ))
}

/// `P = int_0^x rho^2` on the grid together with its rise over one period.
pub fn phase(state: &LagrangianState) -> (GridFunction, f64) {
    let jac = state.jacobian();
    let rise = jac.mean();
    (grid::antiderivative(&jac), rise)
}

/// `F` and `H` from one kernel pass.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelFields {
    pub f: GridFunction,
    pub h: GridFunction,
}

pub fn compute_fh(state: &LagrangianState, g: &GridFunction, mode: KernelMode) -> Result<KernelFields> {
    let w = kernel_weight(state, g)?;
    let (p, rise) = phase(state);
    let sums = match mode {
        KernelMode::Fast => kernel::sums_fast(p.values(), rise, w.values()),
        KernelMode::Direct => kernel::sums_direct(p.values(), rise, w.values()),
    };
    Ok(KernelFields {
        f: GridFunction::from_vec_unchecked(sums.cosh_sum),
        h: GridFunction::from_vec_unchecked(sums.sinh_sum),
    })
}

pub fn compute_f(state: &LagrangianState, g: &GridFunction, mode: KernelMode) -> Result<GridFunction> {
    compute_fh(state, g, mode).map(|k| k.f)
}

pub fn compute_h(state: &LagrangianState, g: &GridFunction, mode: KernelMode) -> Result<GridFunction> {
    compute_fh(state, g, mode).map(|k| k.h)
}

/// Time derivative of `(rho, rho_t, k0)`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateRate {
    pub drho: GridFunction,
    pub drho_t: GridFunction,
    pub dk0: f64,
}

/// Everything computed while evaluating the vector field once.
#[derive(Debug, Clone)]
pub struct FieldEvaluation {
    pub rate: StateRate,
    pub g: GridFunction,
    pub f: GridFunction,
    pub h: GridFunction,
    pub c: f64,
}

impl FieldEvaluation {
    /// `max_x |G^2 - F|`
    pub fn forcing(&self) -> f64 {
        self.g
            .values()
            .iter()
            .zip(self.f.values())
            .fold(0.0, |m, (g, f)| m.max((g * g - f).abs()))
    }
}

pub fn evaluate_field(state: &LagrangianState, mu: f64) -> FieldEvaluation {
    let f2 = two_rho_rho_t(state);
    let ramp = grid::antiderivative(&f2);
    let jac = state.jacobian();
    let c = c_from_ramp(&ramp, &jac, mu);
    let g = ramp.map(|v| v + c);
    let w = kernel_weight(state, &g).expect("state grids match");
    let p = grid::antiderivative(&jac);
    let sums = kernel::sums_fast(p.values(), jac.mean(), w.values());
    let f = GridFunction::from_vec_unchecked(sums.cosh_sum);
    let h = GridFunction::from_vec_unchecked(sums.sinh_sum);
    let r = state.rho.values();
    let drho_t = GridFunction::from_vec_unchecked(
        (0..state.n())
            .map(|j| {
                let gj = g.values()[j];
                0.5 * r[j] * (gj * gj - f.values()[j])
            })
            .collect(),
    );
    FieldEvaluation {
        rate: StateRate {
            drho: state.rho_t.clone(),
            drho_t,
            dk0: c,
        },
        g,
        f,
        h,
        c,
    }
}

/// `(rho_t, rho (G^2 - F) / 2, c)`.
pub fn vector_field(state: &LagrangianState, mu: f64) -> StateRate {
    evaluate_field(state, mu).rate
}

/// `E = quad(rho^2 G^2 + 4 rho_t^2)`.
pub fn energy(state: &LagrangianState, mu: f64) -> f64 {
    let g = compute_g(state, mu).g;
    energy_with_g(state, &g)
}

pub(crate) fn energy_with_g(state: &LagrangianState, g: &GridFunction) -> f64 {
    let r = state.rho.values();
    let rt = state.rho_t.values();
    let gv = g.values();
    (0..state.n())
        .map(|j| {
            let rg = r[j] * gv[j];
            rg * rg + 4.0 * rt[j] * rt[j]
        })
        .sum::<f64>()
        / state.n() as f64
}

pub fn conserved_quantities(state: &LagrangianState, mu: f64) -> ConservedQuantities {
    ConservedQuantities {
        mu,
        energy: energy(state, mu),
    }
}

/// The printed a-priori estimate for `|G^2 - F|`:
/// `2 |rho| |rho_t| + (2 |rho|^3 |rho_t| + |rho_t|^2) / (4 sinh 1/2)` in `L^2`.
///
/// This is the formula as stated; it is not a true upper bound for large
/// `|rho_t|` or nonzero mean velocity (see the tests).
pub fn apriori_bound(state: &LagrangianState) -> f64 {
    let a = state.rho.l2_norm();
    let b = state.rho_t.l2_norm();
    2.0 * a * b + (2.0 * a.powi(3) * b + b * b) / (4.0 * 0.5f64.sinh())
}

/// Fraction of nodes with `rho^2 < eps`, a proxy for the measure of the
/// set where the flow map is flat.
pub fn flat_set_measure(state: &LagrangianState, eps: f64) -> f64 {
    let count = state.rho.values().iter().filter(|r| *r * *r < eps).count();
    count as f64 / state.n() as f64
}

/// `min_x (rho^2 + rho_t^2)`, the quantity controlled by the Gronwall bound.
pub fn min_phase_amplitude(state: &LagrangianState) -> f64 {
    state
        .rho
        .values()
        .iter()
        .zip(state.rho_t.values())
        .fold(f64::INFINITY, |m, (r, rt)| m.min(r * r + rt * rt))
}

/// Exact time derivative of the discrete `G` along the vector field,
/// `int_0^x (2 rho_t^2 + 2 rho rho_tt) + dc/dt`. Should equal `-H`.
pub fn g_rate(state: &LagrangianState, mu: f64) -> GridFunction {
    let eval = evaluate_field(state, mu);
    let ramp = grid::antiderivative(&g_rate_integrand(state, &eval.rate.drho_t));
    let dc = c_rate(state, mu);
    ramp.map(|v| v + dc)
}

fn g_rate_integrand(state: &LagrangianState, rho_tt: &GridFunction) -> GridFunction {
    let r = state.rho.values();
    let rt = state.rho_t.values();
    let a = rho_tt.values();
    GridFunction::from_vec_unchecked(
        (0..state.n()).map(|j| 2.0 * rt[j] * rt[j] + 2.0 * r[j] * a[j]).collect(),
    )
}

/// Exact time derivative of `c` along the vector field. Should equal `-H(0)`.
pub fn c_rate(state: &LagrangianState, mu: f64) -> f64 {
    let eval = evaluate_field(state, mu);
    let inner = g_rate_integrand(state, &eval.rate.drho_t);
    let two_rrt = two_rho_rho_t(state);
    let ramp_inner = grid::antiderivative(&inner);
    let ramp = grid::antiderivative(&two_rrt);
    -ramp_inner.inner_unchecked(&state.jacobian()) - ramp.inner_unchecked(&two_rrt)
}

use crate::error::{Result, SolverError};

/// Time stepping, nonlinear solver and descent controls.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub t_final: f64,
    /// Newton stops once the discrete L2 norm of the implicit residual is below this.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    /// Initial (Armijo) or fixed (no Armijo) descent step.
    pub tau: f64,
    /// Relative objective change below which descent stops.
    pub descent_tol: f64,
    pub descent_max_iter: usize,
    pub armijo: bool,
    /// Optional extra stopping requirement `|grad| <= gradient_tol * (1 + |v|)`.
    pub gradient_tol: Option<f64>,
    /// When set, descent steps along `g / (F(rho) + floor * max F)` instead of
    /// the raw gradient `g`. Dense cells have tiny `F`, which makes the plain
    /// gradient badly scaled there.
    pub precondition_floor: Option<f64>,
    /// Store every n-th time step (explicit Hughes runs).
    pub record_every: usize,
    /// Floor on the Hughes speed `f(rho)` before inverting it into an Eikonal cost.
    pub eikonal_floor: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 0.1,
            t_final: 3.0,
            newton_tol: 1e-6,
            newton_max_iter: 50,
            tau: 1.0,
            descent_tol: 1e-6,
            descent_max_iter: 500,
            armijo: true,
            gradient_tol: None,
            precondition_floor: Some(0.01),
            record_every: 1,
            eikonal_floor: 1e-6,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(SolverError::InvalidInput(msg));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return fail(format!("solver.dt must be positive, got {}", self.dt));
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return fail(format!(
                "solver.t_final must be positive, got {}",
                self.t_final
            ));
        }
        if self.dt > self.t_final * (1.0 + 1e-12) {
            return fail(format!(
                "solver.dt = {} exceeds the horizon {}",
                self.dt, self.t_final
            ));
        }
        let ratio = self.t_final / self.dt;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
            return fail(format!(
                "horizon {} is not an integer multiple of dt = {}",
                self.t_final, self.dt
            ));
        }
        for (name, v) in [
            ("newton_tol", self.newton_tol),
            ("tau", self.tau),
            ("descent_tol", self.descent_tol),
            ("eikonal_floor", self.eikonal_floor),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return fail(format!("solver.{name} must be positive, got {v}"));
            }
        }
        if let Some(g) = self.gradient_tol {
            if !(g > 0.0) {
                return fail(format!("solver.gradient_tol must be positive, got {g}"));
            }
        }
        if let Some(p) = self.precondition_floor {
            if !(p > 0.0 && p.is_finite()) {
                return fail(format!(
                    "solver.precondition_floor must be positive, got {p}"
                ));
            }
        }
        if self.newton_max_iter == 0 || self.descent_max_iter == 0 || self.record_every == 0 {
            return fail("iteration counts and record_every must be at least 1".into());
        }
        Ok(())
    }

    /// Number of time steps `T / dt`.
    pub fn steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

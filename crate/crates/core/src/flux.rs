//! Two-point convective fluxes and the finite-volume operator shared by the
//! Hughes baseline and the mean-field forward solve.
//!
//! Convective face fluxes use the Engquist-Osher splitting of the mobility into
//! its nondecreasing part (below the mobility peak) and nonincreasing part
//! (above it). The flux is monotone, so the transported density cannot leave
//! `[0, rho_max]` when the mobility vanishes at both ends.

use crate::grid::{BoundaryTag, Grid};
use crate::linalg::Tridiagonal;
use crate::model::ModelSpec;

/// Face flux value and its partial derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceFlux {
    pub value: f64,
    pub d_left: f64,
    pub d_right: f64,
    pub d_velocity: f64,
}

fn increasing_part(spec: &ModelSpec, rho: f64) -> (f64, f64) {
    let peak = spec.mobility_peak();
    let clamped = rho.clamp(0.0, peak);
    let slope = if (0.0..peak).contains(&rho) {
        spec.mobility_derivative(rho)
    } else {
        0.0
    };
    (spec.mobility(clamped), slope)
}

fn decreasing_part(spec: &ModelSpec, rho: f64) -> (f64, f64) {
    let (inc, dinc) = increasing_part(spec, rho);
    (
        spec.mobility(rho) - inc,
        spec.mobility_derivative(rho) - dinc,
    )
}

/// Engquist-Osher flux of `velocity * G(rho)` between states `left` and `right`.
///
/// With `a` the forward splitting (increasing part from the left, decreasing
/// part from the right) and `b` the backward one, the flux is
/// `v+ a + v- b`. At `v = 0` the velocity derivative is the average of the two
/// one-sided values.
pub fn engquist_osher(spec: &ModelSpec, left: f64, right: f64, velocity: f64) -> FaceFlux {
    let (inc_l, dinc_l) = increasing_part(spec, left);
    let (dec_l, ddec_l) = decreasing_part(spec, left);
    let (inc_r, dinc_r) = increasing_part(spec, right);
    let (dec_r, ddec_r) = decreasing_part(spec, right);
    let forward = inc_l + dec_r;
    let backward = dec_l + inc_r;
    let plus = velocity.max(0.0);
    let minus = velocity.min(0.0);
    let d_velocity = if velocity > 0.0 {
        forward
    } else if velocity < 0.0 {
        backward
    } else {
        0.5 * (forward + backward)
    };
    FaceFlux {
        value: plus * forward + minus * backward,
        d_left: plus * dinc_l + minus * ddec_l,
        d_right: plus * ddec_r + minus * dinc_r,
        d_velocity,
    }
}

/// Local Lipschitz bound of the mobility on the interval spanned by `a` and `b`.
pub fn mobility_lipschitz(spec: &ModelSpec, a: f64, b: f64) -> f64 {
    let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
    let lo = lo.max(0.0);
    let hi = hi.min(spec.rho_max);
    if lo > hi {
        return 0.0;
    }
    const SAMPLES: usize = 8;
    (0..=SAMPLES)
        .map(|s| {
            let r = lo + (hi - lo) * s as f64 / SAMPLES as f64;
            spec.mobility_derivative(r).abs()
        })
        .fold(0.0, f64::max)
}

/// Divergence of the total flux and its Jacobian with respect to the density.
#[derive(Debug, Clone)]
pub struct Divergence {
    /// `(Phi_{i+1/2} - Phi_{i-1/2}) / h` per cell.
    pub values: Vec<f64>,
    /// Derivative of `values` with respect to the cell densities.
    pub jacobian: Tridiagonal,
    /// `d Phi_f / d u_f` for every interior face.
    pub face_mobility: Vec<f64>,
}

/// Conservative finite-volume operator
/// `div(G(rho) u - D grad rho)` on a cell-centered grid, with zero total flux
/// at walls and outward total flux `beta * rho` at exits.
#[derive(Debug, Clone, Copy)]
pub struct FluxOperator<'a> {
    pub grid: &'a Grid,
    pub spec: &'a ModelSpec,
}

impl<'a> FluxOperator<'a> {
    pub fn new(grid: &'a Grid, spec: &'a ModelSpec) -> Self {
        Self { grid, spec }
    }

    /// Evaluates the operator for interior face velocities `face_velocity` (length `n - 1`).
    pub fn divergence(&self, rho: &[f64], face_velocity: &[f64]) -> Divergence {
        let n = self.grid.n_cells();
        debug_assert_eq!(rho.len(), n);
        debug_assert_eq!(face_velocity.len(), n - 1);
        let h = self.grid.h();
        let dh = self.spec.diffusion() / h;
        let mut values = vec![0.0; n];
        let mut jac = Tridiagonal::zeros(n);
        let mut face_mobility = vec![0.0; n - 1];

        for f in 0..n - 1 {
            let (l, r) = (f, f + 1);
            let eo = engquist_osher(self.spec, rho[l], rho[r], face_velocity[f]);
            let flux = eo.value - dh * (rho[r] - rho[l]);
            let d_l = eo.d_left + dh;
            let d_r = eo.d_right - dh;
            face_mobility[f] = eo.d_velocity;
            values[l] += flux / h;
            values[r] -= flux / h;
            jac.add(l, l, d_l / h);
            jac.add(l, r, d_r / h);
            jac.add(r, l, -d_l / h);
            jac.add(r, r, -d_r / h);
        }
        let beta = self.spec.beta;
        if self.grid.left() == BoundaryTag::Exit {
            // outward normal points to -x, so the x-flux is -beta rho
            values[0] += beta * rho[0] / h;
            jac.add(0, 0, beta / h);
        }
        if self.grid.right() == BoundaryTag::Exit {
            values[n - 1] += beta * rho[n - 1] / h;
            jac.add(n - 1, n - 1, beta / h);
        }
        Divergence {
            values,
            jacobian: jac,
            face_mobility,
        }
    }

    /// Total outflow rate through the exits, `beta * rho` summed over exit cells.
    pub fn exit_outflow(&self, rho: &[f64]) -> f64 {
        let n = rho.len();
        let mut out = 0.0;
        if self.grid.left() == BoundaryTag::Exit {
            out += self.spec.beta * rho[0];
        }
        if self.grid.right() == BoundaryTag::Exit {
            out += self.spec.beta * rho[n - 1];
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Mobility;
    use proptest::prelude::*;

    fn specs() -> Vec<ModelSpec> {
        vec![
            ModelSpec::default(),
            ModelSpec {
                mobility: Mobility::LinearDensity,
                ..ModelSpec::default()
            },
        ]
    }

    #[test]
    fn linear_density_flux_is_donor_cell() {
        let s = &specs()[1];
        let f = engquist_osher(s, 0.3, 0.6, 2.0);
        assert!((f.value - 0.6).abs() < 1e-15);
        let f = engquist_osher(s, 0.3, 0.6, -2.0);
        assert!((f.value + 1.2).abs() < 1e-15);
    }

    #[test]
    fn no_flux_into_a_full_cell() {
        let s = ModelSpec::default();
        let f = engquist_osher(&s, 0.5, 1.0, 3.0);
        assert!(f.value.abs() < 1e-15);
        // leftward motion toward a full cell cannot push mass into it
        let f = engquist_osher(&s, 1.0, 0.2, -3.0);
        assert!(f.value >= 0.0);
        let full = engquist_osher(&s, 1.0, 1.0, 3.0);
        assert!(full.value.abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn consistent_and_monotone(a in -0.2f64..1.2, b in -0.2f64..1.2, v in -3.0f64..3.0) {
            for s in specs() {
                let same = engquist_osher(&s, a, a, v);
                prop_assert!((same.value - v * s.mobility(a)).abs() < 1e-13);
                let f = engquist_osher(&s, a, b, v);
                prop_assert!(f.d_left >= -1e-14);
                prop_assert!(f.d_right <= 1e-14);
            }
        }

        #[test]
        fn derivatives_match_finite_differences(
            a in 0.02f64..0.98, b in 0.02f64..0.98, v in prop_oneof![-3.0f64..-0.1, 0.1f64..3.0],
        ) {
            let s = ModelSpec::default();
            let e = 1e-7;
            // skip states straddling the splitting point where the derivative jumps
            let peak = s.mobility_peak();
            prop_assume!((a - peak).abs() > 1e-4 && (b - peak).abs() > 1e-4);
            let f = engquist_osher(&s, a, b, v);
            let da = (engquist_osher(&s, a + e, b, v).value - engquist_osher(&s, a - e, b, v).value) / (2.0 * e);
            let db = (engquist_osher(&s, a, b + e, v).value - engquist_osher(&s, a, b - e, v).value) / (2.0 * e);
            let dv = (engquist_osher(&s, a, b, v + e).value - engquist_osher(&s, a, b, v - e).value) / (2.0 * e);
            prop_assert!((da - f.d_left).abs() < 1e-6);
            prop_assert!((db - f.d_right).abs() < 1e-6);
            prop_assert!((dv - f.d_velocity).abs() < 1e-6);
        }

        #[test]
        fn operator_jacobian_matches_finite_differences(
            rho in proptest::collection::vec(0.02f64..0.98, 6),
            u in proptest::collection::vec(-2.0f64..2.0, 5),
        ) {
            let s = ModelSpec::default();
            let peak = s.mobility_peak();
            prop_assume!(rho.iter().all(|r| (r - peak).abs() > 1e-4));
            prop_assume!(u.iter().all(|v| v.abs() > 1e-3));
            let g = Grid::new(0.0, 1.0, 6, BoundaryTag::Exit, BoundaryTag::Wall).unwrap();
            let op = FluxOperator::new(&g, &s);
            let d = op.divergence(&rho, &u);
            let e = 1e-7;
            for j in 0..6 {
                let mut p = rho.clone();
                p[j] += e;
                let mut m = rho.clone();
                m[j] -= e;
                let dp = op.divergence(&p, &u).values;
                let dm = op.divergence(&m, &u).values;
                let mut unit = vec![0.0; 6];
                unit[j] = 1.0;
                let col = d.jacobian.mul_vec(&unit);
                for i in 0..6 {
                    prop_assert!(((dp[i] - dm[i]) / (2.0 * e) - col[i]).abs() < 1e-5);
                }
            }
        }
    }
}

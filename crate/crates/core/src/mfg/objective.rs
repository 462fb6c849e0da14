use crate::grid::Trajectory;
use crate::model::{ExtendedValue, ModelSpec};

/// Which running cost is integrated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObjectiveForm {
    /// `F(rho) |v|^2 / 2 + E(rho) / 2`.
    Velocity,
    /// `K(G(rho) v, rho) / 2 + E(rho) / 2`.
    Momentum,
}

/// Velocity-form objective `I_T(rho, v)`.
pub fn evaluate_objective(rho: &Trajectory, v: &Trajectory, spec: &ModelSpec) -> f64 {
    evaluate_objective_form(rho, v, spec, ObjectiveForm::Velocity).value()
}

/// Midpoint rule in space, right-endpoint rule in time (frames `1..=K`).
pub fn evaluate_objective_form(
    rho: &Trajectory,
    v: &Trajectory,
    spec: &ModelSpec,
    form: ObjectiveForm,
) -> ExtendedValue {
    let weight = rho.dt() * rho.grid().h();
    let mut total = ExtendedValue::Finite(0.0);
    for k in 1..rho.len() {
        let mut frame = 0.0;
        for (&r, &u) in rho.frame(k).iter().zip(v.frame(k)) {
            let kinetic = match form {
                ObjectiveForm::Velocity => spec.mobility(r) * u * u,
                ObjectiveForm::Momentum => match spec.eval_k(spec.mobility(r) * u, r) {
                    ExtendedValue::Finite(c) => c,
                    ExtendedValue::Infinite => return ExtendedValue::Infinite,
                },
            };
            frame += 0.5 * (kinetic + spec.eval_energy(r).0);
        }
        total = total + ExtendedValue::Finite(weight * frame);
    }
    total
}

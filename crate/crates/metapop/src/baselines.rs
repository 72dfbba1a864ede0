//! Continuous-time SIR and SEIR baselines integrated with fixed-step
//! classic Runge-Kutta, for sanity-checking the discrete simulator's
//! behavior against textbook dynamics.

use crate::error::Error;
use crate::Result;

/// Which compartment structure to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OdeModel {
    Sir,
    Seir,
}

/// Rate parameters shared by both baseline models. `lambda` is the exit
/// rate from each non-susceptible disease stage; `tau`, when given, is its
/// reciprocal (the mean stage duration) and must agree with `lambda`.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeParams {
    pub beta: f64,
    pub lambda: f64,
    pub tau: Option<f64>,
    pub population: f64,
}

impl OdeParams {
    pub fn validate(&self) -> Result<()> {
        if !self.beta.is_finite() || self.beta < 0.0 {
            return Err(Error::config(format!("beta must be finite and >= 0, got {}", self.beta)));
        }
        if !self.lambda.is_finite() || self.lambda <= 0.0 {
            return Err(Error::config(format!(
                "lambda must be finite and positive, got {}",
                self.lambda
            )));
        }
        if let Some(tau) = self.tau {
            if (self.lambda * tau - 1.0).abs() > 1e-9 {
                return Err(Error::config(format!(
                    "tau {} does not match lambda {}; want tau = 1/lambda",
                    tau, self.lambda
                )));
            }
        }
        if !self.population.is_finite() || self.population <= 0.0 {
            return Err(Error::config(format!(
                "population must be finite and positive, got {}",
                self.population
            )));
        }
        Ok(())
    }
}

/// Compartment values at one time point. `e` stays zero under [`OdeModel::Sir`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OdeState {
    pub time: f64,
    pub s: f64,
    pub e: f64,
    pub i: f64,
    pub r: f64,
}

/// Time derivatives of (s, e, i, r) under the SIR equations; the e slot is
/// held at zero.
pub fn sir_derivatives(state: &OdeState, params: &OdeParams) -> [f64; 4] {
    let infection = params.beta * state.s * state.i;
    [-infection, 0.0, infection - params.lambda * state.i, params.lambda * state.i]
}

/// Time derivatives of (s, e, i, r) under the SEIR equations with a shared
/// stage exit rate.
pub fn seir_derivatives(state: &OdeState, params: &OdeParams) -> [f64; 4] {
    let infection = params.beta * state.s * state.i;
    [
        -infection,
        infection - params.lambda * state.e,
        params.lambda * state.e - params.lambda * state.i,
        params.lambda * state.i,
    ]
}

/// N * beta / lambda: mean secondary infections per case in a fully
/// susceptible population.
pub fn basic_reproduction_number(params: &OdeParams) -> f64 {
    params.population * params.beta / params.lambda
}

/// Integrates the chosen model with classic fixed-step RK4 from `initial`
/// until `horizon`. The trajectory includes the initial state; node times
/// are computed as `k * dt` so they carry no accumulated drift. A
/// non-finite state aborts with the time at which it appeared.
pub fn integrate(
    model: OdeModel,
    params: &OdeParams,
    initial: &OdeState,
    dt: f64,
    horizon: f64,
) -> Result<Vec<OdeState>> {
    params.validate()?;
    if !dt.is_finite() || dt <= 0.0 {
        return Err(Error::config(format!("step size must be positive, got {dt}")));
    }
    if !horizon.is_finite() || horizon < 0.0 {
        return Err(Error::config(format!("horizon must be nonnegative, got {horizon}")));
    }
    let derivatives = match model {
        OdeModel::Sir => sir_derivatives,
        OdeModel::Seir => seir_derivatives,
    };
    // Tolerate horizons that are a hair past a multiple of dt.
    let steps = (horizon / dt - 1e-9).ceil().max(0.0) as usize;

    let mut trajectory = Vec::with_capacity(steps + 1);
    let mut y = [initial.s, initial.e, initial.i, initial.r];
    trajectory.push(OdeState { time: 0.0, ..*initial });

    let eval = |y: &[f64; 4], time: f64| {
        derivatives(&OdeState { time, s: y[0], e: y[1], i: y[2], r: y[3] }, params)
    };
    for k in 0..steps {
        let t = k as f64 * dt;
        let k1 = eval(&y, t);
        let mut y2 = y;
        for c in 0..4 {
            y2[c] = y[c] + 0.5 * dt * k1[c];
        }
        let k2 = eval(&y2, t + 0.5 * dt);
        let mut y3 = y;
        for c in 0..4 {
            y3[c] = y[c] + 0.5 * dt * k2[c];
        }
        let k3 = eval(&y3, t + 0.5 * dt);
        let mut y4 = y;
        for c in 0..4 {
            y4[c] = y[c] + dt * k3[c];
        }
        let k4 = eval(&y4, t + dt);
        for c in 0..4 {
            y[c] += dt / 6.0 * (k1[c] + 2.0 * k2[c] + 2.0 * k3[c] + k4[c]);
        }
        let time = (k + 1) as f64 * dt;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::IntegrationFailure { time });
        }
        trajectory.push(OdeState { time, s: y[0], e: y[1], i: y[2], r: y[3] });
    }
    Ok(trajectory)
}

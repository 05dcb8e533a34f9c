//! Sequential reference implementation in single precision.
//!
//! Every expression is written in the same evaluation order as the
//! corpus source, so the compiled pipelines can be compared against it
//! bit for bit.

use super::config::ModelParams;
use super::state::{Grid, ShallowWaterState};
use super::SwError;

/// Output of the dynamics kernel; all fields have the full grid shape
/// and zero ghost values.
#[derive(Debug, Clone, PartialEq)]
pub struct Dynamics {
    pub un: Vec<f32>,
    pub vn: Vec<f32>,
    pub etan: Vec<f32>,
}

#[inline]
fn face(vel: f32, dt: f32, g: f32, hi: f32, lo: f32, dx: f32, open: bool) -> f32 {
    if open {
        vel - dt * g * (hi - lo) / dx
    } else {
        0.0
    }
}

#[inline]
fn upwind(vel: f32, h_up: f32, h_down: f32) -> f32 {
    if vel > 0.0 {
        vel * h_up
    } else {
        vel * h_down
    }
}

pub fn dynamics_step(state: &ShallowWaterState, p: &ModelParams) -> Result<Dynamics, SwError> {
    p.check_cfl(state.max_depth())?;
    let grid = state.grid;
    let n = grid.size();
    let (eta, u, v, h, wet) = (&state.eta, &state.u, &state.v, &state.h, &state.wet);
    let s = grid.row_stride();
    let (dt, g, dx) = (p.dt, p.g, p.dx);
    let mut out = Dynamics { un: vec![0.0; n], vn: vec![0.0; n], etan: vec![0.0; n] };
    for j in 1..=grid.ny {
        for k in 1..=grid.nx {
            let c = grid.idx(j, k);
            let (e, w, nn, so) = (c + 1, c - 1, c + s, c - s);
            let ue = face(u[c], dt, g, eta[e], eta[c], dx, wet[c] != 0 && wet[e] != 0);
            let uw = face(u[w], dt, g, eta[c], eta[w], dx, wet[w] != 0 && wet[c] != 0);
            let vno = face(v[c], dt, g, eta[nn], eta[c], dx, wet[c] != 0 && wet[nn] != 0);
            let vs = face(v[so], dt, g, eta[c], eta[so], dx, wet[so] != 0 && wet[c] != 0);
            let hue = upwind(ue, h[c], h[e]);
            let huw = upwind(uw, h[w], h[c]);
            let hvn = upwind(vno, h[c], h[nn]);
            let hvs = upwind(vs, h[so], h[c]);
            out.un[c] = ue;
            out.vn[c] = vno;
            out.etan[c] = eta[c] - dt * ((hue - huw) + (hvn - hvs)) / dx;
        }
    }
    check_finite(grid, "etan", &out.etan)?;
    check_finite(grid, "un", &out.un)?;
    check_finite(grid, "vn", &out.vn)?;
    Ok(out)
}

/// Filtered elevation. Ghost values are copied from `etan`.
pub fn shapiro_step(grid: Grid, etan: &[f32], wet: &[i32], eps: f32) -> Vec<f32> {
    let s = grid.row_stride();
    let mut out = etan.to_vec();
    for j in 1..=grid.ny {
        for k in 1..=grid.nx {
            let c = grid.idx(j, k);
            if wet[c] == 1 {
                let pick = |i: usize| if wet[i] == 1 { etan[i] } else { etan[c] };
                let (ee, ew, en, es) = (pick(c + 1), pick(c - 1), pick(c + s), pick(c - s));
                out[c] = (1.0 - eps) * etan[c] + eps * 0.25 * ((ee + ew) + (en + es));
            } else {
                out[c] = etan[c];
            }
        }
    }
    out
}

/// Writes the new interior state; ghost cells are left untouched.
pub fn update_step(state: &mut ShallowWaterState, eta_f: &[f32], dynamics: &Dynamics, hmin: f32) {
    let grid = state.grid;
    for j in 1..=grid.ny {
        for k in 1..=grid.nx {
            let c = grid.idx(j, k);
            state.eta[c] = eta_f[c];
            let hh = state.h0[c] + eta_f[c];
            state.h[c] = hh;
            if hh <= hmin {
                state.wet[c] = 0;
                state.u[c] = 0.0;
                state.v[c] = 0.0;
            } else {
                state.wet[c] = 1;
                state.u[c] = dynamics.un[c];
                state.v[c] = dynamics.vn[c];
            }
        }
    }
}

/// One time step: dynamics, then the Shapiro filter, then the update.
pub fn reference_step(state: &ShallowWaterState, p: &ModelParams) -> Result<ShallowWaterState, SwError> {
    let d = dynamics_step(state, p)?;
    let eta_f = shapiro_step(state.grid, &d.etan, &state.wet, p.eps);
    let mut next = state.clone();
    update_step(&mut next, &eta_f, &d, p.hmin);
    Ok(next)
}

/// `nt` applications of [`reference_step`].
pub fn reference_run(state: &ShallowWaterState, p: &ModelParams, nt: usize) -> Result<ShallowWaterState, SwError> {
    let mut s = state.clone();
    for _ in 0..nt {
        s = reference_step(&s, p)?;
    }
    Ok(s)
}

fn check_finite(grid: Grid, field: &'static str, data: &[f32]) -> Result<(), SwError> {
    match data.iter().position(|x| !x.is_finite()) {
        None => Ok(()),
        Some(i) => Err(SwError::NonFiniteField { field, j: i / grid.row_stride(), k: i % grid.row_stride() }),
    }
}

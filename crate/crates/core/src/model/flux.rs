//! External heat flux submodels: building hull, HVAC and internal gains.
//!
//! Each returns a heat-flow vector in W over the network states; summing
//! them and mapping through `B_t` gives the forcing of the thermal submodel.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::model::network::RcNetwork;
use crate::params::ParameterVector;

/// Layout of the disturbance vector.
pub mod disturbance {
    pub const LEN: usize = 6;
    /// Ambient air temperature, °C.
    pub const AMBIENT: usize = 0;
    /// Supply air temperature upstream of the reheat coils, °C.
    pub const SUPPLY: usize = 1;
    /// First of the four irradiance channels (E, S, W, N), W/m².
    pub const SOLAR: usize = 2;
    pub const NAMES: [&str; LEN] = ["Ta", "Ts", "solE", "solS", "solW", "solN"];
}

/// Typed view of a disturbance sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disturbance {
    pub ambient: f64,
    pub supply: f64,
    /// E, S, W, N
    pub solar: [f64; 4],
}

impl Disturbance {
    pub fn to_vector(&self) -> DVector<f64> {
        DVector::from_vec(vec![self.ambient, self.supply, self.solar[0], self.solar[1], self.solar[2], self.solar[3]])
    }

    pub fn from_slice(v: &[f64]) -> Result<Self> {
        if v.len() != disturbance::LEN {
            return Err(Error::Dimension(format!("disturbance has {} entries, expected {}", v.len(), disturbance::LEN)));
        }
        Ok(Disturbance { ambient: v[0], supply: v[1], solar: [v[2], v[3], v[4], v[5]] })
    }
}

/// Hull heat flux on a single exposed element with temperature difference
/// `ambient - x` and irradiance `solar`.
pub fn hull_flux_scalar(p: &ParameterVector, a_ew: f64, a_win: f64, delta_t: f64, solar: f64) -> f64 {
    p.gamma_ew * a_ew * delta_t + p.gamma_absorp * a_ew * solar + p.u_win * a_win * delta_t + p.gamma_win_sol_abs * a_win * solar
}

fn check_len(what: &str, got: usize, want: usize) -> Result<()> {
    if got == want {
        Ok(())
    } else {
        Err(Error::Dimension(format!("{what} has length {got}, expected {want}")))
    }
}

pub fn hull_flux(net: &RcNetwork, x: &DVector<f64>, v: &DVector<f64>, p: &ParameterVector) -> Result<DVector<f64>> {
    check_len("state", x.len(), net.len())?;
    check_len("disturbance", v.len(), disturbance::LEN)?;
    let ta = v[disturbance::AMBIENT];
    let mut q = DVector::zeros(net.len());
    for face in &net.hull {
        let sol = face.solar.map(|c| v[disturbance::SOLAR + c]).unwrap_or(0.0);
        q[face.outer_state] += hull_flux_scalar(p, face.a_ew, 0.0, ta - x[face.outer_state], sol);
        if let Some(room) = face.room_state {
            if face.a_win > 0.0 {
                q[room] += hull_flux_scalar(p, 0.0, face.a_win, ta - x[room], sol);
            }
        }
    }
    Ok(q)
}

pub fn hvac_flux(net: &RcNetwork, x: &DVector<f64>, v: &DVector<f64>, u: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("state", x.len(), net.len())?;
    check_len("disturbance", v.len(), disturbance::LEN)?;
    check_len("airflow", u.len(), net.boxes.len())?;
    if let Some((index, &value)) = u.iter().enumerate().find(|(_, f)| !(**f >= 0.0)) {
        return Err(Error::NegativeAirflow { index, value });
    }
    let ts = v[disturbance::SUPPLY];
    let cp = net.options.air_specific_heat;
    let mut q = DVector::zeros(net.len());
    for (i, boxes) in net.service.iter().enumerate() {
        if boxes.is_empty() {
            continue;
        }
        let flow: f64 = boxes.iter().map(|&j| u[j]).sum();
        q[i] = cp * flow * (ts - x[i]);
    }
    Ok(q)
}

pub fn ig_flux(net: &RcNetwork, c_ig: &[f64], f_ig: &DVector<f64>) -> Result<DVector<f64>> {
    check_len("background gains", c_ig.len(), net.zones())?;
    check_len("internal gains", f_ig.len(), net.zones())?;
    let mut q = DVector::zeros(net.len());
    for &r in &net.room_states {
        let z = net.state_zone[r].expect("room");
        q[r] = net.floor_area[r] * (c_ig[z] + f_ig[z]);
    }
    Ok(q)
}

/// Continuous-time right-hand side written as thermal submodel plus the sum
/// of the three flux submodels.
pub fn flux_rhs(
    net: &RcNetwork,
    p: &ParameterVector,
    x: &DVector<f64>,
    v: &DVector<f64>,
    u: &DVector<f64>,
    f_ig: &DVector<f64>,
) -> Result<DVector<f64>> {
    let q = hull_flux(net, x, v, p)? + hvac_flux(net, x, v, u)? + ig_flux(net, &p.c_ig, f_ig)?;
    Ok(&net.a_t * x + &net.b_t * q)
}

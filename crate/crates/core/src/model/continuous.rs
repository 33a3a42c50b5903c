use nalgebra::{DMatrix, DVector};

use crate::building::BuildingDescription;
use crate::error::{Error, Result};
use crate::model::flux::disturbance;
use crate::model::network::{build_rc_network, NetworkOptions, RcNetwork};
use crate::params::ParameterVector;

/// Continuous bilinear state-space model
/// `ẋ = A x + B_v v + B_IG (c_IG + f_IG) + Σ_j (B_xu_j x + B_vu_j v) u_j`.
#[derive(Debug, Clone)]
pub struct RcStateSpaceModel {
    pub network: RcNetwork,
    pub params: ParameterVector,
    pub a: DMatrix<f64>,
    pub b_v: DMatrix<f64>,
    pub b_ig: DMatrix<f64>,
    pub b_xu: Vec<DMatrix<f64>>,
    pub b_vu: Vec<DMatrix<f64>>,
}

impl RcStateSpaceModel {
    pub fn states(&self) -> usize {
        self.network.len()
    }

    pub fn zones(&self) -> usize {
        self.network.zones()
    }

    pub fn inputs(&self) -> usize {
        self.network.boxes.len()
    }

    pub fn output(&self) -> &DMatrix<f64> {
        &self.network.output
    }

    /// Matrix-form right-hand side.
    pub fn rhs(&self, x: &DVector<f64>, v: &DVector<f64>, u: &DVector<f64>, f_ig: &DVector<f64>) -> DVector<f64> {
        let c_ig = DVector::from_column_slice(&self.params.c_ig);
        let mut dx = &self.a * x + &self.b_v * v + &self.b_ig * (c_ig + f_ig);
        for (j, &uj) in u.iter().enumerate() {
            if uj != 0.0 {
                dx += (&self.b_xu[j] * x + &self.b_vu[j] * v) * uj;
            }
        }
        dx
    }
}

/// Expresses the three flux submodels in matrix form on top of the thermal
/// submodel.
pub fn assemble_continuous(network: RcNetwork, params: &ParameterVector) -> Result<RcStateSpaceModel> {
    params.validate(network.zones())?;
    let n = network.len();
    let inv_c = network.b_t.diagonal();
    let cp = network.options.air_specific_heat;

    let mut a = network.a_t.clone();
    let mut b_v = DMatrix::zeros(n, disturbance::LEN);
    for face in &network.hull {
        let o = face.outer_state;
        let g = params.gamma_ew * face.a_ew * inv_c[o];
        a[(o, o)] -= g;
        b_v[(o, disturbance::AMBIENT)] += g;
        if let Some(ch) = face.solar {
            b_v[(o, disturbance::SOLAR + ch)] += params.gamma_absorp * face.a_ew * inv_c[o];
        }
        if face.a_win > 0.0 {
            let r = face.room_state.ok_or_else(|| Error::Dimension("window without room".into()))?;
            let g = params.u_win * face.a_win * inv_c[r];
            a[(r, r)] -= g;
            b_v[(r, disturbance::AMBIENT)] += g;
            if let Some(ch) = face.solar {
                b_v[(r, disturbance::SOLAR + ch)] += params.gamma_win_sol_abs * face.a_win * inv_c[r];
            }
        }
    }

    let mut b_ig = DMatrix::zeros(n, network.zones());
    for &r in &network.room_states {
        b_ig[(r, network.state_zone[r].expect("room"))] = network.floor_area[r] * inv_c[r];
    }

    let m = network.boxes.len();
    let mut b_xu = vec![DMatrix::zeros(n, n); m];
    let mut b_vu = vec![DMatrix::zeros(n, disturbance::LEN); m];
    for (j, b) in network.boxes.iter().enumerate() {
        let r = b.room_state;
        b_xu[j][(r, r)] = -cp * inv_c[r];
        b_vu[j][(r, disturbance::SUPPLY)] = cp * inv_c[r];
    }

    Ok(RcStateSpaceModel { network, params: params.clone(), a, b_v, b_ig, b_xu, b_vu })
}

/// Convenience: network construction followed by assembly.
pub fn build_model(desc: &BuildingDescription, params: &ParameterVector, options: &NetworkOptions) -> Result<RcStateSpaceModel> {
    assemble_continuous(build_rc_network(desc, params, options)?, params)
}

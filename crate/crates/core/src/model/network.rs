//! RC network assembly (thermal submodel) from a building description.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::building::{BuildingDescription, ElementKind, Neighbor};
use crate::error::{Error, Result};
use crate::params::ParameterVector;

/// Specific heat of air, J/(kg·K).
pub const AIR_SPECIFIC_HEAT: f64 = 1005.0;
/// Density of air, kg/m³.
pub const AIR_DENSITY: f64 = 1.2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NetworkOptions {
    /// Capacitive nodes per layered element (2 or 3).
    pub wall_nodes: usize,
    pub air_density: f64,
    pub air_specific_heat: f64,
}

impl Default for NetworkOptions {
    fn default() -> Self {
        NetworkOptions { wall_nodes: 2, air_density: AIR_DENSITY, air_specific_heat: AIR_SPECIFIC_HEAT }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StateRole {
    RoomAir { zone: usize },
    Layer { node: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateInfo {
    /// Unique label, e.g. `room_S` or `floor_S#1`.
    pub label: String,
    /// Building element this state belongs to.
    pub element: String,
    pub role: StateRole,
}

/// A hull-exposed face: opaque terms act on the layer node next to ambient,
/// window terms act on the room air behind the facade.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullFace {
    pub element: String,
    pub outer_state: usize,
    pub room_state: Option<usize>,
    pub a_ew: f64,
    pub a_win: f64,
    /// Irradiance channel (0..4 = E, S, W, N), if the face sees the sun.
    pub solar: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VavService {
    pub id: String,
    pub zone: usize,
    pub room_state: usize,
    pub min_flow: f64,
    pub max_flow: f64,
}

/// Thermal submodel `ẋ = A_t x + B_t q` plus the structural maps the
/// external heat flux submodels need.
#[derive(Debug, Clone)]
pub struct RcNetwork {
    pub states: Vec<StateInfo>,
    /// J/K per state.
    pub capacitance: DVector<f64>,
    pub a_t: DMatrix<f64>,
    /// `diag(1 / capacitance)`.
    pub b_t: DMatrix<f64>,
    pub zone_ids: Vec<String>,
    /// Room-air state of each room, in description order.
    pub room_states: Vec<usize>,
    /// Zone of every state (room air only).
    pub state_zone: Vec<Option<usize>>,
    /// Floor area per state, m² (zero off room air).
    pub floor_area: DVector<f64>,
    pub boxes: Vec<VavService>,
    /// VAV boxes serving each state.
    pub service: Vec<Vec<usize>>,
    pub hull: Vec<HullFace>,
    /// Output matrix: floor-area weighted average of each zone's room air.
    pub output: DMatrix<f64>,
    pub options: NetworkOptions,
}

impl RcNetwork {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn zones(&self) -> usize {
        self.zone_ids.len()
    }

    pub fn state_labels(&self) -> Vec<String> {
        self.states.iter().map(|s| s.label.clone()).collect()
    }

    pub fn box_ids(&self) -> Vec<String> {
        self.boxes.iter().map(|b| b.id.clone()).collect()
    }

    pub fn is_room(&self, state: usize) -> bool {
        matches!(self.states[state].role, StateRole::RoomAir { .. })
    }
}

/// Interior surface coefficient of `side` (0 or 1) of a layered element.
fn surface_coefficient(kind: ElementKind, side: usize, p: &ParameterVector) -> f64 {
    match (kind, side) {
        (ElementKind::Floor, 0) | (ElementKind::Ceiling, 1) => p.gamma_floor,
        (ElementKind::Floor, _) | (ElementKind::Ceiling, _) => p.gamma_ceil,
        _ => p.gamma_iw,
    }
}

/// Splits a layer stack into `nodes` slabs of equal thermal resistance and
/// returns the heat capacity per m² of each slab plus the total resistance.
fn slab_capacities(layers: &[crate::building::Layer], nodes: usize) -> (Vec<f64>, f64) {
    let resist: Vec<f64> = layers.iter().map(|l| l.thickness / l.conductivity).collect();
    let total: f64 = resist.iter().sum();
    let slab = total / nodes as f64;
    let mut caps = vec![0.0; nodes];
    let mut start = 0.0;
    for (layer, &r) in layers.iter().zip(&resist) {
        let end = start + r;
        let heat = layer.thickness * layer.density * layer.specific_heat;
        for (j, cap) in caps.iter_mut().enumerate() {
            let lo = (j as f64 * slab).max(start);
            let hi = ((j + 1) as f64 * slab).min(end);
            if hi > lo {
                *cap += heat * (hi - lo) / r;
            }
        }
        start = end;
    }
    (caps, total)
}

/// Builds the thermal submodel and the structural maps of the flux submodels.
pub fn build_rc_network(desc: &BuildingDescription, params: &ParameterVector, options: &NetworkOptions) -> Result<RcNetwork> {
    desc.validate()?;
    params.validate(desc.zones.len())?;
    if !(2..=3).contains(&options.wall_nodes) {
        return Err(Error::Config(format!("wall_nodes must be 2 or 3, got {}", options.wall_nodes)));
    }
    let nodes = options.wall_nodes;

    let mut states = Vec::new();
    let mut caps = Vec::new();
    let mut state_zone = Vec::new();
    let mut areas = Vec::new();
    // element index -> first state index
    let mut first_state = vec![usize::MAX; desc.elements.len()];

    for (ei, e) in desc.elements.iter().enumerate() {
        first_state[ei] = states.len();
        if e.kind == ElementKind::RoomAir {
            let zone = desc.zone_index(e.zone.as_deref().unwrap_or_default()).expect("validated");
            states.push(StateInfo { label: e.id.clone(), element: e.id.clone(), role: StateRole::RoomAir { zone } });
            caps.push(options.air_density * options.air_specific_heat * e.volume.unwrap_or(0.0));
            state_zone.push(Some(zone));
            areas.push(e.floor_area.unwrap_or(0.0));
        } else {
            let opaque = e.area.unwrap_or(0.0) - e.hull.map(|h| h.a_win).unwrap_or(0.0);
            let (slabs, _) = slab_capacities(&e.layers, nodes);
            for (j, c) in slabs.into_iter().enumerate() {
                states.push(StateInfo { label: format!("{}#{j}", e.id), element: e.id.clone(), role: StateRole::Layer { node: j } });
                caps.push(c * opaque);
                state_zone.push(None);
                areas.push(0.0);
            }
        }
    }
    let n = states.len();
    for (s, &c) in states.iter().zip(&caps) {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::NonpositiveCapacitance { label: s.label.clone(), value: c });
        }
    }

    // Conductance graph.
    let mut laplacian = DMatrix::<f64>::zeros(n, n);
    let mut edges: Vec<Vec<usize>> = vec![Vec::new(); n];
    let mut connect = |i: usize, j: usize, g: f64| {
        laplacian[(i, i)] += g;
        laplacian[(j, j)] += g;
        laplacian[(i, j)] -= g;
        laplacian[(j, i)] -= g;
        edges[i].push(j);
        edges[j].push(i);
    };
    let mut hull = Vec::new();

    for (ei, e) in desc.elements.iter().enumerate() {
        if e.kind == ElementKind::RoomAir {
            continue;
        }
        let base = first_state[ei];
        let opaque = e.area.unwrap_or(0.0) - e.hull.map(|h| h.a_win).unwrap_or(0.0);
        let (_, total_r) = slab_capacities(&e.layers, nodes);
        let slab_r = total_r / nodes as f64;
        for j in 0..nodes - 1 {
            connect(base + j, base + j + 1, opaque / slab_r);
        }
        let sides = e.connects.as_ref().expect("validated");
        let mut room_behind = None;
        for (side, name) in sides.iter().enumerate() {
            let node = if side == 0 { base } else { base + nodes - 1 };
            if let Some(Neighbor::Room(ri)) = desc.neighbor(name) {
                let h = surface_coefficient(e.kind, side, params);
                let g = opaque / (0.5 * slab_r + 1.0 / h);
                connect(node, first_state[ri], g);
                room_behind = Some(first_state[ri]);
            }
        }
        if let Some(exposure) = e.hull {
            let ambient_side = sides.iter().position(|s| s == crate::building::AMBIENT).expect("validated");
            let outer_state = if ambient_side == 0 { base } else { base + nodes - 1 };
            hull.push(HullFace {
                element: e.id.clone(),
                outer_state,
                room_state: room_behind,
                a_ew: exposure.a_ew,
                a_win: exposure.a_win,
                solar: exposure.orientation.map(|o| o.solar_channel()),
            });
            if exposure.a_win > 0.0 && room_behind.is_none() {
                return Err(Error::schema(format!("element `{}`: windows require a room on the interior side", e.id)));
            }
        }
    }

    // Every node must reach some room air.
    let room_states: Vec<usize> = (0..n).filter(|&i| state_zone[i].is_some()).collect();
    let mut reached = vec![false; n];
    let mut queue: VecDeque<usize> = room_states.iter().copied().collect();
    for &r in &room_states {
        reached[r] = true;
    }
    while let Some(i) = queue.pop_front() {
        for &j in &edges[i] {
            if !reached[j] {
                reached[j] = true;
                queue.push_back(j);
            }
        }
    }
    if let Some(i) = reached.iter().position(|r| !r) {
        return Err(Error::DisconnectedNode(states[i].label.clone()));
    }

    let capacitance = DVector::from_vec(caps);
    let inv_c = capacitance.map(|c| 1.0 / c);
    let b_t = DMatrix::from_diagonal(&inv_c);
    let mut a_t = -laplacian;
    for i in 0..n {
        a_t.row_mut(i).scale_mut(inv_c[i]);
    }

    let zones = desc.zones.len();
    let floor_area = DVector::from_vec(areas);
    let mut output = DMatrix::zeros(zones, n);
    for &r in &room_states {
        output[(state_zone[r].expect("room"), r)] = floor_area[r];
    }
    for z in 0..zones {
        let total: f64 = output.row(z).sum();
        output.row_mut(z).scale_mut(1.0 / total);
    }

    let box_rooms = desc.box_rooms();
    let box_zones = desc.box_zones();
    let mut service = vec![Vec::new(); n];
    let boxes: Vec<VavService> = desc
        .vav_boxes
        .iter()
        .enumerate()
        .map(|(j, b)| {
            let room_state = first_state[box_rooms[j]];
            service[room_state].push(j);
            VavService { id: b.id.clone(), zone: box_zones[j], room_state, min_flow: b.min_flow, max_flow: b.max_flow }
        })
        .collect();

    Ok(RcNetwork {
        states,
        capacitance,
        a_t,
        b_t,
        zone_ids: desc.zone_ids(),
        room_states,
        state_zone,
        floor_area,
        boxes,
        service,
        hull,
        output,
        options: *options,
    })
}

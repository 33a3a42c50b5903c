//! Declarative building description: zones, building elements and VAV boxes.
//!
//! The JSON layout is versioned by the `schema` field (see [`SCHEMA`]); the
//! field reference lives in `docs/building-schema.md`.

use std::collections::{HashMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA: &str = "thermident-building/1";

/// Reserved neighbor name for the outdoor environment.
pub const AMBIENT: &str = "AMBIENT";
/// Reserved neighbor name for a boundary without heat exchange.
pub const ADIABATIC: &str = "ADIABATIC";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BuildingDescription {
    pub schema: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub zones: Vec<Zone>,
    pub elements: Vec<BuildingElement>,
    pub vav_boxes: Vec<VavBox>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Zone {
    pub id: String,
    /// m²
    pub floor_area: f64,
    /// Ids of neighboring zones. Must be symmetric.
    pub adjacency: Vec<String>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Hash)]
#[serde(rename_all = "kebab-case")]
pub enum ElementKind {
    RoomAir,
    Wall,
    Floor,
    Ceiling,
    WindowBearingWall,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq, Hash)]
pub enum Orientation {
    E,
    S,
    W,
    N,
}

impl Orientation {
    /// Index of the matching irradiance channel inside the solar block of the
    /// disturbance vector (E, S, W, N order).
    pub fn solar_channel(self) -> usize {
        match self {
            Orientation::E => 0,
            Orientation::S => 1,
            Orientation::W => 2,
            Orientation::N => 3,
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Layer {
    /// m
    pub thickness: f64,
    /// W/(m·K)
    pub conductivity: f64,
    /// kg/m³
    pub density: f64,
    /// J/(kg·K)
    pub specific_heat: f64,
}

/// Exposure of an element to the outdoor environment.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct HullExposure {
    /// Exterior (opaque) wall area, m².
    pub a_ew: f64,
    /// Window area, m².
    #[serde(default)]
    pub a_win: f64,
    /// Facade orientation; `None` means no solar gains reach this face.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation: Option<Orientation>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct BuildingElement {
    pub id: String,
    pub kind: ElementKind,
    /// Room air only: owning zone.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zone: Option<String>,
    /// Room air only: floor area in m².
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor_area: Option<f64>,
    /// Room air only: air volume in m³.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub volume: Option<f64>,
    /// Layered elements only: the two nodes this element separates
    /// (room-air ids, `AMBIENT` or `ADIABATIC`). Layers run from the first
    /// neighbor to the second.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub connects: Option<[String; 2]>,
    /// Layered elements only: gross face area in m² (windows included).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub layers: Vec<Layer>,
    /// Required when one side is `AMBIENT`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hull: Option<HullExposure>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VavBox {
    pub id: String,
    pub zone: String,
    /// Room-air element fed by this box. May be omitted when the zone has a
    /// single room.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub room: Option<String>,
    /// kg/s
    pub min_flow: f64,
    /// kg/s
    pub max_flow: f64,
}

/// Resolved neighbor of a layered element.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Neighbor {
    /// Index into `elements` of a room-air element.
    Room(usize),
    Ambient,
    Adiabatic,
}

impl BuildingDescription {
    pub fn from_json_str(text: &str) -> Result<Self> {
        let desc: BuildingDescription = serde_json::from_str(text).map_err(|e| Error::Schema {
            message: e.to_string(),
            line: Some(e.line()),
            column: Some(e.column()),
        })?;
        desc.validate().map_err(|e| attach_line(e, text))?;
        Ok(desc)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn zone_index(&self, id: &str) -> Option<usize> {
        self.zones.iter().position(|z| z.id == id)
    }

    pub fn element_index(&self, id: &str) -> Option<usize> {
        self.elements.iter().position(|e| e.id == id)
    }

    pub fn zone_ids(&self) -> Vec<String> {
        self.zones.iter().map(|z| z.id.clone()).collect()
    }

    pub fn box_ids(&self) -> Vec<String> {
        self.vav_boxes.iter().map(|b| b.id.clone()).collect()
    }

    /// Zone index served by each VAV box.
    pub fn box_zones(&self) -> Vec<usize> {
        self.vav_boxes.iter().map(|b| self.zone_index(&b.zone).expect("validated")).collect()
    }

    /// Adjacency as zone indices.
    pub fn zone_neighbors(&self) -> Vec<Vec<usize>> {
        self.zones.iter().map(|z| z.adjacency.iter().map(|a| self.zone_index(a).expect("validated")).collect()).collect()
    }

    /// Room-air element index fed by each box.
    pub fn box_rooms(&self) -> Vec<usize> {
        self.vav_boxes
            .iter()
            .map(|b| match &b.room {
                Some(r) => self.element_index(r).expect("validated"),
                None => self
                    .elements
                    .iter()
                    .position(|e| e.kind == ElementKind::RoomAir && e.zone.as_deref() == Some(&b.zone))
                    .expect("validated"),
            })
            .collect()
    }

    pub fn neighbor(&self, name: &str) -> Option<Neighbor> {
        match name {
            AMBIENT => Some(Neighbor::Ambient),
            ADIABATIC => Some(Neighbor::Adiabatic),
            id => self.element_index(id).filter(|&i| self.elements[i].kind == ElementKind::RoomAir).map(Neighbor::Room),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA {
            return Err(Error::schema(format!("unsupported schema `{}` (expected `{SCHEMA}`)", self.schema)));
        }
        if self.zones.is_empty() {
            return Err(Error::schema("at least one zone is required"));
        }
        unique(self.zones.iter().map(|z| z.id.as_str()), "zone")?;
        unique(self.elements.iter().map(|e| e.id.as_str()), "element")?;
        unique(self.vav_boxes.iter().map(|b| b.id.as_str()), "VAV box")?;

        let zone_ids: HashSet<&str> = self.zones.iter().map(|z| z.id.as_str()).collect();
        for name in [AMBIENT, ADIABATIC] {
            if zone_ids.contains(name) || self.element_index(name).is_some() {
                return Err(Error::schema(format!("`{name}` is a reserved name")));
            }
        }
        let adjacency: HashMap<&str, HashSet<&str>> =
            self.zones.iter().map(|z| (z.id.as_str(), z.adjacency.iter().map(String::as_str).collect())).collect();
        for z in &self.zones {
            positive(z.floor_area, || format!("zone `{}`: floor_area", z.id))?;
            for a in &z.adjacency {
                if a == &z.id {
                    return Err(Error::schema(format!("zone `{}` lists itself as adjacent", z.id)));
                }
                match adjacency.get(a.as_str()) {
                    None => return Err(Error::schema(format!("zone `{}`: unknown adjacent zone `{a}`", z.id))),
                    Some(back) if !back.contains(z.id.as_str()) => {
                        return Err(Error::schema(format!("zone `{}`: adjacency to `{a}` is not symmetric", z.id)))
                    }
                    _ => {}
                }
            }
        }

        for e in &self.elements {
            self.validate_element(e, &zone_ids)?;
        }
        for z in &self.zones {
            let rooms = self.rooms_of_zone(&z.id);
            if rooms == 0 {
                return Err(Error::schema(format!("zone `{}` has no room-air element", z.id)));
            }
        }

        for b in &self.vav_boxes {
            if !zone_ids.contains(b.zone.as_str()) {
                return Err(Error::schema(format!("VAV box `{}`: unknown zone `{}`", b.id, b.zone)));
            }
            match &b.room {
                Some(r) => {
                    let ok = self
                        .element_index(r)
                        .map(|i| {
                            let e = &self.elements[i];
                            e.kind == ElementKind::RoomAir && e.zone.as_deref() == Some(&b.zone)
                        })
                        .unwrap_or(false);
                    if !ok {
                        return Err(Error::schema(format!("VAV box `{}`: `{r}` is not a room of zone `{}`", b.id, b.zone)));
                    }
                }
                None if self.rooms_of_zone(&b.zone) != 1 => {
                    return Err(Error::schema(format!("VAV box `{}`: zone `{}` has several rooms, `room` is required", b.id, b.zone)));
                }
                None => {}
            }
            if !(b.min_flow >= 0.0 && b.max_flow > 0.0 && b.max_flow >= b.min_flow) {
                return Err(Error::schema(format!("VAV box `{}`: flows must satisfy 0 <= min_flow <= max_flow, max_flow > 0", b.id)));
            }
        }
        Ok(())
    }

    fn rooms_of_zone(&self, zone: &str) -> usize {
        self.elements.iter().filter(|e| e.kind == ElementKind::RoomAir && e.zone.as_deref() == Some(zone)).count()
    }

    fn validate_element(&self, e: &BuildingElement, zone_ids: &HashSet<&str>) -> Result<()> {
        let ctx = |what: &str| format!("element `{}`: {what}", e.id);
        if e.kind == ElementKind::RoomAir {
            let zone = e.zone.as_deref().ok_or_else(|| Error::schema(ctx("room air requires `zone`")))?;
            if !zone_ids.contains(zone) {
                return Err(Error::schema(ctx(&format!("unknown zone `{zone}`"))));
            }
            positive(e.floor_area.unwrap_or(f64::NAN), || ctx("floor_area"))?;
            positive(e.volume.unwrap_or(f64::NAN), || ctx("volume"))?;
            if e.connects.is_some() || !e.layers.is_empty() || e.hull.is_some() || e.area.is_some() {
                return Err(Error::schema(ctx("room air takes no `connects`, `area`, `layers` or `hull`")));
            }
            return Ok(());
        }
        if e.zone.is_some() || e.floor_area.is_some() || e.volume.is_some() {
            return Err(Error::schema(ctx("`zone`, `floor_area` and `volume` are room-air fields")));
        }
        let connects = e.connects.as_ref().ok_or_else(|| Error::schema(ctx("must connect exactly two nodes (`connects`)")))?;
        let mut ambient_sides = 0;
        for side in connects {
            match self.neighbor(side) {
                Some(Neighbor::Ambient) => ambient_sides += 1,
                Some(_) => {}
                None => {
                    return Err(Error::schema(ctx(&format!("neighbor `{side}` is not a room-air element, `{AMBIENT}` or `{ADIABATIC}`"))))
                }
            }
        }
        if connects[0] == connects[1] && connects[0] != ADIABATIC {
            return Err(Error::schema(ctx("both sides connect the same node")));
        }
        if ambient_sides == 2 {
            return Err(Error::schema(ctx("at most one side may be AMBIENT")));
        }
        let area = e.area.ok_or_else(|| Error::schema(ctx("`area` is required")))?;
        positive(area, || ctx("area"))?;
        if e.layers.is_empty() {
            return Err(Error::schema(ctx("at least one layer is required")));
        }
        for (i, l) in e.layers.iter().enumerate() {
            positive(l.thickness, || ctx(&format!("layers[{i}].thickness")))?;
            positive(l.conductivity, || ctx(&format!("layers[{i}].conductivity")))?;
            positive(l.density, || ctx(&format!("layers[{i}].density")))?;
            positive(l.specific_heat, || ctx(&format!("layers[{i}].specific_heat")))?;
        }
        match (&e.hull, ambient_sides) {
            (None, 1) => return Err(Error::schema(ctx("an AMBIENT side requires `hull` data"))),
            (Some(_), 0) => return Err(Error::schema(ctx("`hull` data requires an AMBIENT side"))),
            (Some(h), _) => {
                if !(h.a_ew >= 0.0 && h.a_win >= 0.0 && h.a_ew + h.a_win > 0.0) {
                    return Err(Error::schema(ctx("hull areas must be >= 0 and not both zero")));
                }
                if h.a_win > area || h.a_ew > area {
                    return Err(Error::schema(ctx("hull areas exceed the face area")));
                }
                if h.a_win > 0.0 && e.kind != ElementKind::WindowBearingWall {
                    return Err(Error::schema(ctx("only window-bearing walls carry windows")));
                }
            }
            (None, _) => {}
        }
        Ok(())
    }
}

fn unique<'a>(ids: impl Iterator<Item = &'a str>, what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::schema(format!("duplicate {what} id `{id}`")));
        }
    }
    Ok(())
}

fn positive(value: f64, what: impl FnOnce() -> String) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::schema(format!("{} must be strictly positive (got {value})", what())))
    }
}

/// Point a validation error at the line where the offending id first occurs.
fn attach_line(err: Error, text: &str) -> Error {
    let Error::Schema { message, line: None, column } = err else {
        return err;
    };
    let line = message
        .split('`')
        .nth(1)
        .map(|id| format!("\"{id}\""))
        .and_then(|needle| text.lines().position(|l| l.contains(&needle)))
        .map(|i| i + 1);
    Error::Schema { message, line, column }
}

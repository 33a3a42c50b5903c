//! Tunable physical parameters and their box constraints.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Number of building-wide parameters preceding the per-zone background gains.
pub const PHYSICAL_COUNT: usize = 7;

/// Name, description and unit of the building-wide parameters, in vector order.
pub const PHYSICAL: [(&str, &str, &str); PHYSICAL_COUNT] = [
    ("gamma_EW", "exterior wall convection coefficient", "W/(m2K)"),
    ("gamma_IW", "interior wall convection coefficient", "W/(m2K)"),
    ("gamma_floor", "floor convection coefficient", "W/(m2K)"),
    ("gamma_ceil", "ceiling convection coefficient", "W/(m2K)"),
    ("gamma_absorp", "exterior wall solar absorption coefficient", "-"),
    ("gamma_winSolAbs", "window solar absorption coefficient", "-"),
    ("U_win", "window heat transmission coefficient", "W/(m2K)"),
];

/// Physical parameters of the hull, convection and internal-gains submodels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterVector {
    pub gamma_ew: f64,
    pub gamma_iw: f64,
    pub gamma_floor: f64,
    pub gamma_ceil: f64,
    pub gamma_absorp: f64,
    pub gamma_win_sol_abs: f64,
    pub u_win: f64,
    /// Background internal gain per zone, W/m², in building zone order.
    pub c_ig: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterInfo {
    pub name: String,
    pub description: String,
    pub unit: String,
}

impl ParameterVector {
    pub fn len(&self) -> usize {
        PHYSICAL_COUNT + self.c_ig.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn zones(&self) -> usize {
        self.c_ig.len()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v =
            vec![self.gamma_ew, self.gamma_iw, self.gamma_floor, self.gamma_ceil, self.gamma_absorp, self.gamma_win_sol_abs, self.u_win];
        v.extend_from_slice(&self.c_ig);
        v
    }

    pub fn from_slice(values: &[f64]) -> Result<Self> {
        if values.len() <= PHYSICAL_COUNT {
            return Err(Error::Parameters(format!("expected more than {PHYSICAL_COUNT} entries, got {}", values.len())));
        }
        Ok(ParameterVector {
            gamma_ew: values[0],
            gamma_iw: values[1],
            gamma_floor: values[2],
            gamma_ceil: values[3],
            gamma_absorp: values[4],
            gamma_win_sol_abs: values[5],
            u_win: values[6],
            c_ig: values[PHYSICAL_COUNT..].to_vec(),
        })
    }

    /// Names in vector order; background gains are suffixed with the zone id.
    pub fn info(zone_ids: &[String]) -> Vec<ParameterInfo> {
        PHYSICAL
            .iter()
            .map(|(n, d, u)| ParameterInfo { name: n.to_string(), description: d.to_string(), unit: u.to_string() })
            .chain(zone_ids.iter().map(|z| ParameterInfo {
                name: format!("c_IG,{z}"),
                description: format!("background heat gain in zone {z}"),
                unit: "W/m2".to_string(),
            }))
            .collect()
    }

    /// Checks positivity of the coefficients (background gains may be zero)
    /// and the unit-interval constraint on the absorption coefficients.
    pub fn validate(&self, zones: usize) -> Result<()> {
        if self.c_ig.len() != zones {
            return Err(Error::Parameters(format!("{} background gains for {zones} zones", self.c_ig.len())));
        }
        for (i, v) in self.to_vec().into_iter().enumerate() {
            if !(v.is_finite() && v > 0.0) && !(i >= PHYSICAL_COUNT && v == 0.0) {
                let bound = if i < PHYSICAL_COUNT { "> 0" } else { ">= 0" };
                return Err(Error::Parameters(format!("entry {i} must be {bound} (got {v})")));
            }
        }
        if self.gamma_absorp > 1.0 || self.gamma_win_sol_abs > 1.0 {
            return Err(Error::Parameters("solar absorption coefficients must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

/// Box constraints, element-wise in [`ParameterVector::to_vec`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParameterBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl ParameterBounds {
    /// Physically plausible default box for a building with `zones` zones.
    pub fn default_for(zones: usize) -> Self {
        let mut lower = vec![0.1, 0.1, 0.1, 0.1, 1e-4, 1e-4, 0.01];
        let mut upper = vec![100.0, 200.0, 200.0, 200.0, 1.0, 1.0, 10.0];
        lower.extend(std::iter::repeat_n(1e-3, zones));
        upper.extend(std::iter::repeat_n(100.0, zones));
        ParameterBounds { lower, upper }
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    /// A finite, non-empty box of any dimension.
    pub fn check_box(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() || self.lower.is_empty() {
            return Err(Error::Parameters("bounds have inconsistent lengths".into()));
        }
        for (i, (&lo, &hi)) in self.lower.iter().zip(&self.upper).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && hi >= lo) {
                return Err(Error::Parameters(format!("bound {i}: need finite lower <= upper")));
            }
        }
        Ok(())
    }

    /// A box for the physical parameter vector: positive, absorptions <= 1.
    pub fn validate(&self) -> Result<()> {
        self.check_box()?;
        if self.lower.len() <= PHYSICAL_COUNT {
            return Err(Error::Parameters("bounds have inconsistent lengths".into()));
        }
        for (i, &lo) in self.lower.iter().enumerate() {
            if lo <= 0.0 {
                return Err(Error::Parameters(format!("bound {i}: lower bound must be > 0")));
            }
        }
        if self.upper[4] > 1.0 || self.upper[5] > 1.0 {
            return Err(Error::Parameters("absorption coefficients are bounded above by 1".into()));
        }
        Ok(())
    }

    pub fn contains(&self, values: &[f64]) -> bool {
        values.len() == self.len() && values.iter().zip(self.lower.iter().zip(&self.upper)).all(|(v, (lo, hi))| v >= lo && v <= hi)
    }

    pub fn clamp(&self, values: &mut [f64]) {
        for (v, (lo, hi)) in values.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *v = v.clamp(*lo, *hi);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> ParameterVector {
        ParameterVector {
            gamma_ew: 10.5,
            gamma_iw: 29.4,
            gamma_floor: 51.5,
            gamma_ceil: 44.3,
            gamma_absorp: 0.75,
            gamma_win_sol_abs: 0.03,
            u_win: 0.63,
            c_ig: vec![0.3, 8.0, 18.8, 8.0, 11.0, 8.0],
        }
    }

    #[test]
    fn six_zone_vector_has_thirteen_entries() {
        let p = sample();
        assert_eq!(p.len(), 13);
        assert_eq!(ParameterVector::from_slice(&p.to_vec()).unwrap(), p);
        let zones: Vec<String> = ["NW", "W", "S", "E", "NE", "C"].iter().map(|s| s.to_string()).collect();
        let info = ParameterVector::info(&zones);
        assert_eq!(info.len(), 13);
        assert_eq!(info[12].name, "c_IG,C");
    }

    #[test]
    fn validation_rejects_out_of_range() {
        let mut p = sample();
        assert!(p.validate(6).is_ok());
        p.gamma_absorp = 1.2;
        assert!(p.validate(6).is_err());
        let mut p = sample();
        p.c_ig[0] = -1.0;
        assert!(p.validate(6).is_err());
        p.c_ig[0] = 0.0;
        assert!(p.validate(6).is_ok());
        assert!(sample().validate(5).is_err());
    }

    #[test]
    fn default_bounds_contain_reference_values() {
        let b = ParameterBounds::default_for(6);
        b.validate().unwrap();
        assert!(b.contains(&sample().to_vec()));
        let mut v = vec![-1.0; 13];
        b.clamp(&mut v);
        assert!(b.contains(&v));
    }
}

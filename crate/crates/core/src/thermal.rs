//! Two-node (building mass, indoor air) hourly heating model.
//!
//! The simple hourly resistance-capacitance method is rearranged into an
//! affine recursion
//!
//! ```text
//! [T_m', T_air'] = κ · [1, T_m, T_e, φ, h]ᵀ
//! ```
//!
//! where `κ` is a 2×5 coefficient matrix derived once from the building
//! parameters. Heating `h` is expressed in kWh per step and solar gains `φ`
//! in W.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Building envelope and ventilation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BuildingParams {
    /// Floor area, m².
    pub floor_area: f64,
    /// Room height, m.
    pub room_height: f64,
    /// Area of a single window, m².
    pub window_area: f64,
    /// Number of windows; the wall area excludes all of them.
    pub window_count: f64,
    /// Door area, m².
    pub door_area: f64,
    pub u_ground: f64,
    pub u_roof: f64,
    pub u_wall: f64,
    pub u_window: f64,
    /// Wind shielding coefficient.
    pub shielding: f64,
    /// Minimum hygiene air exchange rate, h⁻¹.
    pub n_min: f64,
    /// Air exchange rate at 50 Pa, h⁻¹.
    pub n_50: f64,
    /// Fraction of the floor that is a party floor.
    pub party_fraction: f64,
    pub height_correction: f64,
    /// Ratio of internal surface area to floor area.
    pub surface_ratio: f64,
    /// Air to surface node transfer coefficient, W·m⁻²·K⁻¹.
    pub h_is: f64,
    /// Mass to surface node transfer coefficient, W·m⁻²·K⁻¹.
    pub h_ms: f64,
    /// Internal heat capacity per floor area for a medium building, J·K⁻¹·m⁻².
    pub heat_capacity_per_area: f64,
    /// Effective mass area per floor area.
    pub mass_area_ratio: f64,
    /// Step length, s.
    pub step_seconds: f64,
}

impl Default for BuildingParams {
    fn default() -> Self {
        BuildingParams {
            floor_area: 76.0,
            room_height: 2.4,
            window_area: 1.4 * 1.4,
            window_count: 8.0,
            door_area: 1.4 * 2.0,
            u_ground: 1.0,
            u_roof: 1.0,
            u_wall: 1.5,
            u_window: 4.3,
            shielding: 0.03,
            n_min: 0.5,
            n_50: 6.0,
            party_fraction: 0.5,
            height_correction: 1.0,
            surface_ratio: 4.5,
            h_is: 3.45,
            h_ms: 9.1,
            heat_capacity_per_area: 165_000.0,
            mass_area_ratio: 2.5,
            step_seconds: 3600.0,
        }
    }
}

impl BuildingParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("floor_area", self.floor_area),
            ("room_height", self.room_height),
            ("window_area", self.window_area),
            ("door_area", self.door_area),
            ("u_ground", self.u_ground),
            ("u_roof", self.u_roof),
            ("u_wall", self.u_wall),
            ("u_window", self.u_window),
            ("shielding", self.shielding),
            ("n_min", self.n_min),
            ("n_50", self.n_50),
            ("height_correction", self.height_correction),
            ("surface_ratio", self.surface_ratio),
            ("h_is", self.h_is),
            ("h_ms", self.h_ms),
            ("heat_capacity_per_area", self.heat_capacity_per_area),
            ("mass_area_ratio", self.mass_area_ratio),
            ("step_seconds", self.step_seconds),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!(
                    "building parameter {name} must be strictly positive, got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.party_fraction) {
            return Err(Error::Config(format!(
                "party_fraction must lie in [0, 1], got {}",
                self.party_fraction
            )));
        }
        if self.window_count < 0.0 {
            return Err(Error::Config("window_count must be non-negative".into()));
        }
        Ok(())
    }
}

/// Effective window U-value with curtains.
pub fn effective_window_u(u_window: f64) -> f64 {
    1.0 / (1.0 / u_window + 0.04)
}

/// The 2×5 recursion matrix. Rows are `(a, b, c, d, e)` for the mass and air
/// temperatures respectively, multiplying `(1, T_m, T_e, φ, h)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalCoefficients {
    pub mass: [f64; 5],
    pub air: [f64; 5],
}

impl ThermalCoefficients {
    pub fn rows(&self) -> [[f64; 5]; 2] {
        [self.mass, self.air]
    }

    pub fn validate(&self) -> Result<()> {
        let b_t = self.mass[1];
        if !(b_t > 0.0 && b_t < 1.0) {
            return Err(Error::Invalid(format!("b_T must lie in (0, 1), got {b_t}")));
        }
        if !(self.mass[4] > 0.0 && self.air[4] > 0.0) {
            return Err(Error::Invalid(
                "heating coefficients e_T and e_air must be positive".into(),
            ));
        }
        if self.rows().iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Invalid("non-finite thermal coefficient".into()));
        }
        Ok(())
    }
}

/// Intermediate conductances, kept for inspection and tests.
#[derive(Debug, Clone, Copy)]
pub struct Conductances {
    pub mass_area: f64,
    pub heat_capacity: f64,
    pub total_area: f64,
    pub h_tr_is: f64,
    pub h_tr_ms: f64,
    pub wall_area: f64,
    pub h_tr_op: f64,
    pub h_tr_em: f64,
    pub h_tr_window: f64,
    pub h_ve: f64,
    pub h_tr_1: f64,
    pub h_tr_2: f64,
    pub h_tr_3: f64,
}

pub fn conductances(p: &BuildingParams) -> Result<Conductances> {
    p.validate()?;
    let mass_area = p.mass_area_ratio * p.floor_area;
    let heat_capacity = p.heat_capacity_per_area * p.floor_area;
    let total_area = p.surface_ratio * p.floor_area;
    let h_tr_is = p.h_is * total_area;
    let h_tr_ms = p.h_ms * mass_area;

    let wall_area = 4.0 * p.floor_area.sqrt() * p.room_height
        - p.window_count * p.window_area
        - p.door_area;
    if wall_area <= 0.0 {
        return Err(Error::DegenerateBuilding(format!(
            "wall area {wall_area:.3} m² is not positive"
        )));
    }
    let h_tr_wall = wall_area * p.u_wall;
    let h_tr_roof = p.floor_area * p.u_roof;
    let h_tr_floor = p.floor_area * (1.0 - p.party_fraction) * p.u_ground;
    let h_tr_op = h_tr_wall + h_tr_roof + h_tr_floor;
    if h_tr_op >= h_tr_ms {
        return Err(Error::DegenerateBuilding(format!(
            "opaque conductance {h_tr_op:.3} W/K must be below mass coupling {h_tr_ms:.3} W/K"
        )));
    }
    let h_tr_em = 1.0 / (1.0 / h_tr_op - 1.0 / h_tr_ms);
    let h_tr_window =
        (p.window_count * p.window_area + p.door_area) * effective_window_u(p.u_window);

    let volume = p.floor_area * p.room_height;
    let v_min = p.n_min * volume;
    let v_inf = 2.0 * volume * p.n_50 * p.shielding * p.height_correction;
    let h_ve = 0.34 * v_min.max(v_inf);

    let h_tr_1 = 1.0 / (1.0 / h_ve + 1.0 / h_tr_is);
    let h_tr_2 = h_tr_1 + h_tr_window;
    let h_tr_3 = 1.0 / (1.0 / h_tr_2 + 1.0 / h_tr_ms);

    let c = Conductances {
        mass_area,
        heat_capacity,
        total_area,
        h_tr_is,
        h_tr_ms,
        wall_area,
        h_tr_op,
        h_tr_em,
        h_tr_window,
        h_ve,
        h_tr_1,
        h_tr_2,
        h_tr_3,
    };
    for (name, v) in [
        ("H_tr,em", c.h_tr_em),
        ("H_ve", c.h_ve),
        ("H_tr,1", c.h_tr_1),
        ("H_tr,2", c.h_tr_2),
        ("H_tr,3", c.h_tr_3),
    ] {
        if !(v.is_finite() && v > 0.0) {
            return Err(Error::DegenerateBuilding(format!("{name} = {v}")));
        }
    }
    Ok(c)
}

/// Derives κ. `internal_gain_rate` is the internal heat gain per floor area
/// (appliances plus occupants), W·m⁻²; it ends up in the constant column.
///
/// The heating column is scaled so that `h` is energy per step in kWh:
/// `Φ_HC [W] = h · 3.6e6 / τ`.
pub fn derive_kappa(p: &BuildingParams, internal_gain_rate: f64) -> Result<ThermalCoefficients> {
    let c = conductances(p)?;
    let tau = p.step_seconds;
    let phi_int = internal_gain_rate * p.floor_area;
    let phi_ia = 0.5 * phi_int;
    let mass_share = c.mass_area / c.total_area;
    let h32 = c.h_tr_3 / c.h_tr_2;

    let a = c.heat_capacity / tau + 0.5 * (c.h_tr_3 + c.h_tr_em);
    let b = 1.0 - mass_share - c.h_tr_window / (9.1 * c.total_area);
    let cc = b * phi_int / 2.0;
    let d = mass_share * phi_int / 2.0 + h32 * (cc + c.h_tr_1 * phi_ia / c.h_ve);
    let e = c.h_tr_em + h32 * (c.h_tr_window + c.h_tr_1);
    let f = c.h_tr_ms + c.h_tr_window + c.h_tr_1;

    let a_t = d / a;
    let b_t = (c.heat_capacity / tau - 0.5 * (c.h_tr_3 + c.h_tr_em)) / a;
    let c_t = e / a;
    let d_t = (mass_share + h32 * b) / a;
    let e_t = h32 * c.h_tr_1 / (c.h_ve * a);

    let g = (c.h_tr_ms * a_t / 2.0 + cc + c.h_tr_1 * phi_ia / c.h_ve) / f;
    let h = c.h_tr_ms / (2.0 * f) * (1.0 + b_t);
    let i = (c.h_tr_ms * c_t / 2.0 + c.h_tr_window + c.h_tr_1) / f;
    let j = (c.h_tr_ms * d_t / 2.0 + b) / f;
    let k = (c.h_tr_ms * e_t / 2.0 + c.h_tr_1 / c.h_ve) / f;

    let den = c.h_tr_is + c.h_ve;
    let a_air = (c.h_tr_is * g + phi_ia) / den;
    let b_air = c.h_tr_is * h / den;
    let c_air = (c.h_tr_is * i + c.h_ve) / den;
    let d_air = c.h_tr_is * j / den;
    let e_air = (c.h_tr_is * k + 1.0) / den;

    // W per (kWh per step)
    let heat_scale = 3.6e6 / tau;
    let kappa = ThermalCoefficients {
        mass: [a_t, b_t, c_t, d_t, e_t * heat_scale],
        air: [a_air, b_air, c_air, d_air, e_air * heat_scale],
    };
    kappa
        .validate()
        .map_err(|e| Error::DegenerateBuilding(e.to_string()))?;
    Ok(kappa)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThermalState {
    pub t_mass: f64,
    pub t_air: f64,
}

impl ThermalState {
    pub fn uniform(t: f64) -> Self {
        ThermalState {
            t_mass: t,
            t_air: t,
        }
    }
}

fn affine(row: &[f64; 5], t_mass: f64, t_ext: f64, solar: f64, heat: f64) -> f64 {
    row[0] + row[1] * t_mass + row[2] * t_ext + row[3] * solar + row[4] * heat
}

pub fn step_thermal(
    k: &ThermalCoefficients,
    state: ThermalState,
    t_ext: f64,
    solar: f64,
    heat: f64,
) -> ThermalState {
    ThermalState {
        t_mass: affine(&k.mass, state.t_mass, t_ext, solar, heat),
        t_air: affine(&k.air, state.t_mass, t_ext, solar, heat),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatingBounds {
    pub h_min: f64,
    pub h_max: f64,
    /// False when the comfort bounds cannot both be met this step.
    pub feasible: bool,
}

/// Heating range keeping the next air temperature within `[t_lo, t_hi]`.
pub fn heating_bounds(
    k: &ThermalCoefficients,
    state: ThermalState,
    t_ext: f64,
    solar: f64,
    t_lo: f64,
    t_hi: f64,
) -> HeatingBounds {
    let free_air = affine(&k.air, state.t_mass, t_ext, solar, 0.0);
    let e_air = k.air[4];
    let h_min = ((t_lo - free_air) / e_air).max(0.0);
    let upper = (t_hi - free_air) / e_air;
    let feasible = upper >= h_min - 1e-12;
    HeatingBounds {
        h_min,
        h_max: upper.max(h_min),
        feasible,
    }
}

/// Comfort band applying to the temperature reached at the end of each step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComfortBand {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Setpoint schedule: `target` during the listed hour windows, `setback`
/// otherwise, with a symmetric tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComfortSchedule {
    pub target: f64,
    pub setback: f64,
    pub tolerance: f64,
    /// Half-open hour windows `[start, end)` at the comfort target.
    pub windows: Vec<(usize, usize)>,
}

impl Default for ComfortSchedule {
    fn default() -> Self {
        ComfortSchedule {
            target: 20.0,
            setback: 16.0,
            tolerance: 3.0,
            windows: vec![(7, 10), (17, 22)],
        }
    }
}

impl ComfortSchedule {
    pub fn setpoint(&self, hour: usize) -> f64 {
        let h = hour % 24;
        if self.windows.iter().any(|&(a, b)| h >= a && h < b) {
            self.target
        } else {
            self.setback
        }
    }

    /// Band for each step `t` of a horizon, applied to the temperature at the
    /// end of the step (hour `t + 1`).
    pub fn band(&self, horizon: usize) -> ComfortBand {
        let sp: Vec<f64> = (0..horizon).map(|t| self.setpoint(t + 1)).collect();
        ComfortBand {
            lower: sp.iter().map(|s| s - self.tolerance).collect(),
            upper: sp.iter().map(|s| s + self.tolerance).collect(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tolerance >= 0.0) {
            return Err(Error::Config("comfort tolerance must be non-negative".into()));
        }
        for &(a, b) in &self.windows {
            if a >= b || b > 24 {
                return Err(Error::Config(format!("invalid comfort window ({a}, {b})")));
            }
        }
        Ok(())
    }
}

/// Largest mass temperature at the start of each step `k` (index `0..=T`)
/// from which the rest of the day can still respect the upper comfort bound
/// when heating only as much as the lower bound requires. Heating power is
/// unbounded, so lower bounds are always reachable; upper bounds are the
/// binding look-ahead. `ceil[T]` is `+∞`.
pub fn mass_ceilings(
    k: &ThermalCoefficients,
    t_ext: &[f64],
    solar: &[f64],
    band: &ComfortBand,
) -> Vec<f64> {
    let horizon = t_ext.len();
    let mut ceil = vec![f64::INFINITY; horizon + 1];
    let (b_t, e_t) = (k.mass[1], k.mass[4]);
    let (b_a, e_a) = (k.air[1], k.air[4]);
    for step in (0..horizon).rev() {
        let (te, phi) = (t_ext[step], solar[step]);
        let air0 = affine(&k.air, 0.0, te, phi, 0.0);
        let mass0 = affine(&k.mass, 0.0, te, phi, 0.0);
        // Air upper bound with no heating; heating only happens when the
        // free-floating air would fall below the lower bound.
        let air_cap = (band.upper[step] - air0) / b_a;
        let next = ceil[step + 1];
        let mass_cap = if next.is_infinite() {
            f64::INFINITY
        } else {
            // Minimum-heating next mass temperature is piecewise affine and
            // increasing in T_m with a kink where free air meets the lower bound.
            let kink = (band.lower[step] - air0) / b_a;
            let upper_piece = (next - mass0) / b_t;
            if upper_piece >= kink {
                upper_piece
            } else {
                let slope = b_t - e_t * b_a / e_a;
                let offset = mass0 + e_t * (band.lower[step] - air0) / e_a;
                if slope > 0.0 {
                    ((next - offset) / slope).min(kink)
                } else if offset + slope * kink <= next {
                    kink
                } else {
                    f64::NEG_INFINITY
                }
            }
        };
        ceil[step] = air_cap.min(mass_cap);
    }
    ceil
}

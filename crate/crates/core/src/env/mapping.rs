use super::params::HouseholdParams;
use super::plan::DayPlan;
use super::state::{Decisions, HouseholdState};
use crate::profiles::DayProfile;
use crate::thermal::heating_bounds;
use crate::{Error, Result};

const TOL: f64 = 1e-9;

/// Everything `map_action` needs besides the state.
#[derive(Debug, Clone, Copy)]
pub struct ActionContext<'a> {
    pub params: &'a HouseholdParams,
    pub profile: &'a DayProfile,
    pub plan: &'a DayPlan,
    pub agent: usize,
}

/// Obligations and the flexibility left over at one step.
#[derive(Debug, Clone, PartialEq)]
pub struct Flexibility {
    /// Household load that must be consumed now, kWh.
    pub fixed: f64,
    pub h_min: f64,
    pub h_max: f64,
    /// Household load that may still be deferred.
    pub deferrable: f64,
    pub pv: f64,
    pub dis_min: f64,
    pub dis_max: f64,
    pub ch_min: f64,
    pub ch_max: f64,
    /// Spans of the five regimes in kWh of import.
    pub spans: [f64; 5],
}

impl Flexibility {
    pub fn total_span(&self) -> f64 {
        self.spans.iter().sum()
    }

    /// ψ at the start of each regime and 1.
    pub fn breakpoints(&self) -> [f64; 6] {
        let s = self.total_span();
        let mut out = [0.0; 6];
        let mut acc = 0.0;
        for (i, span) in self.spans.iter().enumerate() {
            out[i] = if s > 0.0 { acc / s } else { 0.0 };
            acc += span;
        }
        out[5] = 1.0;
        out
    }
}

/// Computes obligations, battery range and regime spans for the state.
pub fn flexibility(state: &HouseholdState, ctx: &ActionContext<'_>) -> Result<Flexibility> {
    let t = state.t;
    let p = ctx.params;
    let b = &p.battery;
    let prof = ctx.profile;
    let plan = ctx.plan;
    if t >= prof.horizon() {
        return Err(Error::Invalid(format!("step {t} past the end of the day")));
    }

    let mu = if prof.ev_at_home[t] { 1.0 } else { 0.0 };
    let d_ev = prof.ev_demand[t];
    let e = state.energy;
    let lo = (plan.floors[t + 1] + d_ev - e).max(-mu * b.capacity);
    let hi = (plan.ceilings[t + 1] + d_ev - e).min(mu * b.max_charge);
    if lo > hi + TOL {
        return Err(Error::InfeasibleEvSchedule {
            agent: ctx.agent,
            detail: format!("step {t}: battery at {e:.3} kWh cannot reach [{:.3}, {:.3}]", plan.floors[t + 1], plan.ceilings[t + 1]),
        });
    }
    let hi = hi.max(lo);
    let (dis_min, dis_max) = ((-hi).max(0.0), (-lo).max(0.0));
    let (ch_min, ch_max) = (lo.max(0.0), hi.max(0.0));

    let k = &p.kappa;
    let (te, phi) = (prof.external_temp[t], prof.solar_gain[t]);
    let hb = heating_bounds(k, state.thermal, te, phi, plan.band.lower[t], plan.band.upper[t]);
    if !hb.feasible {
        return Err(Error::InfeasibleComfort {
            agent: ctx.agent,
            detail: format!("step {t}: comfort band cannot be met from {:?}", state.thermal),
        });
    }
    let ceil = plan.mass_ceilings[t + 1];
    let mut h_max = hb.h_max;
    if ceil.is_finite() {
        let mass_free = k.mass[0] + k.mass[1] * state.thermal.t_mass + k.mass[2] * te + k.mass[3] * phi;
        h_max = h_max.min((ceil - mass_free) / k.mass[4]);
    }
    if h_max < hb.h_min - 1e-7 {
        return Err(Error::InfeasibleComfort {
            agent: ctx.agent,
            detail: format!("step {t}: minimum heating overheats the building mass"),
        });
    }
    let h_min = hb.h_min;
    let h_max = h_max.max(h_min);

    let fixed = state.queue.due(t);
    let deferrable = state.queue.deferrable(t);
    let pv = prof.pv_generation[t];
    let (eta_ch, eta_dis) = (b.eta_ch, b.eta_dis);

    let residual = fixed + h_min + ch_min / eta_ch - pv;
    let cover = (residual.max(0.0) / eta_dis).clamp(dis_min, dis_max);
    let flex_total = deferrable + (h_max - h_min);
    let surplus = (pv - fixed - h_min - flex_total - ch_min / eta_ch).max(0.0);
    let store = (eta_ch * surplus).min(ch_max - ch_min);
    let spans = [
        eta_dis * (dis_max - cover),
        eta_dis * (cover - dis_min),
        flex_total,
        store / eta_ch,
        (ch_max - ch_min - store) / eta_ch,
    ];
    Ok(Flexibility {
        fixed,
        h_min,
        h_max,
        deferrable,
        pv,
        dis_min,
        dis_max,
        ch_min,
        ch_max,
        spans,
    })
}

/// Maps the flexibility action `ψ ∈ [0, 1]` to decisions.
///
/// Obligations (due loads, minimum heating, battery reservation) are met
/// first. The remaining flexibility is a path of five regimes along which
/// the import grows linearly in ψ: export stored energy, cover the residual
/// from storage then from imports, consume deferrable loads (earliest
/// deadline first, then extra heating), store PV surplus, and charge from
/// the grid. `ψ = 1` is the passive behaviour.
pub fn map_action(psi: f64, state: &HouseholdState, ctx: &ActionContext<'_>) -> Result<Decisions> {
    if !(0.0..=1.0).contains(&psi) {
        return Err(Error::Invalid(format!("ψ = {psi} outside [0, 1]")));
    }
    let f = flexibility(state, ctx)?;
    Ok(decisions_at(psi, &f, state, ctx))
}

pub(crate) fn decisions_at(psi: f64, f: &Flexibility, state: &HouseholdState, ctx: &ActionContext<'_>) -> Decisions {
    let b = &ctx.params.battery;
    let (eta_ch, eta_dis) = (b.eta_ch, b.eta_dis);
    let (mut b_out, mut b_in, flex_used);
    if psi >= 1.0 {
        b_out = f.dis_min;
        b_in = f.ch_max;
        flex_used = f.spans[2];
    } else {
        let mut x = psi * f.total_span();
        let mut take = |span: f64| {
            let u = x.min(span).max(0.0);
            x -= u;
            u
        };
        b_out = f.dis_max - take(f.spans[0]) / eta_dis;
        b_out -= take(f.spans[1]) / eta_dis;
        b_out = b_out.max(f.dis_min);
        flex_used = take(f.spans[2]);
        b_in = f.ch_min + eta_ch * take(f.spans[3]);
        b_in += eta_ch * take(f.spans[4]);
        b_in = b_in.min(f.ch_max);
    }
    if b_in > 0.0 && b_out > 0.0 {
        // only reachable through rounding when both ranges are empty
        let net = b_in - b_out;
        b_in = net.max(0.0);
        b_out = (-net).max(0.0);
    }

    let t = state.t;
    let mut remaining = flex_used;
    let flex_served: Vec<f64> = state
        .queue
        .entries
        .iter()
        .map(|e| {
            if e.deadline <= t {
                e.remaining
            } else {
                let u = remaining.min(e.remaining);
                remaining -= u;
                u
            }
        })
        .collect();
    let loads_flex = (flex_used - remaining).max(0.0);
    let heat_flex = remaining.min(f.h_max - f.h_min).max(0.0);
    let c = f.fixed + loads_flex;
    let h = f.h_min + heat_flex;
    let p = c + h + b_in / eta_ch - eta_dis * b_out - f.pv;
    Decisions {
        b_in,
        b_out,
        h,
        c,
        p,
        flex_served,
    }
}

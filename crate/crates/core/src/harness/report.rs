use super::run::AggregateRow;

/// Units of a cost breakdown row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShareUnit {
    /// Signed percentage of the net saving.
    Percent,
    /// Absolute £ per agent-hour, used when the net saving is zero.
    Pounds,
}

impl ShareUnit {
    pub fn as_str(self) -> &'static str {
        match self {
            ShareUnit::Percent => "percent",
            ShareUnit::Pounds => "gbp_per_agent_hour",
        }
    }
}

/// Signed shares of `components` (pence) in their sum. Negative shares mark
/// components that cost more than the baseline.
pub fn component_shares(components: &[f64]) -> (ShareUnit, Vec<f64>) {
    let net: f64 = components.iter().sum();
    if net.abs() < 1e-12 {
        (ShareUnit::Pounds, components.iter().map(|c| c / 100.0).collect())
    } else {
        (ShareUnit::Percent, components.iter().map(|c| 100.0 * c / net).collect())
    }
}

/// Where the savings of one strategy come from.
#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownRow {
    pub strategy: String,
    pub n_agents: usize,
    pub unit: ShareUnit,
    pub battery: f64,
    pub distribution: f64,
    /// Grid cost excluding carbon.
    pub energy: f64,
    pub emissions: f64,
}

pub const BREAKDOWN_COMPONENTS: [&str; 4] = ["battery", "distribution", "energy", "emissions"];

pub fn cost_breakdown_report(aggregates: &[AggregateRow]) -> Vec<BreakdownRow> {
    aggregates
        .iter()
        .map(|a| {
            let d = &a.deltas;
            let (unit, s) = component_shares(&[d.storage, d.distribution, d.grid - d.emissions, d.emissions]);
            BreakdownRow {
                strategy: a.strategy.clone(),
                n_agents: a.n_agents,
                unit,
                battery: s[0],
                distribution: s[1],
                energy: s[2],
                emissions: s[3],
            }
        })
        .collect()
}

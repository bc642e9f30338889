use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use log::warn;
use serde::{Deserialize, Serialize};

use super::agent::{Population, Status};
use super::spa::YearMonth;
use crate::data_io::{Corridor, Direction, FlowRow, FlowTable, Origin};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ScenarioKind {
    StatusQuo,
    SoftBrexit,
    HardBrexit,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 3] = [
        ScenarioKind::StatusQuo,
        ScenarioKind::SoftBrexit,
        ScenarioKind::HardBrexit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::StatusQuo => "status_quo",
            ScenarioKind::SoftBrexit => "soft_brexit",
            ScenarioKind::HardBrexit => "hard_brexit",
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ScenarioKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown scenario {s:?}")))
    }
}

/// Where post-Brexit EU flow levels come from.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevelRule {
    /// The flow table's own levels for the simulated year.
    Trend,
    /// Mean of the levels recorded for these years; each must be present.
    MeanOfYears(Vec<i32>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MigrationScenario {
    pub kind: ScenarioKind,
    pub brexit: YearMonth,
    /// Share of pre-Brexit EU immigrants forced to leave.
    pub exodus_fraction: f64,
    pub exodus_duration_years: u32,
    /// Share of UK citizens abroad who return over the same window.
    pub repatriation_fraction: f64,
    pub eu_inflow: LevelRule,
    pub eu_outflow: LevelRule,
    /// Proportional cut to UK-citizen emigration.
    pub uk_outflow_reduction: f64,
}

impl MigrationScenario {
    pub fn status_quo() -> Self {
        Self {
            kind: ScenarioKind::StatusQuo,
            brexit: YearMonth::ym(2019, 3),
            exodus_fraction: 0.0,
            exodus_duration_years: 0,
            repatriation_fraction: 0.0,
            eu_inflow: LevelRule::Trend,
            eu_outflow: LevelRule::Trend,
            uk_outflow_reduction: 0.0,
        }
    }

    pub fn soft_brexit() -> Self {
        Self {
            kind: ScenarioKind::SoftBrexit,
            exodus_fraction: 0.1,
            exodus_duration_years: 2,
            repatriation_fraction: 0.1,
            eu_inflow: LevelRule::MeanOfYears(vec![2000, 2011]),
            eu_outflow: LevelRule::MeanOfYears(vec![2000, 2011]),
            uk_outflow_reduction: 0.8,
            ..Self::status_quo()
        }
    }

    pub fn hard_brexit() -> Self {
        Self {
            kind: ScenarioKind::HardBrexit,
            exodus_fraction: 0.7,
            exodus_duration_years: 2,
            repatriation_fraction: 0.8,
            eu_inflow: LevelRule::MeanOfYears(vec![2003]),
            eu_outflow: LevelRule::Trend,
            uk_outflow_reduction: 0.3,
            ..Self::status_quo()
        }
    }

    pub fn for_kind(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::StatusQuo => Self::status_quo(),
            ScenarioKind::SoftBrexit => Self::soft_brexit(),
            ScenarioKind::HardBrexit => Self::hard_brexit(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("exodus_fraction", self.exodus_fraction),
            ("repatriation_fraction", self.repatriation_fraction),
            ("uk_outflow_reduction", self.uk_outflow_reduction),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidConfig(format!("{name} = {v} outside [0, 1]")));
            }
        }
        Ok(())
    }

    fn window_months(&self) -> i64 {
        self.exodus_duration_years as i64 * 12
    }
}

/// Splits `quota` over `months` monthly steps by cumulative rounding, so the
/// parts differ by at most one and sum to `quota`.
pub fn apportion(quota: usize, months: usize) -> Vec<usize> {
    if months == 0 {
        return Vec::new();
    }
    // round(quota * i / months), half away from zero, in integers.
    let cum = |i: usize| (2 * quota * i + months) / (2 * months);
    (0..months).map(|i| cum(i + 1) - cum(i)).collect()
}

/// Counts per calendar year of a monthly schedule starting at `start`.
pub fn schedule_by_year(start: YearMonth, monthly: &[usize]) -> BTreeMap<i32, usize> {
    let mut out = BTreeMap::new();
    for (i, &n) in monthly.iter().enumerate() {
        *out.entry(start.add_months(i as i64).year()).or_insert(0) += n;
    }
    out
}

/// Flow levels and forced moves for one simulated year.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Adjustment {
    pub flows: Vec<FlowRow>,
    /// EU immigrants leaving under the exodus, in departure order.
    pub departures: Vec<u64>,
    /// UK citizens returning from abroad.
    pub returns: Vec<u64>,
    /// Exodus departures that could not be filled from the stock.
    pub shortfall: usize,
}

#[derive(Debug, Clone)]
struct Queue {
    order: Vec<u64>,
    cursor: usize,
    per_year: BTreeMap<i32, usize>,
}

impl Queue {
    fn new(order: Vec<u64>, fraction: f64, start: YearMonth, months: usize) -> Self {
        let quota = (fraction * order.len() as f64).round() as usize;
        Self {
            per_year: schedule_by_year(start, &apportion(quota, months)),
            order,
            cursor: 0,
        }
    }

    /// Next `n` agents still in `status`, skipping those who have since died
    /// or moved. Returns the ids and the unfilled remainder.
    fn take(&mut self, year: i32, pop: &Population, status: Status) -> (Vec<u64>, usize) {
        let want = self.per_year.get(&year).copied().unwrap_or(0);
        let mut out = Vec::with_capacity(want);
        while out.len() < want && self.cursor < self.order.len() {
            let id = self.order[self.cursor];
            self.cursor += 1;
            if pop.get(id).status == status {
                out.push(id);
            }
        }
        let short = want - out.len();
        (out, short)
    }
}

/// Applies a scenario's migration rules year by year.
///
/// The exodus list is fixed when the Brexit year is first seen: resident EU
/// immigrants at that moment, most recent arrival first, ties by id. Later
/// arrivals are never selected. Returns from abroad draw from UK citizens
/// abroad at the same moment, by id.
#[derive(Debug, Clone)]
pub struct BrexitAdjuster {
    scenario: MigrationScenario,
    exodus: Option<Queue>,
    repatriation: Option<Queue>,
}

impl BrexitAdjuster {
    pub fn new(scenario: MigrationScenario) -> Result<Self> {
        scenario.validate()?;
        Ok(Self {
            scenario,
            exodus: None,
            repatriation: None,
        })
    }

    pub fn scenario(&self) -> &MigrationScenario {
        &self.scenario
    }

    pub fn adjust(
        &mut self,
        flows: &FlowTable,
        year: i32,
        stock: &Population,
    ) -> Result<Adjustment> {
        let (_, base) = flows
            .levels_for(year)
            .ok_or_else(|| Error::InvalidTable("flow table is empty".into()))?;
        let sc = &self.scenario;
        if sc.kind == ScenarioKind::StatusQuo || year < sc.brexit.year() {
            return Ok(Adjustment {
                flows: base.to_vec(),
                ..Adjustment::default()
            });
        }
        let mut rows = Vec::with_capacity(base.len());
        for r in base {
            match (r.corridor, r.direction) {
                (Corridor::UkCitizens, Direction::Out) => rows.push(FlowRow {
                    count: r.count * (1.0 - sc.uk_outflow_reduction),
                    ..r.clone()
                }),
                (Corridor::Eu, _) => {}
                _ => rows.push(r.clone()),
            }
        }
        for (dir, rule) in [
            (Direction::In, &sc.eu_inflow),
            (Direction::Out, &sc.eu_outflow),
        ] {
            rows.extend(eu_levels(flows, base, year, dir, rule)?);
        }
        rows.sort_by_key(|r| (r.corridor, r.direction, r.sex, r.age_lo));

        if self.exodus.is_none() {
            let mut eu: Vec<_> = stock
                .residents()
                .filter(|a| a.origin == Origin::EuImmigrant)
                .map(|a| (a.arrival_year.unwrap_or(i32::MIN), a.id))
                .collect();
            eu.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
            let abroad: Vec<u64> = stock
                .agents()
                .iter()
                .filter(|a| a.status == Status::Abroad)
                .map(|a| a.id)
                .collect();
            let months = sc.window_months() as usize;
            self.exodus = Some(Queue::new(
                eu.into_iter().map(|e| e.1).collect(),
                sc.exodus_fraction,
                sc.brexit,
                months,
            ));
            self.repatriation = Some(Queue::new(
                abroad,
                sc.repatriation_fraction,
                sc.brexit,
                months,
            ));
        }
        let (departures, shortfall) =
            self.exodus
                .as_mut()
                .expect("set above")
                .take(year, stock, Status::Resident);
        if shortfall > 0 {
            warn!("{year}: exodus quota exceeds remaining EU stock by {shortfall}; clipped");
        }
        let (returns, short_returns) =
            self.repatriation
                .as_mut()
                .expect("set above")
                .take(year, stock, Status::Abroad);
        if short_returns > 0 {
            warn!(
                "{year}: repatriation quota exceeds UK citizens abroad by {short_returns}; clipped"
            );
        }
        Ok(Adjustment {
            flows: rows,
            departures,
            returns,
            shortfall,
        })
    }
}

/// Replacement EU rows for `direction` under `rule`.
fn eu_levels(
    flows: &FlowTable,
    base: &[FlowRow],
    year: i32,
    direction: Direction,
    rule: &LevelRule,
) -> Result<Vec<FlowRow>> {
    let pick = |rows: &[FlowRow]| -> Vec<FlowRow> {
        rows.iter()
            .filter(|r| r.corridor == Corridor::Eu && r.direction == direction)
            .cloned()
            .collect()
    };
    let years = match rule {
        LevelRule::Trend => return Ok(pick(base)),
        LevelRule::MeanOfYears(years) if years.is_empty() => {
            return Err(Error::InvalidConfig("level rule lists no years".into()))
        }
        LevelRule::MeanOfYears(years) => years,
    };
    let mut sets = Vec::with_capacity(years.len());
    for &y in years {
        let rows = flows.year_rows(y).ok_or_else(|| {
            Error::InvalidTable(format!(
                "scenario needs flow levels for {y}, absent from the table"
            ))
        })?;
        sets.push(pick(rows));
    }
    let mut out = sets[0].clone();
    for set in &sets[1..] {
        if set.len() != out.len()
            || set
                .iter()
                .zip(&out)
                .any(|(a, b)| (a.sex, a.age_lo, a.age_hi) != (b.sex, b.age_lo, b.age_hi))
        {
            return Err(Error::InvalidTable(format!(
                "EU {direction} bands differ between reference years {years:?}"
            )));
        }
        for (o, r) in out.iter_mut().zip(set) {
            o.count += r.count;
        }
    }
    for o in &mut out {
        o.count /= sets.len() as f64;
        o.year = year;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_io::{Origin, Sex};

    #[test]
    fn apportion_sums_and_spreads() {
        for quota in [0usize, 1, 7, 23, 24, 25, 100, 1234] {
            let parts = apportion(quota, 24);
            assert_eq!(parts.iter().sum::<usize>(), quota);
            let (lo, hi) = (parts.iter().min().unwrap(), parts.iter().max().unwrap());
            assert!(hi - lo <= 1, "{quota}: {parts:?}");
        }
        // One departure lands in the month where half the window has passed.
        let one = apportion(1, 24);
        assert_eq!(one.iter().position(|&n| n == 1), Some(11));
    }

    #[test]
    fn seven_over_the_window() {
        let by_year = schedule_by_year(YearMonth::ym(2019, 3), &apportion(7, 24));
        // Oracle: round(7i/24) at month boundaries Dec 2019 (i=10) and Dec 2020 (i=22).
        let r = |i: f64| (7.0 * i / 24.0_f64).round() as usize;
        assert_eq!(by_year[&2019], r(10.0));
        assert_eq!(by_year[&2020], r(22.0) - r(10.0));
        assert_eq!(by_year[&2021], 7 - r(22.0));
        assert_eq!(by_year.values().sum::<usize>(), 7);
    }

    fn flow(year: i32, corridor: Corridor, direction: Direction, count: f64) -> Vec<FlowRow> {
        Sex::BOTH
            .into_iter()
            .map(|sex| FlowRow {
                year,
                corridor,
                sex,
                age_lo: 0,
                age_hi: 100,
                direction,
                count,
            })
            .collect()
    }

    fn table() -> FlowTable {
        let mut rows = Vec::new();
        for (y, eu) in [(2000, 10.0), (2003, 4.0), (2011, 30.0), (2018, 50.0)] {
            for c in Corridor::ALL {
                for d in [Direction::In, Direction::Out] {
                    let v = if c == Corridor::Eu { eu } else { 100.0 };
                    rows.extend(flow(y, c, d, v));
                }
            }
        }
        FlowTable::new(100, rows).unwrap()
    }

    fn stock() -> Population {
        let mut pop = Population::default();
        for i in 0..10 {
            pop.push(
                YearMonth::ym(1980, 1),
                Sex::Male,
                Origin::EuImmigrant,
                Some(2005 + i),
            );
        }
        for _ in 0..5 {
            pop.push(
                YearMonth::ym(1970, 1),
                Sex::Female,
                Origin::UkEmigrantAbroad,
                None,
            );
        }
        pop
    }

    fn total(rows: &[FlowRow], c: Corridor, d: Direction) -> f64 {
        rows.iter()
            .filter(|r| r.corridor == c && r.direction == d)
            .map(|r| r.count)
            .sum()
    }

    #[test]
    fn status_quo_is_identity() {
        let t = table();
        let mut adj = BrexitAdjuster::new(MigrationScenario::status_quo()).unwrap();
        for year in [2015, 2019, 2030] {
            let a = adj.adjust(&t, year, &stock()).unwrap();
            assert_eq!(a.flows, t.levels_for(year).unwrap().1);
            assert!(a.departures.is_empty() && a.returns.is_empty());
        }
    }

    #[test]
    fn soft_levels_and_single_departure() {
        let t = table();
        let pop = stock();
        let mut adj = BrexitAdjuster::new(MigrationScenario::soft_brexit()).unwrap();
        let pre = adj.adjust(&t, 2018, &pop).unwrap();
        assert_eq!(pre.flows, t.levels_for(2018).unwrap().1);
        let mut departed = Vec::new();
        for year in 2019..=2022 {
            let a = adj.adjust(&t, year, &pop).unwrap();
            assert_eq!(total(&a.flows, Corridor::Eu, Direction::In), 2.0 * 20.0);
            assert_eq!(total(&a.flows, Corridor::Eu, Direction::Out), 2.0 * 20.0);
            assert!(
                (total(&a.flows, Corridor::UkCitizens, Direction::Out) - 2.0 * 20.0).abs() < 1e-9
            );
            assert_eq!(total(&a.flows, Corridor::Other, Direction::In), 200.0);
            departed.extend(a.departures);
        }
        // Latest pre-Brexit arrival (2014, id 9) is the only one to leave.
        assert_eq!(departed, vec![9]);
    }

    #[test]
    fn hard_exodus_follows_arrival_order() {
        let t = table();
        let pop = stock();
        let mut adj = BrexitAdjuster::new(MigrationScenario::hard_brexit()).unwrap();
        let mut departed = Vec::new();
        let mut returned = Vec::new();
        for year in 2019..=2022 {
            let a = adj.adjust(&t, year, &pop).unwrap();
            assert_eq!(total(&a.flows, Corridor::Eu, Direction::In), 8.0);
            assert_eq!(total(&a.flows, Corridor::Eu, Direction::Out), 100.0);
            departed.extend(a.departures);
            returned.extend(a.returns);
        }
        let mut oracle: Vec<_> = pop.agents()[..10]
            .iter()
            .map(|a| (a.arrival_year.unwrap(), a.id))
            .collect();
        oracle.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        assert_eq!(
            departed,
            oracle[..7].iter().map(|p| p.1).collect::<Vec<_>>()
        );
        assert_eq!(returned, vec![10, 11, 12, 13]);
    }

    #[test]
    fn shortfall_when_stock_dies_mid_window() {
        let t = table();
        let mut pop = stock();
        let mut adj = BrexitAdjuster::new(MigrationScenario::hard_brexit()).unwrap();
        let first = adj.adjust(&t, 2019, &pop).unwrap();
        assert_eq!((first.departures.len(), first.shortfall), (3, 0));
        for id in 0..10 {
            pop.get_mut(id).status = Status::Dead;
        }
        let second = adj.adjust(&t, 2020, &pop).unwrap();
        assert!(second.departures.is_empty());
        assert_eq!(second.shortfall, 3);
    }

    #[test]
    fn agents_dead_before_the_snapshot_are_excluded() {
        let t = table();
        let mut pop = stock();
        for id in 0..10 {
            if id != 9 {
                pop.get_mut(id).status = Status::Dead;
            }
        }
        let sc = MigrationScenario {
            exodus_fraction: 0.7,
            ..MigrationScenario::soft_brexit()
        };
        let mut adj = BrexitAdjuster::new(sc).unwrap();
        let a2019 = adj.adjust(&t, 2019, &pop).unwrap();
        // Snapshot holds only the one living immigrant: quota round(0.7) = 1.
        let a2020 = adj.adjust(&t, 2020, &pop).unwrap();
        assert_eq!([a2019.departures, a2020.departures].concat(), vec![9]);
    }

    #[test]
    fn missing_reference_year() {
        let rows: Vec<FlowRow> = Corridor::ALL
            .into_iter()
            .flat_map(|c| {
                [Direction::In, Direction::Out]
                    .into_iter()
                    .flat_map(move |d| flow(2018, c, d, 5.0))
            })
            .collect();
        let t = FlowTable::new(100, rows).unwrap();
        let mut adj = BrexitAdjuster::new(MigrationScenario::soft_brexit()).unwrap();
        assert!(matches!(
            adj.adjust(&t, 2019, &stock()),
            Err(Error::InvalidTable(_))
        ));
    }

    #[test]
    fn scenario_validation() {
        let bad = MigrationScenario {
            exodus_fraction: 1.5,
            ..MigrationScenario::hard_brexit()
        };
        assert!(BrexitAdjuster::new(bad).is_err());
        for k in ScenarioKind::ALL {
            assert_eq!(k.name().parse::<ScenarioKind>().unwrap(), k);
        }
    }
}

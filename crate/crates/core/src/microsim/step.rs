use log::debug;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::agent::{birth_for_age, Population, Status};
use super::scenario::BrexitAdjuster;
use super::spa::YearMonth;
use crate::data_io::{Corridor, Direction, FertilityTable, FlowRow, FlowTable, Origin, Sex};
use crate::error::{Error, Result};
use crate::life_metrics::CombinedSurface;
use crate::rng::SimRng;

/// Demographic inputs shared by every replicate.
#[derive(Debug, Clone, Copy)]
pub struct Demography<'a> {
    pub male: &'a CombinedSurface,
    pub female: &'a CombinedSurface,
    pub flows: &'a FlowTable,
    pub fertility: &'a FertilityTable,
}

impl Demography<'_> {
    fn surface(&self, sex: Sex) -> &CombinedSurface {
        match sex {
            Sex::Male => self.male,
            Sex::Female => self.female,
        }
    }

    /// Errors unless both sexes have mortality for `year`.
    pub fn check_year(&self, year: i32) -> Result<()> {
        for s in [self.male, self.female] {
            if year < s.first_year() || year > s.last_year() {
                return Err(Error::SurfaceGap { year });
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepOptions {
    /// Persons represented by one agent.
    pub scale: f64,
    /// Probability that a newborn is male.
    pub male_birth_share: f64,
    /// Month used to compute ages within each year.
    pub eval_month: u32,
}

impl Default for StepOptions {
    fn default() -> Self {
        Self {
            scale: 1.0,
            male_birth_share: 105.0 / 205.0,
            eval_month: 7,
        }
    }
}

/// Resident accounting for one simulated year. `residents_end` always
/// equals `residents_start - deaths + births + inflows - outflows`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearTally {
    pub year: i32,
    pub residents_start: usize,
    /// Resident deaths.
    pub deaths: usize,
    /// Deaths among UK citizens abroad (not part of the identity).
    pub abroad_deaths: usize,
    pub births: usize,
    /// New immigrants plus UK citizens returning, forced returns included.
    pub inflows: usize,
    /// All emigration, forced exodus included.
    pub outflows: usize,
    pub forced_departures: usize,
    pub returns: usize,
    pub exodus_shortfall: usize,
    pub residents_end: usize,
    /// Resident EU immigrants aged 15 to 64 at the next year's evaluation
    /// month.
    pub eu_working_age_end: usize,
}

impl YearTally {
    pub fn balances(&self) -> bool {
        self.residents_start + self.births + self.inflows
            == self.residents_end + self.deaths + self.outflows
    }
}

/// `floor(v)` plus one with probability `frac(v)`.
pub(crate) fn stochastic_round(v: f64, rng: &mut SimRng) -> usize {
    let whole = v.floor();
    let frac = v - whole;
    let extra = frac > 0.0 && rng.random::<f64>() < frac;
    whole as usize + extra as usize
}

/// Picks `n` of `candidates` without replacement (all of them if fewer).
fn choose(candidates: &mut [u64], n: usize, rng: &mut SimRng) -> usize {
    let n = n.min(candidates.len());
    for i in 0..n {
        let j = rng.random_range(i..candidates.len());
        candidates.swap(i, j);
    }
    n
}

fn origin_for(corridor: Corridor) -> Origin {
    match corridor {
        Corridor::Eu => Origin::EuImmigrant,
        Corridor::Other => Origin::OtherImmigrant,
        Corridor::UkCitizens => Origin::Domestic,
    }
}

/// Advances the population through `year`: deaths, then births, then
/// migration. Ages are taken at the evaluation month of `year`.
///
/// Random draws, in order: one uniform per living agent for death; one
/// uniform per resident woman with a positive birth rate, plus a month and a
/// sex draw per birth; then migration draws row by row.
pub fn step_year(
    pop: &mut Population,
    demo: &Demography,
    adjuster: &mut BrexitAdjuster,
    year: i32,
    opts: &StepOptions,
    rng: &mut SimRng,
) -> Result<YearTally> {
    demo.check_year(year)?;
    let date = YearMonth::new(year, opts.eval_month)?;
    let mut tally = YearTally {
        year,
        residents_start: pop.resident_count(),
        deaths: 0,
        abroad_deaths: 0,
        births: 0,
        inflows: 0,
        outflows: 0,
        forced_departures: 0,
        returns: 0,
        exodus_shortfall: 0,
        residents_end: 0,
        eu_working_age_end: 0,
    };

    for a in pop.agents_mut() {
        if !a.is_alive() {
            continue;
        }
        let s = demo.surface(a.sex);
        let age = a.age_years(date).unwrap_or(0).min(s.max_age());
        if rng.random::<f64>() < s.q(year, age) {
            if a.status == Status::Resident {
                tally.deaths += 1;
            } else {
                tally.abroad_deaths += 1;
            }
            a.status = Status::Dead;
        }
    }

    let existing = pop.agents().len();
    for id in 0..existing as u64 {
        let a = pop.get(id);
        if !(a.is_resident() && a.sex == Sex::Female) {
            continue;
        }
        let p = demo.fertility.rate(a.age_years(date).unwrap_or(0));
        if p > 0.0 && rng.random::<f64>() < p {
            let month = rng.random_range(1..=12);
            let sex = if rng.random::<f64>() < opts.male_birth_share {
                Sex::Male
            } else {
                Sex::Female
            };
            pop.push(YearMonth::new(year, month)?, sex, Origin::Domestic, None);
            tally.births += 1;
        }
    }

    let adj = adjuster.adjust(demo.flows, year, pop)?;
    for &id in &adj.departures {
        pop.get_mut(id).status = Status::Departed;
    }
    for &id in &adj.returns {
        let a = pop.get_mut(id);
        a.status = Status::Resident;
        a.origin = Origin::Domestic;
    }
    tally.forced_departures = adj.departures.len();
    tally.returns = adj.returns.len();
    tally.exodus_shortfall = adj.shortfall;
    tally.outflows += adj.departures.len();
    tally.inflows += adj.returns.len();

    migrate(pop, &adj.flows, date, opts.scale, rng, &mut tally)?;

    tally.residents_end = pop.resident_count();
    let next = YearMonth::new(year + 1, opts.eval_month)?;
    tally.eu_working_age_end = pop
        .residents()
        .filter(|a| {
            a.origin == Origin::EuImmigrant
                && a.age_years(next).is_some_and(|y| (15..65).contains(&y))
        })
        .count();
    if !tally.balances() {
        return Err(Error::Invariant(format!(
            "population accounting failed in {year}: {tally:?}"
        )));
    }
    debug!("{year}: {tally:?}");
    Ok(tally)
}

fn migrate(
    pop: &mut Population,
    rows: &[FlowRow],
    date: YearMonth,
    scale: f64,
    rng: &mut SimRng,
    tally: &mut YearTally,
) -> Result<()> {
    let max_age = rows.iter().map(|r| r.age_hi).max().unwrap_or(0) as usize;
    // Candidate ids by (origin, sex, age), taken before any regular moves so
    // that this year's arrivals cannot leave again.
    let bucket = |pop: &Population, status: Status, origin: Origin, sex: Sex| {
        let mut by_age = vec![Vec::new(); max_age + 1];
        for a in pop.agents() {
            if a.status == status && a.origin == origin && a.sex == sex {
                if let Some(age) = a.age_years(date) {
                    if (age as usize) <= max_age {
                        by_age[age as usize].push(a.id);
                    }
                }
            }
        }
        by_age
    };
    let mut leaving = Vec::new();
    let mut returning = Vec::new();
    let mut arrivals = Vec::new();
    for r in rows.iter().filter(|r| r.direction == Direction::Out) {
        let n = stochastic_round(r.count / scale, rng);
        if n == 0 {
            continue;
        }
        let pool = bucket(pop, Status::Resident, origin_for(r.corridor), r.sex);
        let mut cands: Vec<u64> = (r.age_lo..=r.age_hi)
            .flat_map(|a| pool[a as usize].iter().copied())
            .collect();
        let k = choose(&mut cands, n, rng);
        if k < n {
            debug!(
                "{} {} {}: {n} out-migrants requested, {k} available",
                date.year(),
                r.corridor,
                r.sex
            );
        }
        leaving.extend(cands[..k].iter().map(|&id| (id, r.corridor)));
    }
    for r in rows.iter().filter(|r| r.direction == Direction::In) {
        let n = stochastic_round(r.count / scale, rng);
        if n == 0 {
            continue;
        }
        let mut fresh = n;
        if r.corridor == Corridor::UkCitizens {
            let pool = bucket(pop, Status::Abroad, Origin::UkEmigrantAbroad, r.sex);
            let mut cands: Vec<u64> = (r.age_lo..=r.age_hi)
                .flat_map(|a| pool[a as usize].iter().copied())
                .collect();
            let k = choose(&mut cands, n, rng);
            returning.extend_from_slice(&cands[..k]);
            fresh -= k;
        }
        for _ in 0..fresh {
            let age = rng.random_range(r.age_lo..=r.age_hi);
            let birth = birth_for_age(rng, date, age);
            arrivals.push((birth, r.sex, origin_for(r.corridor), r.corridor));
        }
    }
    for (id, corridor) in leaving {
        let a = pop.get_mut(id);
        if corridor == Corridor::UkCitizens {
            a.status = Status::Abroad;
            a.origin = Origin::UkEmigrantAbroad;
        } else {
            a.status = Status::Departed;
        }
        tally.outflows += 1;
    }
    for id in returning {
        let a = pop.get_mut(id);
        a.status = Status::Resident;
        a.origin = Origin::Domestic;
        tally.inflows += 1;
    }
    for (birth, sex, origin, corridor) in arrivals {
        let arrival = (corridor != Corridor::UkCitizens).then_some(date.year());
        pop.push(birth, sex, origin, arrival);
        tally.inflows += 1;
    }
    Ok(())
}

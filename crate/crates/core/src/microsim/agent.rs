use rand::Rng;
use serde::{Deserialize, Serialize};

use super::spa::YearMonth;
use crate::data_io::{Origin, PopulationTable, Sex};
use crate::error::{Error, Result};
use crate::rng;

/// Stream reserved for building the initial roster.
const INIT_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Status {
    Resident,
    /// UK citizen living in the EU; alive but not part of the population.
    Abroad,
    /// Emigrated for good.
    Departed,
    Dead,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Agent {
    pub id: u64,
    pub birth: YearMonth,
    pub sex: Sex,
    pub origin: Origin,
    pub arrival_year: Option<i32>,
    pub status: Status,
}

impl Agent {
    pub fn is_alive(&self) -> bool {
        matches!(self.status, Status::Resident | Status::Abroad)
    }

    pub fn is_resident(&self) -> bool {
        self.status == Status::Resident
    }

    /// Completed months of age at `date`; negative before birth.
    pub fn age_months(&self, date: YearMonth) -> i64 {
        date.months_since(self.birth)
    }

    /// Completed years at `date`, `None` before birth.
    pub fn age_years(&self, date: YearMonth) -> Option<u32> {
        let m = self.age_months(date);
        (m >= 0).then_some((m / 12) as u32)
    }
}

/// All agents ever created, including the dead and departed, in id order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Population {
    agents: Vec<Agent>,
}

impl Population {
    pub fn from_agents(agents: Vec<Agent>) -> Result<Self> {
        for (i, a) in agents.iter().enumerate() {
            if a.id != i as u64 {
                return Err(Error::InvalidConfig(format!(
                    "agent ids must be 0..n in order, found {} at {i}",
                    a.id
                )));
            }
            if a.origin.is_immigrant() != a.arrival_year.is_some() {
                return Err(Error::InvalidConfig(format!(
                    "agent {}: arrival year iff immigrant",
                    a.id
                )));
            }
        }
        Ok(Self { agents })
    }

    pub fn agents(&self) -> &[Agent] {
        &self.agents
    }

    pub(crate) fn agents_mut(&mut self) -> &mut [Agent] {
        &mut self.agents
    }

    pub fn get(&self, id: u64) -> &Agent {
        &self.agents[id as usize]
    }

    pub(crate) fn get_mut(&mut self, id: u64) -> &mut Agent {
        &mut self.agents[id as usize]
    }

    pub fn residents(&self) -> impl Iterator<Item = &Agent> {
        self.agents.iter().filter(|a| a.is_resident())
    }

    pub fn resident_count(&self) -> usize {
        self.residents().count()
    }

    pub(crate) fn push(
        &mut self,
        birth: YearMonth,
        sex: Sex,
        origin: Origin,
        arrival_year: Option<i32>,
    ) -> u64 {
        let id = self.agents.len() as u64;
        let status = if origin == Origin::UkEmigrantAbroad {
            Status::Abroad
        } else {
            Status::Resident
        };
        self.agents.push(Agent {
            id,
            birth,
            sex,
            origin,
            arrival_year,
            status,
        });
        id
    }
}

/// Birth month for someone of completed age `age` on `date`, uniform over
/// the twelve possible months.
pub(crate) fn birth_for_age<R: Rng>(rng: &mut R, date: YearMonth, age: u32) -> YearMonth {
    date.add_months(-(age as i64 * 12) - rng.random_range(0..12i64))
}

/// Builds the roster: `round(count / scale)` agents per table cell, aged
/// against July of the base year.
pub fn init_population(pt: &PopulationTable, scale: f64, seed: u64) -> Result<Population> {
    if !(scale >= 1.0 && scale.is_finite()) {
        return Err(Error::InvalidConfig(format!("scale {scale} must be >= 1")));
    }
    let mut rng = rng::stream(seed, INIT_STREAM);
    let date = YearMonth::ym(pt.base_year(), 7);
    let mut pop = Population::default();
    for row in pt.rows() {
        let n = (row.count / scale).round() as u64;
        for _ in 0..n {
            let birth = birth_for_age(&mut rng, date, row.age);
            pop.push(birth, row.sex, row.origin, row.arrival_year);
        }
    }
    if pop.agents.is_empty() {
        return Err(Error::EmptyTable);
    }
    Ok(pop)
}

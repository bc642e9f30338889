use proptest::prelude::*;
use rand::Rng;

use super::*;
use crate::data_io::{
    Corridor, Direction, FertilityTable, FlowRow, FlowTable, MortalitySurface, Origin, Sex,
};
use crate::life_metrics::CombinedSurface;
use crate::rng;

fn ym(y: i32, m: u32) -> YearMonth {
    YearMonth::new(y, m).unwrap()
}

fn agent(id: u64, birth: YearMonth, sex: Sex) -> Agent {
    Agent {
        id,
        birth,
        sex,
        origin: Origin::Domestic,
        arrival_year: None,
        status: Status::Resident,
    }
}

fn surface(sex: Sex, q: f64) -> CombinedSurface {
    CombinedSurface::from_surface(MortalitySurface::constant(sex, 1950, 2070, 100, q).unwrap())
}

fn flows(count: f64) -> FlowTable {
    let mut rows = Vec::new();
    for year in [2000, 2003, 2011] {
        for corridor in Corridor::ALL {
            for direction in [Direction::In, Direction::Out] {
                for sex in Sex::BOTH {
                    for (lo, hi) in [(0, 29), (30, 100)] {
                        rows.push(FlowRow {
                            year,
                            corridor,
                            sex,
                            age_lo: lo,
                            age_hi: hi,
                            direction,
                            count,
                        });
                    }
                }
            }
        }
    }
    FlowTable::new(100, rows).unwrap()
}

fn fertility(rate: f64) -> FertilityTable {
    FertilityTable::new((20..=40).map(|a| (a, rate)).collect()).unwrap()
}

#[test]
fn ratio_direct_count() {
    let date = ym(2020, 7);
    let pop = Population::from_agents(vec![
        agent(0, ym(1950, 7), Sex::Male),
        agent(1, ym(1950, 1), Sex::Male),
        agent(2, ym(1990, 7), Sex::Male),
    ])
    .unwrap();
    assert_eq!(
        dependency_ratio(&pop, SpaScheme::PreReform, date).unwrap(),
        2.0
    );
}

#[test]
fn exact_pension_age_is_in_the_numerator() {
    let date = ym(2020, 7);
    // Born July 1955: exactly 65y 0m in July 2020.
    let pop = Population::from_agents(vec![
        agent(0, ym(1955, 7), Sex::Male),
        agent(1, ym(1990, 1), Sex::Male),
    ])
    .unwrap();
    assert_eq!(dependency_counts(&pop, SpaScheme::PreReform, date), (1, 1));
    let younger = Population::from_agents(vec![
        agent(0, ym(1955, 8), Sex::Male),
        agent(1, ym(1990, 1), Sex::Male),
    ])
    .unwrap();
    assert_eq!(
        dependency_counts(&younger, SpaScheme::PreReform, date),
        (0, 2)
    );
}

#[test]
fn empty_denominator() {
    let pop = Population::from_agents(vec![
        agent(0, ym(1930, 1), Sex::Female),
        agent(1, ym(2010, 1), Sex::Male),
    ])
    .unwrap();
    assert!(matches!(
        dependency_ratio(&pop, SpaScheme::EqualSpa, ym(2020, 7)),
        Err(crate::Error::EmptyDenominator { .. })
    ));
}

fn random_population() -> impl Strategy<Value = (Vec<Agent>, i32)> {
    let one = (1900i32..2020, 1u32..=12, any::<bool>(), 0u8..4);
    (prop::collection::vec(one, 1..300), 2000i32..2060).prop_map(|(v, year)| {
        let agents = v
            .into_iter()
            .enumerate()
            .map(|(i, (y, m, male, st))| Agent {
                id: i as u64,
                birth: ym(y, m),
                sex: if male { Sex::Male } else { Sex::Female },
                origin: Origin::Domestic,
                arrival_year: None,
                status: [
                    Status::Resident,
                    Status::Resident,
                    Status::Dead,
                    Status::Departed,
                ][st as usize],
            })
            .collect();
        (agents, year)
    })
}

proptest! {
    #[test]
    fn ratio_matches_recount((agents, year) in random_population()) {
        let date = ym(year, 7);
        let pop = Population::from_agents(agents.clone()).unwrap();
        for scheme in SpaScheme::ALL {
            let mut num = 0;
            let mut den = 0;
            for a in agents.iter().filter(|a| a.status == Status::Resident) {
                let age = (date.year() - a.birth.year()) as i64 * 12 + date.month() as i64 - a.birth.month() as i64;
                let spa = spa_at(scheme, a.sex, a.birth).months() as i64;
                if age >= spa { num += 1 } else if age >= 180 { den += 1 }
            }
            prop_assert_eq!(dependency_counts(&pop, scheme, date), (num, den));
        }
    }
}

fn demo<'a>(
    m: &'a CombinedSurface,
    f: &'a CombinedSurface,
    fl: &'a FlowTable,
    fe: &'a FertilityTable,
) -> Demography<'a> {
    Demography {
        male: m,
        female: f,
        flows: fl,
        fertility: fe,
    }
}

fn roster(n: usize) -> Population {
    let agents = (0..n)
        .map(|i| {
            agent(
                i as u64,
                ym(1950 + (i % 50) as i32, 1 + (i % 12) as u32),
                if i % 2 == 0 { Sex::Male } else { Sex::Female },
            )
        })
        .collect();
    Population::from_agents(agents).unwrap()
}

#[test]
fn certain_death_leaves_newcomers_only() {
    let (m, f) = (surface(Sex::Male, 1.0), surface(Sex::Female, 1.0));
    let (fl, fe) = (flows(5.0), fertility(0.5));
    let d = demo(&m, &f, &fl, &fe);
    let mut pop = roster(40);
    let mut adj = BrexitAdjuster::new(MigrationScenario::status_quo()).unwrap();
    let t = step_year(
        &mut pop,
        &d,
        &mut adj,
        2005,
        &StepOptions::default(),
        &mut rng::stream(1, 0),
    )
    .unwrap();
    assert_eq!(t.deaths, 40);
    assert_eq!(t.births, 0);
    assert_eq!(t.outflows, 0);
    assert_eq!(t.residents_end, t.inflows);
    assert!(t.inflows > 0);
}

#[test]
fn closed_population_only_loses_deaths() {
    let (m, f) = (surface(Sex::Male, 0.05), surface(Sex::Female, 0.05));
    let (fl, fe) = (flows(0.0), FertilityTable::default());
    let d = demo(&m, &f, &fl, &fe);
    let mut pop = roster(300);
    let mut adj = BrexitAdjuster::new(MigrationScenario::status_quo()).unwrap();
    let mut r = rng::stream(2, 0);
    for year in 2005..2015 {
        let before = pop.resident_count();
        let t = step_year(
            &mut pop,
            &d,
            &mut adj,
            year,
            &StepOptions::default(),
            &mut r,
        )
        .unwrap();
        assert_eq!(pop.resident_count(), before - t.deaths);
    }
}

#[test]
fn replay_oracle() {
    let (m, f) = (surface(Sex::Male, 0.3), surface(Sex::Female, 0.3));
    let (fl, fe) = (flows(0.0), fertility(0.4));
    let d = demo(&m, &f, &fl, &fe);
    let agents = vec![
        agent(0, ym(1980, 2), Sex::Female),
        agent(1, ym(1975, 9), Sex::Male),
        agent(2, ym(1982, 11), Sex::Female),
        agent(3, ym(1930, 4), Sex::Female),
        agent(4, ym(1985, 6), Sex::Female),
    ];
    let mut pop = Population::from_agents(agents.clone()).unwrap();
    let mut adj = BrexitAdjuster::new(MigrationScenario::status_quo()).unwrap();
    let opts = StepOptions::default();
    let t = step_year(&mut pop, &d, &mut adj, 2005, &opts, &mut rng::stream(77, 0)).unwrap();

    // Hand replay of the documented draw order.
    let mut r = rng::stream(77, 0);
    let mut alive: Vec<bool> = agents.iter().map(|_| true).collect();
    let mut deaths = 0;
    for a in alive.iter_mut() {
        if r.random::<f64>() < 0.3 {
            *a = false;
            deaths += 1;
        }
    }
    let mut babies = Vec::new();
    for (i, a) in agents.iter().enumerate() {
        let age = (2005 - a.birth.year()) as i64 * 12 + 7 - a.birth.month() as i64;
        let age = (age / 12) as u32;
        if alive[i] && a.sex == Sex::Female && (20..=40).contains(&age) && r.random::<f64>() < 0.4 {
            let month: u32 = r.random_range(1..=12);
            let male = r.random::<f64>() < 105.0 / 205.0;
            babies.push((month, male));
        }
    }
    assert_eq!(t.deaths, deaths);
    assert_eq!(t.births, babies.len());
    for (i, a) in pop.agents()[..5].iter().enumerate() {
        assert_eq!(a.status == Status::Resident, alive[i]);
    }
    for (k, (month, male)) in babies.iter().enumerate() {
        let b = &pop.agents()[5 + k];
        assert_eq!(b.birth, ym(2005, *month));
        assert_eq!(b.sex == Sex::Male, *male);
    }
}

#[test]
fn surface_gap_is_an_error() {
    let short = CombinedSurface::from_surface(
        MortalitySurface::constant(Sex::Male, 1950, 2000, 100, 0.01).unwrap(),
    );
    let f = surface(Sex::Female, 0.01);
    let (fl, fe) = (flows(0.0), FertilityTable::default());
    let d = demo(&short, &f, &fl, &fe);
    let mut adj = BrexitAdjuster::new(MigrationScenario::status_quo()).unwrap();
    let err = step_year(
        &mut roster(3),
        &d,
        &mut adj,
        2001,
        &StepOptions::default(),
        &mut rng::stream(0, 0),
    )
    .unwrap_err();
    assert!(matches!(err, crate::Error::SurfaceGap { year: 2001 }));
}

#[test]
fn dead_stay_dead_and_identity_holds() {
    let (m, f) = (surface(Sex::Male, 0.1), surface(Sex::Female, 0.1));
    let (fl, fe) = (flows(300.0), fertility(0.1));
    let d = demo(&m, &f, &fl, &fe);
    let mut pop = roster(500);
    let mut adj = BrexitAdjuster::new(MigrationScenario::hard_brexit()).unwrap();
    let mut r = rng::stream(5, 3);
    let opts = StepOptions {
        scale: 10.0,
        ..StepOptions::default()
    };
    let mut dead = std::collections::BTreeSet::new();
    for year in 2015..2025 {
        let t = step_year(&mut pop, &d, &mut adj, year, &opts, &mut r).unwrap();
        assert!(t.balances());
        for id in &dead {
            assert_eq!(pop.get(*id).status, Status::Dead);
        }
        dead.extend(
            pop.agents()
                .iter()
                .filter(|a| a.status == Status::Dead)
                .map(|a| a.id),
        );
    }
}

fn small_table() -> crate::data_io::PopulationTable {
    use crate::data_io::{PopulationRow, PopulationTable};
    let mut rows = Vec::new();
    for age in 0..=90 {
        for sex in Sex::BOTH {
            rows.push(PopulationRow {
                age,
                sex,
                origin: Origin::Domestic,
                arrival_year: None,
                count: 40.0,
            });
        }
        if (20..60).contains(&age) {
            rows.push(PopulationRow {
                age,
                sex: Sex::Male,
                origin: Origin::EuImmigrant,
                arrival_year: Some(1990),
                count: 10.0,
            });
        }
    }
    PopulationTable::new(1991, rows).unwrap()
}

fn sim(replicates: usize) -> SimConfig {
    SimConfig {
        seed: 11,
        start_year: 2010,
        end_year: 2030,
        replicates,
        scheme: SpaScheme::PreReform,
        scenario: MigrationScenario::status_quo(),
        step: StepOptions {
            scale: 4.0,
            ..StepOptions::default()
        },
    }
}

#[test]
fn single_replicate_band_collapses() {
    let (m, f) = (surface(Sex::Male, 0.01), surface(Sex::Female, 0.01));
    let (fl, fe) = (flows(20.0), fertility(0.05));
    let s = run_scenario(&sim(1), &small_table(), &demo(&m, &f, &fl, &fe)).unwrap();
    for t in 0..s.years.len() {
        let v = s.per_replicate[t][0];
        assert_eq!((s.mean[t], s.lower[t], s.upper[t]), (v, v, v));
    }
}

#[test]
fn schemes_share_demography_and_order() {
    let (m, f) = (surface(Sex::Male, 0.01), surface(Sex::Female, 0.01));
    let (fl, fe) = (flows(20.0), fertility(0.05));
    let d = demo(&m, &f, &fl, &fe);
    let run = run_matrix(
        &sim(3),
        &SpaScheme::ALL,
        &[MigrationScenario::status_quo()],
        &small_table(),
        &d,
    )
    .unwrap();
    let pre = &run.series[0];
    let acc = &run.series[3];
    for t in 0..pre.years.len() {
        if pre.years[t] >= 2019 {
            for r in 0..3 {
                assert!(acc.per_replicate[t][r].unwrap() <= pre.per_replicate[t][r].unwrap());
            }
        }
    }
    // Deterministic and independent of the execution path.
    let seq = crate::parallel::run_sequential(|| {
        run_matrix(
            &sim(3),
            &SpaScheme::ALL,
            &[MigrationScenario::status_quo()],
            &small_table(),
            &d,
        )
    })
    .unwrap();
    assert_eq!(seq, run);
}

#[test]
fn hard_brexit_has_fewer_working_age_eu_residents() {
    let (m, f) = (surface(Sex::Male, 0.01), surface(Sex::Female, 0.01));
    let (fl, fe) = (flows(20.0), fertility(0.05));
    let d = demo(&m, &f, &fl, &fe);
    let scenarios = [
        MigrationScenario::soft_brexit(),
        MigrationScenario::hard_brexit(),
    ];
    let run = run_matrix(
        &sim(2),
        &[SpaScheme::PreReform],
        &scenarios,
        &small_table(),
        &d,
    )
    .unwrap();
    let (soft, hard) = run.runs.split_at(2);
    for r in 0..2 {
        for (ts, th) in soft[r].tallies.iter().zip(&hard[r].tallies) {
            if ts.year >= 2019 {
                assert!(
                    th.eu_working_age_end <= ts.eu_working_age_end,
                    "{} {} {}",
                    ts.year,
                    th.eu_working_age_end,
                    ts.eu_working_age_end
                );
            }
        }
    }
}

#[test]
fn config_validation() {
    let t = small_table();
    assert!(sim(0).validate(t.base_year()).is_err());
    assert!(SimConfig {
        end_year: 2070,
        ..sim(1)
    }
    .validate(1991)
    .is_err());
    assert!(SimConfig {
        start_year: 1980,
        ..sim(1)
    }
    .validate(1991)
    .is_err());
    sim(1).validate(1991).unwrap();
}

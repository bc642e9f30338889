use serde::{Deserialize, Serialize};

/// Dense year × age grid, row-major by year, ages `0..=max_age`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YearAgeGrid {
    first_year: i32,
    max_age: u32,
    values: Vec<f64>,
}

impl YearAgeGrid {
    /// `values.len()` must be a positive multiple of `max_age + 1`.
    pub fn new(first_year: i32, max_age: u32, values: Vec<f64>) -> Option<Self> {
        let width = max_age as usize + 1;
        if values.is_empty() || !values.len().is_multiple_of(width) {
            return None;
        }
        Some(Self {
            first_year,
            max_age,
            values,
        })
    }

    pub fn filled(first_year: i32, last_year: i32, max_age: u32, value: f64) -> Self {
        assert!(last_year >= first_year);
        let n = (last_year - first_year + 1) as usize * (max_age as usize + 1);
        Self {
            first_year,
            max_age,
            values: vec![value; n],
        }
    }

    pub fn first_year(&self) -> i32 {
        self.first_year
    }

    pub fn last_year(&self) -> i32 {
        self.first_year + self.n_years() as i32 - 1
    }

    pub fn max_age(&self) -> u32 {
        self.max_age
    }

    pub fn n_ages(&self) -> usize {
        self.max_age as usize + 1
    }

    pub fn n_years(&self) -> usize {
        self.values.len() / self.n_ages()
    }

    pub fn years(&self) -> std::ops::RangeInclusive<i32> {
        self.first_year..=self.last_year()
    }

    pub fn contains_year(&self, year: i32) -> bool {
        self.years().contains(&year)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn index(&self, year: i32, age: u32) -> usize {
        assert!(self.contains_year(year), "year {year} outside grid");
        assert!(age <= self.max_age, "age {age} outside grid");
        (year - self.first_year) as usize * self.n_ages() + age as usize
    }

    pub fn get(&self, year: i32, age: u32) -> f64 {
        self.values[self.index(year, age)]
    }

    pub fn try_get(&self, year: i32, age: u32) -> Option<f64> {
        (self.contains_year(year) && age <= self.max_age).then(|| self.get(year, age))
    }

    pub fn set(&mut self, year: i32, age: u32, v: f64) {
        let i = self.index(year, age);
        self.values[i] = v;
    }

    /// Values for one year, indexed by age.
    pub fn year_row(&self, year: i32) -> &[f64] {
        let start = self.index(year, 0);
        &self.values[start..start + self.n_ages()]
    }

    /// Time series for one age, indexed from `first_year`.
    pub fn age_series(&self, age: u32) -> Vec<f64> {
        self.years().map(|y| self.get(y, age)).collect()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
            ..*self
        }
    }

    pub fn same_shape(&self, other: &Self) -> bool {
        self.first_year == other.first_year
            && self.max_age == other.max_age
            && self.values.len() == other.values.len()
    }

    /// Appends `next` directly after this grid; `next` must start the year
    /// after this grid ends and share its age range.
    pub fn concat(&self, next: &Self) -> Option<Self> {
        if next.first_year != self.last_year() + 1 || next.max_age != self.max_age {
            return None;
        }
        let mut values = self.values.clone();
        values.extend_from_slice(&next.values);
        Some(Self { values, ..*self })
    }
}

//! Fixed rankings with their 11-point AP worked out by hand. Each fixture
//! lists the interpolated precision at recall 0, 0.1, …, 1 and the exact
//! rational value of their mean.

#![allow(dead_code)]

pub struct ApFixture {
    pub scores: &'static [f64],
    pub relevant: &'static [bool],
    pub interpolated: [f64; 11],
    pub numerator: f64,
    pub denominator: f64,
}

const T: bool = true;
const F: bool = false;
const TWO_THIRDS: f64 = 2.0 / 3.0;

pub const AP_FIXTURES: [ApFixture; 6] = [
    // perfect ranking
    ApFixture {
        scores: &[4.0, 3.0, 2.0, 1.0],
        relevant: &[T, T, F, F],
        interpolated: [1.0; 11],
        numerator: 1.0,
        denominator: 1.0,
    },
    // the only positive ranked second
    ApFixture {
        scores: &[2.0, 1.0],
        relevant: &[F, T],
        interpolated: [0.5; 11],
        numerator: 1.0,
        denominator: 2.0,
    },
    // P = 1 at recall 1/2, P = 2/3 at recall 1
    ApFixture {
        scores: &[3.0, 2.0, 1.0],
        relevant: &[T, F, T],
        interpolated: [
            1.0, 1.0, 1.0, 1.0, 1.0, 1.0, TWO_THIRDS, TWO_THIRDS, TWO_THIRDS, TWO_THIRDS, TWO_THIRDS,
        ],
        numerator: 28.0,
        denominator: 33.0,
    },
    // positives last: P = 1/3 then 1/2, interpolation lifts every level to 1/2
    ApFixture {
        scores: &[0.9, 0.8, 0.7, 0.6],
        relevant: &[F, F, T, T],
        interpolated: [0.5; 11],
        numerator: 1.0,
        denominator: 2.0,
    },
    // first and tenth of ten
    ApFixture {
        scores: &[10.0, 9.0, 8.0, 7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0],
        relevant: &[T, F, F, F, F, F, F, F, F, T],
        interpolated: [1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.2, 0.2, 0.2, 0.2, 0.2],
        numerator: 7.0,
        denominator: 11.0,
    },
    // a tie resolved by input order puts the negative first
    ApFixture {
        scores: &[1.0, 1.0, 0.0],
        relevant: &[F, T, F],
        interpolated: [0.5; 11],
        numerator: 1.0,
        denominator: 2.0,
    },
];

impl ApFixture {
    /// Mean of the interpolated precisions, summed left to right.
    pub fn expected(&self) -> f64 {
        let mut s = 0.0;
        for p in self.interpolated {
            s += p;
        }
        s / 11.0
    }
}

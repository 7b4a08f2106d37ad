//! Boundedness of the abstract scheme on random operator triples.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use timoshenko_core::abstract_scheme::{
    random_triple, run_abstract, AbstractMonitors, OperatorTriple, TripleSpec, Unforced,
};
use timoshenko_core::timestepper::PhysicalConstants;

use crate::error::AppError;
use crate::executor::Choice;

pub const MONITOR_NAMES: [&str; 6] = ["du", "dv", "Au", "Lv", "A", "Adu"];

#[derive(Debug, Clone, PartialEq)]
pub struct DemoSettings {
    pub triples: usize,
    pub dim: usize,
    pub final_time: f64,
    /// Step counts; `tau = T / n`.
    pub steps: Vec<usize>,
    pub spec: TripleSpec,
    pub constants: PhysicalConstants,
    pub seed: u64,
}

impl Default for DemoSettings {
    fn default() -> Self {
        let dim = 20;
        Self {
            triples: 20,
            dim,
            final_time: 1.0,
            steps: vec![64, 128, 256],
            spec: TripleSpec {
                dim,
                a_spectrum: (1.0, 100.0),
                c_norm: 1.0,
                b0: 1.0,
            },
            constants: PhysicalConstants::default(),
            seed: 2024,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TripleResult {
    pub index: usize,
    /// Running maxima over the whole run, one entry per step count.
    pub maxima: Vec<AbstractMonitors>,
}

impl TripleResult {
    /// `max / min - 1` of each monitor across step counts.
    pub fn spread(&self) -> [f64; 6] {
        let mut out = [0.0; 6];
        for (j, s) in out.iter_mut().enumerate() {
            let values = self.maxima.iter().map(|m| m.to_array()[j]);
            let hi = values.clone().fold(f64::NEG_INFINITY, f64::max);
            let lo = values.fold(f64::INFINITY, f64::min);
            *s = if hi == 0.0 { 0.0 } else { hi / lo - 1.0 };
        }
        out
    }

    pub fn worst_spread(&self) -> f64 {
        self.spread().into_iter().fold(0.0, f64::max)
    }
}

type Case = (OperatorTriple, [Vec<f64>; 4]);

fn cases(settings: &DemoSettings) -> Result<Vec<Case>, AppError> {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let spec = TripleSpec {
        dim: settings.dim,
        ..settings.spec
    };
    let scale = 1.0 / (settings.dim as f64).sqrt();
    (0..settings.triples)
        .map(|_| {
            let triple = random_triple(&mut rng, &spec)?;
            let mut vector = || -> Vec<f64> {
                (0..settings.dim)
                    .map(|_| scale * rng.random_range(-1.0..1.0))
                    .collect()
            };
            let data = [vector(), vector(), vector(), vector()];
            Ok((triple, data))
        })
        .collect()
}

/// Runs every triple at every step count from the same initial data.
pub fn boundedness_study(settings: &DemoSettings, exec: Choice) -> Result<Vec<TripleResult>, AppError> {
    let cases = cases(settings)?;
    let one = |(index, (triple, d)): (usize, &Case)| -> Result<TripleResult, AppError> {
        let maxima = settings
            .steps
            .iter()
            .map(|&n| {
                run_abstract(
                    triple,
                    (&d[0], &d[1], &d[2], &d[3]),
                    &Unforced,
                    &settings.constants,
                    settings.final_time,
                    n,
                    &exec,
                )
                .map(|(_, m)| m)
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(TripleResult { index, maxima })
    };
    if exec.is_parallel() {
        cases.par_iter().enumerate().map(one).collect()
    } else {
        cases.iter().enumerate().map(one).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn spread_of_equal_maxima_is_zero() {
        let m = AbstractMonitors {
            du: 1.0,
            dv: 2.0,
            au: 3.0,
            lv: 4.0,
            a_norm: 5.0,
            a_du: 6.0,
        };
        let r = TripleResult {
            index: 0,
            maxima: vec![m, m],
        };
        assert_eq!(r.worst_spread(), 0.0);
        let r = TripleResult {
            index: 0,
            maxima: vec![m, AbstractMonitors { du: 1.1, ..m }],
        };
        assert!((r.spread()[0] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn small_study_is_deterministic() {
        let s = DemoSettings {
            triples: 3,
            dim: 6,
            ..DemoSettings::default()
        };
        let a = boundedness_study(&s, Choice::Serial).unwrap();
        let b = boundedness_study(&s, Choice::Rayon).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 3);
    }
}

//! Brownian increments from a counter-based generator.
//!
//! Path `i` of a run with master seed `s` reads ChaCha8 stream `i` under key
//! `s`. Every step consumes a fixed number of words, so the increment of step
//! `k` lives at a known word offset and can be regenerated in isolation.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::linalg::Vector;

/// A source of Brownian increments indexed by step.
pub trait NoiseSource {
    fn dim(&self) -> usize;
    fn dt(&self) -> f64;
    /// Write the increment of step `step` (zero-based) into `out`.
    fn fill(&mut self, step: u64, out: &mut [f64]);
}

#[derive(Clone, Debug)]
pub struct BrownianDriver {
    seed: u64,
    path_index: u64,
    dim: usize,
    dt: f64,
    rng: ChaCha8Rng,
    next_step: u64,
}

impl BrownianDriver {
    pub fn new(seed: u64, path_index: u64, dim: usize, dt: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(path_index);
        BrownianDriver { seed, path_index, dim, dt, rng, next_step: 0 }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn path_index(&self) -> u64 {
        self.path_index
    }

    /// 32-bit words consumed per step: one Box–Muller pair per two
    /// components, two 64-bit draws per pair.
    fn words_per_step(&self) -> u128 {
        (self.dim.div_ceil(2) as u128) * 4
    }

    fn seek(&mut self, step: u64) {
        if step != self.next_step {
            self.rng.set_word_pos(step as u128 * self.words_per_step());
        }
    }

    /// Standard normals for `step`, unscaled.
    pub fn standard_normals(&mut self, step: u64, out: &mut [f64]) {
        debug_assert_eq!(out.len(), self.dim);
        self.seek(step);
        let mut k = 0;
        while k < self.dim {
            // u1 in (0, 1], u2 in [0, 1)
            let u1 = ((self.rng.next_u64() >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
            let u2 = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
            let r = (-2.0 * u1.ln()).sqrt();
            let (s, c) = (std::f64::consts::TAU * u2).sin_cos();
            out[k] = r * c;
            if k + 1 < self.dim {
                out[k + 1] = r * s;
            }
            k += 2;
        }
        self.next_step = step + 1;
    }

    pub fn increment(&mut self, step: u64) -> Vector {
        let mut v = Vector::zeros(self.dim);
        self.fill(step, &mut v);
        v
    }
}

impl NoiseSource for BrownianDriver {
    fn dim(&self) -> usize {
        self.dim
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn fill(&mut self, step: u64, out: &mut [f64]) {
        self.standard_normals(step, out);
        let s = self.dt.sqrt();
        for x in out.iter_mut() {
            *x *= s;
        }
    }
}

/// Increments supplied explicitly, e.g. a stream shared with an exact oracle.
#[derive(Clone, Debug)]
pub struct RecordedNoise {
    pub increments: Vec<Vector>,
    pub dt: f64,
}

impl NoiseSource for RecordedNoise {
    fn dim(&self) -> usize {
        self.increments.first().map_or(0, |v| v.len())
    }

    fn dt(&self) -> f64 {
        self.dt
    }

    fn fill(&mut self, step: u64, out: &mut [f64]) {
        match self.increments.get(step as usize) {
            Some(v) => out.copy_from_slice(v),
            None => out.iter_mut().for_each(|x| *x = 0.0),
        }
    }
}

/// Sums of `factor` consecutive increments of a finer source, so coarse and
/// fine runs see the same Brownian path.
#[derive(Clone, Debug)]
pub struct CoarsenedNoise<S> {
    pub fine: S,
    pub factor: u64,
    buf: Vec<f64>,
}

impl<S: NoiseSource> CoarsenedNoise<S> {
    pub fn new(fine: S, factor: u64) -> Self {
        assert!(factor >= 1);
        let buf = vec![0.0; fine.dim()];
        CoarsenedNoise { fine, factor, buf }
    }
}

impl<S: NoiseSource> NoiseSource for CoarsenedNoise<S> {
    fn dim(&self) -> usize {
        self.fine.dim()
    }

    fn dt(&self) -> f64 {
        self.fine.dt() * self.factor as f64
    }

    fn fill(&mut self, step: u64, out: &mut [f64]) {
        out.iter_mut().for_each(|x| *x = 0.0);
        for j in 0..self.factor {
            self.fine.fill(step * self.factor + j, &mut self.buf);
            for (o, b) in out.iter_mut().zip(&self.buf) {
                *o += b;
            }
        }
    }
}

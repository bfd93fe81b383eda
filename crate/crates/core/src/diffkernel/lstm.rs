use super::ops::{matvec, matvec_transposed, sigmoid};
use super::tensor::{ParamSet, Parameter};
use crate::rng::Rng;
use crate::{Error, Result};

/// Standard LSTM cell with input, forget and output gates.
///
/// Gate pre-activations are stacked as `[i; f; o; g]`, each of size `hidden`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    pub w_x: Parameter,
    pub w_h: Parameter,
    pub bias: Parameter,
    input: usize,
    hidden: usize,
}

/// Forward context needed by [`LstmCell::backward`].
#[derive(Debug, Clone)]
pub struct LstmCache {
    x: Vec<f64>,
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    /// Activated gates `[i; f; o; g]`.
    gates: Vec<f64>,
    tanh_c: Vec<f64>,
}

impl LstmCell {
    pub fn new(prefix: &str, input: usize, hidden: usize) -> Self {
        Self {
            w_x: Parameter::zeros(format!("{prefix}.w_x"), &[4 * hidden, input]),
            w_h: Parameter::zeros(format!("{prefix}.w_h"), &[4 * hidden, hidden]),
            bias: Parameter::zeros(format!("{prefix}.bias"), &[4 * hidden]),
            input,
            hidden,
        }
    }

    pub fn init(&mut self, bound: f64, rng: &mut Rng) {
        super::init_uniform(&mut self.w_x, bound, rng);
        super::init_uniform(&mut self.w_h, bound, rng);
        super::init_uniform(&mut self.bias, bound, rng);
    }

    pub fn input_size(&self) -> usize {
        self.input
    }

    pub fn hidden_size(&self) -> usize {
        self.hidden
    }

    /// Checked entry point; [`LstmCell::step`] skips the shape checks.
    pub fn forward(
        &self,
        x: &[f64],
        h_prev: &[f64],
        c_prev: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>, LstmCache)> {
        if x.len() != self.input {
            return Err(Error::dim("lstm_cell input", self.input, x.len()));
        }
        if h_prev.len() != self.hidden || c_prev.len() != self.hidden {
            return Err(Error::dim(
                "lstm_cell state",
                self.hidden,
                format!("{}/{}", h_prev.len(), c_prev.len()),
            ));
        }
        Ok(self.step(x, h_prev, c_prev))
    }

    pub fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> (Vec<f64>, Vec<f64>, LstmCache) {
        let z = self.hidden;
        let mut pre = matvec(self.w_x.value.data(), 4 * z, self.input, x);
        let rec = matvec(self.w_h.value.data(), 4 * z, z, h_prev);
        for ((p, r), b) in pre.iter_mut().zip(&rec).zip(self.bias.value.data()) {
            *p += r + b;
        }
        let mut gates = pre;
        for (k, g) in gates.iter_mut().enumerate() {
            *g = if k < 3 * z { sigmoid(*g) } else { g.tanh() };
        }
        let mut c = vec![0.0; z];
        let mut h = vec![0.0; z];
        let mut tanh_c = vec![0.0; z];
        for j in 0..z {
            let (i, f, o, g) = (gates[j], gates[z + j], gates[2 * z + j], gates[3 * z + j]);
            c[j] = f * c_prev[j] + i * g;
            tanh_c[j] = c[j].tanh();
            h[j] = o * tanh_c[j];
        }
        let cache = LstmCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates,
            tanh_c,
        };
        (h, c, cache)
    }

    /// Accumulates weight gradients; returns `(dx, dh_prev, dc_prev)`.
    pub fn backward(
        &mut self,
        cache: &LstmCache,
        dh: &[f64],
        dc: &[f64],
    ) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let z = self.hidden;
        let g = &cache.gates;
        let mut dpre = vec![0.0; 4 * z];
        let mut dc_prev = vec![0.0; z];
        for j in 0..z {
            let (i, f, o, gg) = (g[j], g[z + j], g[2 * z + j], g[3 * z + j]);
            let tc = cache.tanh_c[j];
            let dc_total = dc[j] + dh[j] * o * (1.0 - tc * tc);
            let d_o = dh[j] * tc;
            let d_i = dc_total * gg;
            let d_f = dc_total * cache.c_prev[j];
            let d_g = dc_total * i;
            dc_prev[j] = dc_total * f;
            dpre[j] = d_i * i * (1.0 - i);
            dpre[z + j] = d_f * f * (1.0 - f);
            dpre[2 * z + j] = d_o * o * (1.0 - o);
            dpre[3 * z + j] = d_g * (1.0 - gg * gg);
        }
        accumulate_outer(self.w_x.grad.data_mut(), self.input, &dpre, &cache.x);
        accumulate_outer(self.w_h.grad.data_mut(), z, &dpre, &cache.h_prev);
        for (b, d) in self.bias.grad.data_mut().iter_mut().zip(&dpre) {
            *b += d;
        }
        let dx = matvec_transposed(self.w_x.value.data(), 4 * z, self.input, &dpre);
        let dh_prev = matvec_transposed(self.w_h.value.data(), 4 * z, z, &dpre);
        (dx, dh_prev, dc_prev)
    }
}

fn accumulate_outer(grad: &mut [f64], cols: usize, g: &[f64], x: &[f64]) {
    for (row, &gi) in grad.chunks_exact_mut(cols).zip(g) {
        if gi == 0.0 {
            continue;
        }
        for (d, &xj) in row.iter_mut().zip(x) {
            *d += gi * xj;
        }
    }
}

impl ParamSet for LstmCell {
    fn params(&self) -> Vec<&Parameter> {
        vec![&self.w_x, &self.w_h, &self.bias]
    }

    fn params_mut(&mut self) -> Vec<&mut Parameter> {
        vec![&mut self.w_x, &mut self.w_h, &mut self.bias]
    }
}

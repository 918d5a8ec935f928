//! Gated recurrent unit with explicit backward pass.
//!
//! ```text
//! r = σ(Uʳx + Wʳy + bʳ)
//! z = σ(Uᶻx + Wᶻy + bᶻ)
//! ỹ = tanh(Uˢx + r ∘ (Wˢy) + bˢ)
//! y' = z ∘ y + (1 − z) ∘ ỹ
//! ```

use rand::Rng;

use super::tensor::{axpy, sigmoid, uniform_vec, Matrix};
use super::NeuralError;

/// Weights of one GRU: `U*` act on the input, `W*` on the previous state.
#[derive(Clone, Debug, PartialEq)]
pub struct GruParams {
    pub u_r: Matrix,
    pub w_r: Matrix,
    pub b_r: Vec<f64>,
    pub u_z: Matrix,
    pub w_z: Matrix,
    pub b_z: Vec<f64>,
    pub u_s: Matrix,
    pub w_s: Matrix,
    pub b_s: Vec<f64>,
}

/// Intermediate values of one step, kept for the backward pass.
#[derive(Clone, Debug)]
pub struct GruTrace {
    pub x: Vec<f64>,
    pub y_prev: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    cand: Vec<f64>,
    ws_y: Vec<f64>,
    pub y: Vec<f64>,
}

impl GruParams {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        GruParams {
            u_r: Matrix::zeros(hidden, input),
            w_r: Matrix::zeros(hidden, hidden),
            b_r: vec![0.0; hidden],
            u_z: Matrix::zeros(hidden, input),
            w_z: Matrix::zeros(hidden, hidden),
            b_z: vec![0.0; hidden],
            u_s: Matrix::zeros(hidden, input),
            w_s: Matrix::zeros(hidden, hidden),
            b_s: vec![0.0; hidden],
        }
    }

    pub fn uniform<R: Rng>(input: usize, hidden: usize, scale: f64, rng: &mut R) -> Self {
        GruParams {
            u_r: Matrix::uniform(hidden, input, scale, rng),
            w_r: Matrix::uniform(hidden, hidden, scale, rng),
            b_r: uniform_vec(hidden, scale, rng),
            u_z: Matrix::uniform(hidden, input, scale, rng),
            w_z: Matrix::uniform(hidden, hidden, scale, rng),
            b_z: uniform_vec(hidden, scale, rng),
            u_s: Matrix::uniform(hidden, input, scale, rng),
            w_s: Matrix::uniform(hidden, hidden, scale, rng),
            b_s: uniform_vec(hidden, scale, rng),
        }
    }

    pub fn input_dim(&self) -> usize {
        self.u_r.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w_r.rows()
    }

    /// Named slices in a fixed order, with shapes.
    pub(crate) fn tensors(&self) -> [(&'static str, Vec<usize>, &[f64]); 9] {
        let (h, i) = (self.hidden_dim(), self.input_dim());
        [
            ("u_r", vec![h, i], self.u_r.data()),
            ("w_r", vec![h, h], self.w_r.data()),
            ("b_r", vec![h], &self.b_r),
            ("u_z", vec![h, i], self.u_z.data()),
            ("w_z", vec![h, h], self.w_z.data()),
            ("b_z", vec![h], &self.b_z),
            ("u_s", vec![h, i], self.u_s.data()),
            ("w_s", vec![h, h], self.w_s.data()),
            ("b_s", vec![h], &self.b_s),
        ]
    }

    pub(crate) fn tensors_mut(&mut self) -> [&mut [f64]; 9] {
        [
            self.u_r.data_mut(),
            self.w_r.data_mut(),
            &mut self.b_r,
            self.u_z.data_mut(),
            self.w_z.data_mut(),
            &mut self.b_z,
            self.u_s.data_mut(),
            self.w_s.data_mut(),
            &mut self.b_s,
        ]
    }

    pub fn forward(&self, x: &[f64], y_prev: &[f64]) -> GruTrace {
        let h = self.hidden_dim();
        let gate = |u: &Matrix, w: &Matrix, b: &[f64]| {
            let mut a = b.to_vec();
            u.matvec_add(x, &mut a);
            w.matvec_add(y_prev, &mut a);
            a.into_iter().map(sigmoid).collect::<Vec<_>>()
        };
        let r = gate(&self.u_r, &self.w_r, &self.b_r);
        let z = gate(&self.u_z, &self.w_z, &self.b_z);
        let ws_y = self.w_s.matvec(y_prev);
        let mut cand = self.b_s.clone();
        self.u_s.matvec_add(x, &mut cand);
        for i in 0..h {
            cand[i] = (cand[i] + r[i] * ws_y[i]).tanh();
        }
        let y = (0..h).map(|i| z[i] * y_prev[i] + (1.0 - z[i]) * cand[i]).collect();
        GruTrace { x: x.to_vec(), y_prev: y_prev.to_vec(), r, z, cand, ws_y, y }
    }

    /// Accumulates parameter gradients into `grads` and returns `(dx, dy_prev)`.
    pub fn backward(&self, t: &GruTrace, dy: &[f64], grads: &mut GruParams) -> (Vec<f64>, Vec<f64>) {
        let h = self.hidden_dim();
        let mut dx = vec![0.0; self.input_dim()];
        let mut dy_prev = vec![0.0; h];
        let mut da_s = vec![0.0; h];
        let mut da_z = vec![0.0; h];
        let mut da_r = vec![0.0; h];
        for i in 0..h {
            dy_prev[i] = dy[i] * t.z[i];
            let dz = dy[i] * (t.y_prev[i] - t.cand[i]);
            let dcand = dy[i] * (1.0 - t.z[i]);
            da_s[i] = dcand * (1.0 - t.cand[i] * t.cand[i]);
            let dr = da_s[i] * t.ws_y[i];
            da_z[i] = dz * t.z[i] * (1.0 - t.z[i]);
            da_r[i] = dr * t.r[i] * (1.0 - t.r[i]);
        }
        let dws_y: Vec<f64> = (0..h).map(|i| da_s[i] * t.r[i]).collect();

        grads.u_s.add_outer(&da_s, &t.x);
        axpy(1.0, &da_s, &mut grads.b_s);
        self.u_s.t_matvec_add(&da_s, &mut dx);
        grads.w_s.add_outer(&dws_y, &t.y_prev);
        self.w_s.t_matvec_add(&dws_y, &mut dy_prev);

        for (da, u, w, gu, gw, gb) in [
            (&da_z, &self.u_z, &self.w_z, &mut grads.u_z, &mut grads.w_z, &mut grads.b_z),
            (&da_r, &self.u_r, &self.w_r, &mut grads.u_r, &mut grads.w_r, &mut grads.b_r),
        ] {
            gu.add_outer(da, &t.x);
            gw.add_outer(da, &t.y_prev);
            axpy(1.0, da, gb);
            u.t_matvec_add(da, &mut dx);
            w.t_matvec_add(da, &mut dy_prev);
        }
        (dx, dy_prev)
    }
}

/// One GRU step with shape checks.
pub fn gru_step(x: &[f64], y_prev: &[f64], params: &GruParams) -> Result<Vec<f64>, NeuralError> {
    if x.len() != params.input_dim() || y_prev.len() != params.hidden_dim() {
        return Err(NeuralError::ShapeError(format!(
            "gru expects input {} / hidden {}, got {} / {}",
            params.input_dim(),
            params.hidden_dim(),
            x.len(),
            y_prev.len()
        )));
    }
    Ok(params.forward(x, y_prev).y)
}

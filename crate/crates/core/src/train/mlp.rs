//! Dense tanh network mapping `(x, y)` to all slot values.

use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{BoundingBox, Point2};

/// Parameters are stored flat, layer by layer: weights `(out x in)` row-major,
/// then biases.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub sizes: Vec<usize>,
    pub params: Vec<f64>,
    /// Input box, mapped affinely to `[-1, 1]^2`.
    pub bbox: BoundingBox,
}

/// Activations kept from a forward pass for the backward pass.
pub struct MlpCache {
    /// `acts[0]` is the normalized input, `acts[l]` the output of layer `l`.
    acts: Vec<Array2<f64>>,
}

impl Mlp {
    /// Uniform Xavier weights and zero biases.
    pub fn new(sizes: Vec<usize>, bbox: BoundingBox, seed: u64) -> Mlp {
        assert!(sizes.len() >= 2 && sizes[0] == 2, "input layer must have 2 units");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = Vec::new();
        for w in sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
            params.extend((0..fan_in * fan_out).map(|_| rng.gen_range(-a..a)));
            params.extend(std::iter::repeat_n(0.0, fan_out));
        }
        Mlp { sizes, params, bbox }
    }

    /// `depth` hidden layers of `width` units.
    pub fn with_hidden(n_out: usize, depth: usize, width: usize, bbox: BoundingBox, seed: u64) -> Mlp {
        let mut sizes = vec![2];
        sizes.extend(std::iter::repeat_n(width, depth));
        sizes.push(n_out);
        Mlp::new(sizes, bbox, seed)
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn n_outputs(&self) -> usize {
        *self.sizes.last().unwrap()
    }

    fn offsets(&self) -> Vec<(usize, usize, usize, usize)> {
        let mut out = Vec::new();
        let mut at = 0;
        for w in self.sizes.windows(2) {
            out.push((at, w[0], w[1], at + w[0] * w[1]));
            at += w[0] * w[1] + w[1];
        }
        out
    }

    fn layer<'a>(&self, params: &'a [f64], l: usize) -> (ArrayView2<'a, f64>, ArrayView1<'a, f64>) {
        let (w0, fan_in, fan_out, b0) = self.offsets()[l];
        let w = ArrayView2::from_shape((fan_out, fan_in), &params[w0..b0]).unwrap();
        let b = ArrayView1::from(&params[b0..b0 + fan_out]);
        (w, b)
    }

    fn normalize(&self, pts: &[Point2]) -> Array2<f64> {
        let b = self.bbox;
        let mut x = Array2::zeros((pts.len(), 2));
        for (k, p) in pts.iter().enumerate() {
            x[[k, 0]] = 2.0 * (p.x - b.x0) / (b.x1 - b.x0) - 1.0;
            x[[k, 1]] = 2.0 * (p.y - b.y0) / (b.y1 - b.y0) - 1.0;
        }
        x
    }

    /// Outputs `(points x n_out)` and the cache for [`Mlp::backward`].
    pub fn forward(&self, pts: &[Point2]) -> (Array2<f64>, MlpCache) {
        let n_layers = self.sizes.len() - 1;
        let mut acts = vec![self.normalize(pts)];
        for l in 0..n_layers {
            let (w, b) = self.layer(&self.params, l);
            let mut z = acts[l].dot(&w.t());
            z += &b;
            if l + 1 < n_layers {
                z.mapv_inplace(f64::tanh);
            }
            acts.push(z);
        }
        let out = acts.last().unwrap().clone();
        (out, MlpCache { acts })
    }

    /// Outputs only, in row-major order.
    pub fn eval(&self, pts: &[Point2]) -> Vec<f64> {
        let (out, _) = self.forward(pts);
        out.into_raw_vec_and_offset().0
    }

    /// Parameter gradient for output adjoint `d_out` (`points x n_out`).
    pub fn backward(&self, cache: &MlpCache, d_out: ArrayView2<'_, f64>) -> Vec<f64> {
        let n_layers = self.sizes.len() - 1;
        let offs = self.offsets();
        let mut grad = vec![0.0; self.params.len()];
        let mut dz = d_out.to_owned();
        for l in (0..n_layers).rev() {
            let (w0, fan_in, fan_out, b0) = offs[l];
            let dw = dz.t().dot(&cache.acts[l]);
            grad[w0..b0].copy_from_slice(dw.as_slice().unwrap());
            let db = dz.sum_axis(Axis(0));
            grad[b0..b0 + fan_out].copy_from_slice(db.as_slice().unwrap());
            if l > 0 {
                let (w, _) = self.layer(&self.params, l);
                let mut da = dz.dot(&w);
                let a = &cache.acts[l];
                da.zip_mut_with(a, |d, &t| *d *= 1.0 - t * t);
                dz = da;
            }
            debug_assert_eq!(dz.shape()[1], if l > 0 { fan_in } else { dz.shape()[1] });
        }
        grad
    }

    /// Slice of the output matrix for one sample, mainly for tests.
    pub fn output_row(out: &Array2<f64>, k: usize) -> Vec<f64> {
        out.slice(s![k, ..]).to_vec()
    }
}

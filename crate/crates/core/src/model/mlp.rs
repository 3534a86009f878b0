//! Fully connected ReLU network with a linear head, over a contiguous slice
//! of a parameter vector. Weights are row-major `[out, in]`.

use super::params::Layout;

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    /// Layer widths, input first, output last.
    sizes: Vec<usize>,
    /// Offset of each layer's weight block (bias follows it).
    offsets: Vec<usize>,
    start: usize,
    len: usize,
}

impl Mlp {
    /// Registers `{prefix}.{l}.weight` / `{prefix}.{l}.bias` blocks in `layout`.
    pub fn register(layout: &mut Layout, prefix: &str, sizes: &[usize]) -> Mlp {
        assert!(sizes.len() >= 2, "an MLP needs input and output sizes");
        let start = layout.len();
        let mut offsets = Vec::with_capacity(sizes.len() - 1);
        for (l, w) in sizes.windows(2).enumerate() {
            offsets.push(layout.push(format!("{prefix}.{l}.weight"), vec![w[1], w[0]]));
            layout.push(format!("{prefix}.{l}.bias"), vec![w[1]]);
        }
        Mlp {
            sizes: sizes.to_vec(),
            offsets,
            start,
            len: layout.len() - start,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    /// Range of the MLP's parameters in the flat vector.
    pub fn param_range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.len
    }

    fn n_layers(&self) -> usize {
        self.offsets.len()
    }

    /// Returns the activations of every layer, input first, output last.
    pub fn forward(&self, params: &[f64], input: &[f64]) -> Vec<Vec<f64>> {
        debug_assert_eq!(input.len(), self.input_dim());
        let mut acts = Vec::with_capacity(self.sizes.len());
        acts.push(input.to_vec());
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &params[self.offsets[l]..self.offsets[l] + n_in * n_out];
            let b = &params[self.offsets[l] + n_in * n_out..self.offsets[l] + n_in * n_out + n_out];
            let prev = &acts[l];
            let last = l + 1 == self.n_layers();
            let out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    let z = b[o] + dot(row, prev);
                    if last {
                        z
                    } else {
                        z.max(0.0)
                    }
                })
                .collect();
            acts.push(out);
        }
        acts
    }

    /// Backpropagates `upstream` (gradient w.r.t. the output). Parameter
    /// gradients, scaled by `scale`, are added into `grad` (indexed like the
    /// MLP's own parameter slice, i.e. `grad[0]` is the first MLP parameter).
    /// Returns the gradient w.r.t. the input.
    pub fn backward(
        &self,
        params: &[f64],
        acts: &[Vec<f64>],
        upstream: &[f64],
        scale: f64,
        grad: &mut [f64],
    ) -> Vec<f64> {
        let mut g_out: Vec<f64> = upstream.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w_off = self.offsets[l];
            let local = w_off - self.start;
            let w = &params[w_off..w_off + n_in * n_out];
            let prev = &acts[l];
            let mut g_in = vec![0.0; n_in];
            for o in 0..n_out {
                let go = g_out[o];
                if go == 0.0 {
                    continue;
                }
                let sg = scale * go;
                let grow = &mut grad[local + o * n_in..local + (o + 1) * n_in];
                for (gw, &a) in grow.iter_mut().zip(prev) {
                    *gw += sg * a;
                }
                grad[local + n_in * n_out + o] += sg;
                let row = &w[o * n_in..(o + 1) * n_in];
                for (gi, &wv) in g_in.iter_mut().zip(row) {
                    *gi += go * wv;
                }
            }
            if l > 0 {
                // ReLU gate: active iff the post-activation is positive.
                for (gi, &a) in g_in.iter_mut().zip(prev) {
                    if a <= 0.0 {
                        *gi = 0.0;
                    }
                }
            }
            g_out = g_in;
        }
        g_out
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

//! Recommender `f_θ`: id and categorical embeddings, a mean-pooled viewing
//! history, optional elementwise interaction terms, and an MLP with a linear head.

use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use super::params::{Layout, ParamVector, SparseGrad};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecommenderSpec {
    /// Embedding rows for users; row 0 is the unknown-user row.
    pub n_users: usize,
    pub n_items: usize,
    pub emb_dim: usize,
    /// Hashed categorical table size (shared by all categorical features).
    pub cat_table_size: usize,
    pub n_categorical: usize,
    pub n_numeric: usize,
    pub use_history: bool,
    /// Adds `user ⊙ item` and `history ⊙ item` to the MLP input.
    pub interactions: bool,
    pub hidden: Vec<usize>,
}

impl RecommenderSpec {
    /// A purely linear scorer over numeric inputs: `score = wᵀx + b`.
    pub fn linear(n_numeric: usize) -> Self {
        RecommenderSpec {
            n_users: 0,
            n_items: 0,
            emb_dim: 0,
            cat_table_size: 0,
            n_categorical: 0,
            n_numeric,
            use_history: false,
            interactions: false,
            hidden: Vec::new(),
        }
    }

    fn mlp_input_dim(&self) -> usize {
        let d = self.emb_dim;
        let mut dim = 2 * d + self.n_categorical * d + self.n_numeric;
        if self.use_history {
            dim += d;
        }
        if self.interactions {
            dim += d;
            if self.use_history {
                dim += d;
            }
        }
        dim
    }
}

/// Encoded model input for one (user, item) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct RecInput {
    pub user: usize,
    pub item: usize,
    pub categorical: Vec<usize>,
    /// Item rows of the user's viewing history.
    pub history: Arc<[usize]>,
    pub numeric: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RecommenderModel {
    pub spec: RecommenderSpec,
    pub params: ParamVector,
    user_off: usize,
    item_off: usize,
    cat_off: usize,
    mlp: Mlp,
}

struct Forward {
    acts: Vec<Vec<f64>>,
    hist: Vec<f64>,
}

impl RecommenderModel {
    pub fn layout_for(spec: &RecommenderSpec) -> (Layout, [usize; 3], Mlp) {
        let mut layout = Layout::new();
        let d = spec.emb_dim;
        let user_off = layout.push("user_emb", vec![spec.n_users, d]);
        let item_off = layout.push("item_emb", vec![spec.n_items, d]);
        let cat_off = layout.push(
            "cat_emb",
            vec![if spec.n_categorical > 0 { spec.cat_table_size } else { 0 }, d],
        );
        let mut sizes = vec![spec.mlp_input_dim()];
        sizes.extend(&spec.hidden);
        sizes.push(1);
        let mlp = Mlp::register(&mut layout, "mlp", &sizes);
        (layout, [user_off, item_off, cat_off], mlp)
    }

    pub fn zeros(spec: RecommenderSpec) -> Self {
        let (layout, offs, mlp) = Self::layout_for(&spec);
        RecommenderModel {
            params: ParamVector::zeros(Arc::new(layout)),
            spec,
            user_off: offs[0],
            item_off: offs[1],
            cat_off: offs[2],
            mlp,
        }
    }

    pub fn init<R: Rng>(spec: RecommenderSpec, rng: &mut R) -> Self {
        let mut m = Self::zeros(spec);
        m.params = ParamVector::glorot(m.params.layout.clone(), rng);
        m
    }

    /// Same architecture with different parameters.
    pub fn with_params(&self, params: ParamVector) -> Result<Self> {
        if !params.same_layout(&self.params) {
            return Err(Error::Shape("recommender parameter layout mismatch".into()));
        }
        Ok(RecommenderModel { params, ..self.clone() })
    }

    fn check(&self, x: &RecInput) -> Result<()> {
        let s = &self.spec;
        if s.emb_dim > 0 {
            if x.user >= s.n_users {
                return Err(Error::Index(format!("user row {} >= {}", x.user, s.n_users)));
            }
            if x.item >= s.n_items {
                return Err(Error::Index(format!("item row {} >= {}", x.item, s.n_items)));
            }
            if let Some(h) = x.history.iter().find(|&&h| h >= s.n_items) {
                return Err(Error::Index(format!("history item row {h} >= {}", s.n_items)));
            }
            if let Some(c) = x.categorical.iter().find(|&&c| c >= s.cat_table_size) {
                return Err(Error::Index(format!("categorical row {c} >= {}", s.cat_table_size)));
            }
        }
        if x.categorical.len() != s.n_categorical {
            return Err(Error::Shape(format!(
                "{} categorical inputs, expected {}",
                x.categorical.len(),
                s.n_categorical
            )));
        }
        if x.numeric.len() != s.n_numeric {
            return Err(Error::Shape(format!(
                "{} numeric inputs, expected {}",
                x.numeric.len(),
                s.n_numeric
            )));
        }
        Ok(())
    }

    fn row(&self, base: usize, r: usize) -> &[f64] {
        let d = self.spec.emb_dim;
        &self.params.values[base + r * d..base + (r + 1) * d]
    }

    fn run(&self, x: &RecInput) -> Result<Forward> {
        self.check(x)?;
        let d = self.spec.emb_dim;
        let u = self.row(self.user_off, x.user);
        let it = self.row(self.item_off, x.item);
        let mut input = Vec::with_capacity(self.mlp.input_dim());
        input.extend_from_slice(u);
        input.extend_from_slice(it);
        let mut hist = vec![0.0; d];
        if self.spec.use_history {
            if !x.history.is_empty() {
                for &h in x.history.iter() {
                    for (a, b) in hist.iter_mut().zip(self.row(self.item_off, h)) {
                        *a += b;
                    }
                }
                let inv = 1.0 / x.history.len() as f64;
                hist.iter_mut().for_each(|v| *v *= inv);
            }
            input.extend_from_slice(&hist);
        }
        for &c in &x.categorical {
            input.extend_from_slice(self.row(self.cat_off, c));
        }
        if self.spec.interactions {
            input.extend(u.iter().zip(it).map(|(a, b)| a * b));
            if self.spec.use_history {
                input.extend(hist.iter().zip(it).map(|(a, b)| a * b));
            }
        }
        input.extend_from_slice(&x.numeric);
        let acts = self.mlp.forward(&self.params.values, &input);
        Ok(Forward { acts, hist })
    }

    pub fn forward(&self, x: &RecInput) -> Result<f64> {
        Ok(self.run(x)?.acts.last().expect("output layer")[0])
    }

    /// Score and exact gradient of the score w.r.t. every parameter it touches.
    pub fn forward_with_grad(&self, x: &RecInput) -> Result<(f64, SparseGrad)> {
        let fwd = self.run(x)?;
        let score = fwd.acts.last().expect("output layer")[0];
        let mut grad = SparseGrad::new();
        let range = self.mlp.param_range();
        let g_in = {
            let mlp_grad = grad.push_zeros(range.start, range.len());
            self.mlp.backward(&self.params.values, &fwd.acts, &[1.0], 1.0, mlp_grad)
        };
        let d = self.spec.emb_dim;
        if d == 0 {
            return Ok((score, grad));
        }
        let u = self.row(self.user_off, x.user);
        let it = self.row(self.item_off, x.item);
        let mut pos = 0;
        let mut take = |n: usize| {
            let s = &g_in[pos..pos + n];
            pos += n;
            s
        };
        let mut g_u = take(d).to_vec();
        let mut g_it = take(d).to_vec();
        let mut g_hist = if self.spec.use_history {
            take(d).to_vec()
        } else {
            Vec::new()
        };
        let g_cats: Vec<&[f64]> = (0..x.categorical.len()).map(|_| take(d)).collect();
        if self.spec.interactions {
            let g_ui = take(d);
            for j in 0..d {
                g_u[j] += g_ui[j] * it[j];
                g_it[j] += g_ui[j] * u[j];
            }
            if self.spec.use_history {
                let g_hi = take(d);
                for j in 0..d {
                    g_hist[j] += g_hi[j] * it[j];
                    g_it[j] += g_hi[j] * fwd.hist[j];
                }
            }
        }
        grad.push(self.user_off + x.user * d, &g_u);
        grad.push(self.item_off + x.item * d, &g_it);
        if self.spec.use_history && !x.history.is_empty() {
            let inv = 1.0 / x.history.len() as f64;
            g_hist.iter_mut().for_each(|v| *v *= inv);
            for &h in x.history.iter() {
                grad.push(self.item_off + h * d, &g_hist);
            }
        }
        for (&c, g) in x.categorical.iter().zip(g_cats) {
            grad.push(self.cat_off + c * d, g);
        }
        Ok((score, grad))
    }

    /// Dense gradient of the score w.r.t. θ.
    pub fn param_grad(&self, x: &RecInput) -> Result<ParamVector> {
        let (_, g) = self.forward_with_grad(x)?;
        Ok(g.to_dense(self.params.layout.clone()))
    }
}

pub fn recommender_forward(model: &RecommenderModel, x: &RecInput) -> Result<f64> {
    model.forward(x)
}

pub fn recommender_param_grad(model: &RecommenderModel, x: &RecInput) -> Result<ParamVector> {
    model.param_grad(x)
}

use std::ops::Range;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::Scalar;
use crate::error::{Error, Result};

/// Hyperparameters that fix the layout of a [`ResidualMlp`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NetShape {
    pub in_dim: usize,
    pub out_dim: usize,
    pub width: usize,
    /// Number of residual blocks.
    pub depth: usize,
    /// Number of Fourier frequencies; the embedding has `2 * rff_dim` entries.
    /// Zero disables the noise-level input.
    pub rff_dim: usize,
}

impl NetShape {
    pub fn embed_dim(&self) -> usize {
        2 * self.rff_dim
    }

    /// Width of the first projection's input: data plus embedding.
    pub fn input_width(&self) -> usize {
        self.in_dim + self.embed_dim()
    }

    /// Number of trainable parameters. Frozen Fourier frequencies are excluded.
    pub fn param_count(&self) -> usize {
        let w = self.width;
        self.input_width() * w + w + self.depth * (w * w + w) + w * self.out_dim + self.out_dim
    }

    fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.out_dim == 0 || self.width == 0 {
            return Err(Error::invalid(format!("degenerate network shape {self:?}")));
        }
        Ok(())
    }

    fn layout(&self) -> Layout {
        let w = self.width;
        let mut at = 0;
        let mut next = |len: usize| {
            let r = at..at + len;
            at += len;
            r
        };
        let w_in = next(self.input_width() * w);
        let b_in = next(w);
        let blocks = (0..self.depth).map(|_| (next(w * w), next(w))).collect();
        let w_out = next(w * self.out_dim);
        let b_out = next(self.out_dim);
        Layout {
            w_in,
            b_in,
            blocks,
            w_out,
            b_out,
        }
    }
}

/// Parameter ranges within the flat vector, in storage order.
#[derive(Debug, Clone)]
struct Layout {
    w_in: Range<usize>,
    b_in: Range<usize>,
    blocks: Vec<(Range<usize>, Range<usize>)>,
    w_out: Range<usize>,
    b_out: Range<usize>,
}

/// MLP with residual hidden blocks `h <- linear(relu(h)) + h`.
///
/// The per-row noise code is embedded with frozen random Fourier features and
/// concatenated to the input ahead of the first projection. The output
/// projection reads the last hidden state directly.
///
/// Parameters live in one flat vector in this order: input projection weight
/// (`input_width × width`, row-major) and bias, then for each block its
/// `width × width` weight and bias, then the output weight (`width × out_dim`)
/// and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualMlp<T> {
    shape: NetShape,
    rff: Vec<T>,
    params: Vec<T>,
}

/// Activations kept by [`ResidualMlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache<T> {
    shape: NetShape,
    batch: usize,
    input: Vec<T>,
    hidden: Vec<Vec<T>>,
    active: Vec<Vec<T>>,
}

impl<T> ForwardCache<T> {
    pub fn batch(&self) -> usize {
        self.batch
    }
}

/// Output of [`ResidualMlp::backward`].
#[derive(Debug, Clone)]
pub struct Gradients<T> {
    /// Same layout as [`ResidualMlp::params`].
    pub params: Vec<T>,
    /// Gradient with respect to the data input, `batch × in_dim`.
    pub input: Vec<T>,
}

fn add_bias<T: Scalar>(out: &mut [T], bias: &[T]) {
    for row in out.chunks_exact_mut(bias.len()) {
        row.copy_from_slice(bias);
    }
}

fn column_sums<T: Scalar>(m: &[T], cols: usize, out: &mut [T]) {
    for row in m.chunks_exact(cols) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
}

impl<T: Scalar> ResidualMlp<T> {
    /// Fan-in scaled Gaussian weights (std `sqrt(2 / fan_in)`), zero biases and
    /// standard-normal Fourier frequencies.
    pub fn new<R: Rng + ?Sized>(shape: NetShape, rng: &mut R) -> Result<Self> {
        shape.validate()?;
        let rff = (0..shape.rff_dim)
            .map(|_| T::of(StandardNormal.sample(rng)))
            .collect();
        let mut params = vec![T::zero(); shape.param_count()];
        let layout = shape.layout();
        let mut fill = |range: Range<usize>, fan_in: usize| {
            let std = (2.0 / fan_in as f64).sqrt();
            for p in &mut params[range] {
                let z: f64 = StandardNormal.sample(rng);
                *p = T::of(z * std);
            }
        };
        fill(layout.w_in.clone(), shape.input_width());
        for (w, _) in &layout.blocks {
            fill(w.clone(), shape.width);
        }
        fill(layout.w_out.clone(), shape.width);
        Ok(Self { shape, rff, params })
    }

    pub fn from_parts(shape: NetShape, rff: Vec<T>, params: Vec<T>) -> Result<Self> {
        shape.validate()?;
        if rff.len() != shape.rff_dim || params.len() != shape.param_count() {
            return Err(Error::invalid(format!(
                "parameter vectors ({} frequencies, {} params) do not match shape {shape:?}",
                rff.len(),
                params.len()
            )));
        }
        Ok(Self { shape, rff, params })
    }

    pub fn shape(&self) -> NetShape {
        self.shape
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn rff_frequencies(&self) -> &[T] {
        &self.rff
    }

    /// Named parameter tensors in storage order, for inspection.
    pub fn named_params(&self) -> Vec<(String, &[T])> {
        let l = self.shape.layout();
        let mut out = vec![
            ("input.weight".to_string(), &self.params[l.w_in]),
            ("input.bias".to_string(), &self.params[l.b_in]),
        ];
        for (k, (w, b)) in l.blocks.into_iter().enumerate() {
            out.push((format!("block{k}.weight"), &self.params[w]));
            out.push((format!("block{k}.bias"), &self.params[b]));
        }
        out.push(("output.weight".to_string(), &self.params[l.w_out]));
        out.push(("output.bias".to_string(), &self.params[l.b_out]));
        out
    }

    /// Mutable view of residual block `k`'s `(weight, bias)`.
    pub fn block_mut(&mut self, k: usize) -> (&mut [T], &mut [T]) {
        let (w, b) = self.shape.layout().blocks[k].clone();
        let (head, tail) = self.params.split_at_mut(b.start);
        (&mut head[w], &mut tail[..b.len()])
    }

    pub fn cast<U: Scalar>(&self) -> ResidualMlp<U> {
        let conv = |v: &[T]| v.iter().map(|x| U::of(x.f64())).collect();
        ResidualMlp {
            shape: self.shape,
            rff: conv(&self.rff),
            params: conv(&self.params),
        }
    }

    /// `[sin(2π f_i c)..., cos(2π f_i c)...]`.
    pub fn embed(&self, c: T, out: &mut [T]) {
        let r = self.rff.len();
        let two_pi = T::of(std::f64::consts::TAU);
        for (i, &f) in self.rff.iter().enumerate() {
            let phase = two_pi * f * c;
            out[i] = phase.sin();
            out[r + i] = phase.cos();
        }
    }

    fn check_inputs(&self, x: &[T], c_noise: Option<&[T]>) -> Result<usize> {
        let s = self.shape;
        if !x.len().is_multiple_of(s.in_dim) {
            return Err(Error::invalid(format!(
                "input of {} values is not a multiple of in_dim {}",
                x.len(),
                s.in_dim
            )));
        }
        let batch = x.len() / s.in_dim;
        match (c_noise, s.rff_dim) {
            (Some(c), r) if r > 0 => {
                if c.len() != batch {
                    return Err(Error::invalid(format!(
                        "{} noise codes for a batch of {batch}",
                        c.len()
                    )));
                }
                if c.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Numeric("non-finite noise code".into()));
                }
            }
            (None, 0) => {}
            (Some(_), _) => return Err(Error::invalid("network has no noise embedding")),
            (None, _) => return Err(Error::invalid("network requires per-row noise codes")),
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric("non-finite network input".into()));
        }
        Ok(batch)
    }

    /// Batched forward pass over row-major `x` (`batch × in_dim`).
    pub fn forward(&self, x: &[T], c_noise: Option<&[T]>) -> Result<(Vec<T>, ForwardCache<T>)> {
        let batch = self.check_inputs(x, c_noise)?;
        let s = self.shape;
        let (iw, w) = (s.input_width(), s.width);
        let l = s.layout();
        let p = &self.params;

        let mut input = vec![T::zero(); batch * iw];
        for (i, row) in input.chunks_exact_mut(iw).enumerate() {
            row[..s.in_dim].copy_from_slice(&x[i * s.in_dim..(i + 1) * s.in_dim]);
            if let Some(c) = c_noise {
                self.embed(c[i], &mut row[s.in_dim..]);
            }
        }

        let mut h = vec![T::zero(); batch * w];
        add_bias(&mut h, &p[l.b_in.clone()]);
        T::gemm(false, false, batch, iw, w, T::one(), &input, &p[l.w_in.clone()], T::one(), &mut h);

        let mut hidden = Vec::with_capacity(s.depth + 1);
        let mut active = Vec::with_capacity(s.depth);
        for (wr, br) in &l.blocks {
            let a: Vec<T> = h.iter().map(|&v| v.max(T::zero())).collect();
            let mut next = h.clone();
            for row in next.chunks_exact_mut(w) {
                for (v, &b) in row.iter_mut().zip(&p[br.clone()]) {
                    *v += b;
                }
            }
            T::gemm(false, false, batch, w, w, T::one(), &a, &p[wr.clone()], T::one(), &mut next);
            hidden.push(std::mem::replace(&mut h, next));
            active.push(a);
        }

        let mut out = vec![T::zero(); batch * s.out_dim];
        add_bias(&mut out, &p[l.b_out.clone()]);
        T::gemm(false, false, batch, w, s.out_dim, T::one(), &h, &p[l.w_out.clone()], T::one(), &mut out);
        hidden.push(h);

        Ok((
            out,
            ForwardCache {
                shape: s,
                batch,
                input,
                hidden,
                active,
            },
        ))
    }

    /// Forward pass that discards the cache.
    pub fn predict(&self, x: &[T], c_noise: Option<&[T]>) -> Result<Vec<T>> {
        self.forward(x, c_noise).map(|(out, _)| out)
    }

    /// Exact reverse-mode gradients of `sum(out_grad ⊙ output)`.
    pub fn backward(&self, cache: &ForwardCache<T>, out_grad: &[T]) -> Result<Gradients<T>> {
        self.backward_impl(cache, out_grad, true)
    }

    /// Input gradient only; parameter gradients are not accumulated.
    pub fn input_grad(&self, cache: &ForwardCache<T>, out_grad: &[T]) -> Result<Vec<T>> {
        Ok(self.backward_impl(cache, out_grad, false)?.input)
    }

    fn backward_impl(
        &self,
        cache: &ForwardCache<T>,
        out_grad: &[T],
        want_params: bool,
    ) -> Result<Gradients<T>> {
        let s = self.shape;
        if cache.shape != s || cache.hidden.len() != s.depth + 1 {
            return Err(Error::InvalidState(format!(
                "forward cache for {:?} used with network {s:?}",
                cache.shape
            )));
        }
        let batch = cache.batch;
        if out_grad.len() != batch * s.out_dim {
            return Err(Error::InvalidState(format!(
                "output gradient has {} values, expected {}",
                out_grad.len(),
                batch * s.out_dim
            )));
        }
        let (iw, w) = (s.input_width(), s.width);
        let l = s.layout();
        let p = &self.params;
        let mut g = if want_params {
            vec![T::zero(); p.len()]
        } else {
            Vec::new()
        };

        let last = &cache.hidden[s.depth];
        if want_params {
            T::gemm(true, false, w, batch, s.out_dim, T::one(), last, out_grad, T::zero(), &mut g[l.w_out.clone()]);
            column_sums(out_grad, s.out_dim, &mut g[l.b_out.clone()]);
        }
        let mut dh = vec![T::zero(); batch * w];
        T::gemm(false, true, batch, s.out_dim, w, T::one(), out_grad, &p[l.w_out.clone()], T::zero(), &mut dh);

        let mut da = vec![T::zero(); batch * w];
        for (k, (wr, br)) in l.blocks.iter().enumerate().rev() {
            if want_params {
                T::gemm(true, false, w, batch, w, T::one(), &cache.active[k], &dh, T::zero(), &mut g[wr.clone()]);
                column_sums(&dh, w, &mut g[br.clone()]);
            }
            T::gemm(false, true, batch, w, w, T::one(), &dh, &p[wr.clone()], T::zero(), &mut da);
            for ((d, &a), &h) in dh.iter_mut().zip(&da).zip(&cache.hidden[k]) {
                if h > T::zero() {
                    *d += a;
                }
            }
        }

        if want_params {
            T::gemm(true, false, iw, batch, w, T::one(), &cache.input, &dh, T::zero(), &mut g[l.w_in.clone()]);
            column_sums(&dh, w, &mut g[l.b_in.clone()]);
        }
        let mut dz = vec![T::zero(); batch * iw];
        T::gemm(false, true, batch, w, iw, T::one(), &dh, &p[l.w_in.clone()], T::zero(), &mut dz);
        let input = if iw == s.in_dim {
            dz
        } else {
            dz.chunks_exact(iw).flat_map(|r| r[..s.in_dim].iter().copied()).collect()
        };
        Ok(Gradients { params: g, input })
    }
}

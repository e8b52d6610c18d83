//! Batch normalization. The complex form whitens each channel's
//! `(Re, Im)` pair with the inverse square root of its 2x2 covariance, then
//! applies a learned 2x2 scale `gamma` and complex shift `beta`.

use std::f64::consts::FRAC_1_SQRT_2;

use super::layers::{Cache, Param};
use super::{Domain, Tensor};
use crate::error::{invalid, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

type M2 = [[f64; 2]; 2];

#[derive(Clone, Debug, PartialEq)]
pub(crate) struct BatchNorm {
    pub domain: Domain,
    pub channels: usize,
    /// Complex: `[rr, ri, ir, ii]` per channel. Real: one scale per channel.
    pub gamma: Param,
    /// Complex: `[re, im]` per channel. Real: one shift per channel.
    pub beta: Param,
    /// Complex: `[re, im]` per channel.
    pub running_mean: Vec<f64>,
    /// Complex: `[rr, ri, ii]` per channel. Real: variance per channel.
    pub running_var: Vec<f64>,
}

#[derive(Debug)]
pub(crate) struct BnCache {
    /// Centered values, per real channel.
    centered: Vec<Vec<f64>>,
    /// Normalized values before the affine step, per real channel.
    normalized: Vec<Vec<f64>>,
    /// Complex: whitening matrix and its partials in `(V_rr, V_ri, V_ii)`.
    whiten: Vec<[M2; 4]>,
    /// Real: `1/sqrt(var + eps)` per channel.
    inv_std: Vec<f64>,
    batch_mean: Vec<f64>,
    batch_var: Vec<f64>,
}

/// `(A)^{-1/2}` for symmetric positive definite `A = [[a, b], [b, d]]`, with
/// the derivatives of every entry in `a`, `b` and `d`.
pub(crate) fn inv_sqrt_2x2(a: f64, b: f64, d: f64) -> [M2; 4] {
    let s = (a * d - b * b).sqrt();
    let t = (a + d + 2.0 * s).sqrt();
    let q = s * t;
    let p = [[d + s, -b], [-b, a + s]];
    let w = [[p[0][0] / q, p[0][1] / q], [p[1][0] / q, p[1][1] / q]];

    let ds = [d / (2.0 * s), -b / s, a / (2.0 * s)];
    let dtr = [1.0, 0.0, 1.0];
    let mut out = [w, [[0.0; 2]; 2], [[0.0; 2]; 2], [[0.0; 2]; 2]];
    for v in 0..3 {
        let dt = (dtr[v] + 2.0 * ds[v]) / (2.0 * t);
        let dq = ds[v] * t + s * dt;
        let dp = match v {
            0 => [[ds[0], 0.0], [0.0, 1.0 + ds[0]]],
            1 => [[ds[1], -1.0], [-1.0, ds[1]]],
            _ => [[1.0 + ds[2], 0.0], [0.0, ds[2]]],
        };
        for i in 0..2 {
            for j in 0..2 {
                out[v + 1][i][j] = dp[i][j] / q - p[i][j] * dq / (q * q);
            }
        }
    }
    out
}

impl BatchNorm {
    pub fn new(domain: Domain, channels: usize) -> Self {
        match domain {
            Domain::Complex => {
                let mut gamma = Param::zeros(4 * channels);
                let mut var = vec![0.0; 3 * channels];
                for c in 0..channels {
                    gamma.value[4 * c] = FRAC_1_SQRT_2;
                    gamma.value[4 * c + 3] = FRAC_1_SQRT_2;
                    var[3 * c] = 0.5;
                    var[3 * c + 2] = 0.5;
                }
                Self {
                    domain,
                    channels,
                    gamma,
                    beta: Param::zeros(2 * channels),
                    running_mean: vec![0.0; 2 * channels],
                    running_var: var,
                }
            }
            Domain::Real => Self {
                domain,
                channels,
                gamma: Param::filled(channels, 1.0),
                beta: Param::zeros(channels),
                running_mean: vec![0.0; channels],
                running_var: vec![1.0; channels],
            },
        }
    }

    fn real_channels(&self) -> usize {
        self.channels * self.domain.width()
    }

    /// Gathers the values of real channel `rc` across the batch.
    fn gather(x: &Tensor, n_rc: usize, rc: usize) -> Vec<f64> {
        let b = x.batch();
        let s = x.sample_len() / n_rc;
        let mut out = Vec::with_capacity(b * s);
        for i in 0..b {
            out.extend_from_slice(&x.sample(i)[rc * s..(rc + 1) * s]);
        }
        out
    }

    fn scatter(out: &mut Tensor, n_rc: usize, rc: usize, vals: &[f64]) {
        let b = out.batch();
        let per = out.sample_len();
        let s = per / n_rc;
        let d = out.data_mut();
        for i in 0..b {
            d[i * per + rc * s..][..s].copy_from_slice(&vals[i * s..(i + 1) * s]);
        }
    }

    pub fn forward(&self, x: &Tensor, train: bool) -> Result<(Tensor, Cache)> {
        let n_rc = self.real_channels();
        if x.shape().len() < 2 || x.shape()[1] != n_rc {
            return Err(invalid(format!("batch norm expects {n_rc} real channels, got {:?}", x.shape())));
        }
        if train && x.batch() < 2 {
            return Err(invalid("batch norm needs at least two samples in training mode"));
        }
        let mut out = Tensor::zeros(x.shape());
        let mut cache = BnCache {
            centered: Vec::new(),
            normalized: Vec::new(),
            whiten: Vec::new(),
            inv_std: Vec::new(),
            batch_mean: Vec::new(),
            batch_var: Vec::new(),
        };
        match self.domain {
            Domain::Complex => {
                let ch = self.channels;
                for c in 0..ch {
                    let xr = Self::gather(x, n_rc, c);
                    let xi = Self::gather(x, n_rc, ch + c);
                    let n = xr.len() as f64;
                    let (mr, mi, vrr, vri, vii) = if train {
                        let mr = xr.iter().sum::<f64>() / n;
                        let mi = xi.iter().sum::<f64>() / n;
                        let (mut a, mut b, mut d) = (0.0, 0.0, 0.0);
                        for (&r, &i) in xr.iter().zip(&xi) {
                            a += (r - mr) * (r - mr);
                            b += (r - mr) * (i - mi);
                            d += (i - mi) * (i - mi);
                        }
                        (mr, mi, a / n, b / n, d / n)
                    } else {
                        let m = &self.running_mean[2 * c..];
                        let v = &self.running_var[3 * c..];
                        (m[0], m[1], v[0], v[1], v[2])
                    };
                    let wd = inv_sqrt_2x2(vrr + BN_EPS, vri, vii + BN_EPS);
                    let w = wd[0];
                    let g = &self.gamma.value[4 * c..4 * c + 4];
                    let (br, bi) = (self.beta.value[2 * c], self.beta.value[2 * c + 1]);
                    let cr: Vec<f64> = xr.iter().map(|v| v - mr).collect();
                    let ci: Vec<f64> = xi.iter().map(|v| v - mi).collect();
                    let mut nr = Vec::with_capacity(cr.len());
                    let mut ni = Vec::with_capacity(cr.len());
                    let mut yr = Vec::with_capacity(cr.len());
                    let mut yi = Vec::with_capacity(cr.len());
                    for (&r, &i) in cr.iter().zip(&ci) {
                        let tr = w[0][0] * r + w[0][1] * i;
                        let ti = w[1][0] * r + w[1][1] * i;
                        nr.push(tr);
                        ni.push(ti);
                        yr.push(g[0] * tr + g[1] * ti + br);
                        yi.push(g[2] * tr + g[3] * ti + bi);
                    }
                    Self::scatter(&mut out, n_rc, c, &yr);
                    Self::scatter(&mut out, n_rc, ch + c, &yi);
                    if train {
                        cache.batch_mean.extend([mr, mi]);
                        cache.batch_var.extend([vrr, vri, vii]);
                        cache.whiten.push(wd);
                        cache.centered.push(cr);
                        cache.centered.push(ci);
                        cache.normalized.push(nr);
                        cache.normalized.push(ni);
                    }
                }
                // keep per-real-channel order: all real parts, then imaginary
                if train {
                    reorder_pairs(&mut cache.centered);
                    reorder_pairs(&mut cache.normalized);
                }
            }
            Domain::Real => {
                for c in 0..self.channels {
                    let xv = Self::gather(x, n_rc, c);
                    let n = xv.len() as f64;
                    let (m, var) = if train {
                        let m = xv.iter().sum::<f64>() / n;
                        (m, xv.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / n)
                    } else {
                        (self.running_mean[c], self.running_var[c])
                    };
                    let inv = 1.0 / (var + BN_EPS).sqrt();
                    let cv: Vec<f64> = xv.iter().map(|v| v - m).collect();
                    let nv: Vec<f64> = cv.iter().map(|v| v * inv).collect();
                    let (g, b) = (self.gamma.value[c], self.beta.value[c]);
                    let y: Vec<f64> = nv.iter().map(|v| g * v + b).collect();
                    Self::scatter(&mut out, n_rc, c, &y);
                    if train {
                        cache.batch_mean.push(m);
                        cache.batch_var.push(var);
                        cache.inv_std.push(inv);
                        cache.centered.push(cv);
                        cache.normalized.push(nv);
                    }
                }
            }
        }
        Ok((out, if train { Cache::Bn(cache) } else { Cache::None }))
    }

    /// Folds a training batch's statistics into the running estimates.
    pub fn update_running(&mut self, cache: &BnCache) {
        let m = BN_MOMENTUM;
        for (r, b) in self.running_mean.iter_mut().zip(&cache.batch_mean) {
            *r = m * *r + (1.0 - m) * b;
        }
        for (r, b) in self.running_var.iter_mut().zip(&cache.batch_var) {
            *r = m * *r + (1.0 - m) * b;
        }
    }

    pub fn backward(&mut self, cache: &BnCache, g: &Tensor) -> Result<Tensor> {
        let n_rc = self.real_channels();
        let mut gx = Tensor::zeros(g.shape());
        match self.domain {
            Domain::Complex => {
                let ch = self.channels;
                for c in 0..ch {
                    let gr = Self::gather(g, n_rc, c);
                    let gi = Self::gather(g, n_rc, ch + c);
                    let (cr, ci) = (&cache.centered[c], &cache.centered[ch + c]);
                    let (tr, ti) = (&cache.normalized[c], &cache.normalized[ch + c]);
                    let wd = &cache.whiten[c];
                    let w = wd[0];
                    let gam = [
                        self.gamma.value[4 * c],
                        self.gamma.value[4 * c + 1],
                        self.gamma.value[4 * c + 2],
                        self.gamma.value[4 * c + 3],
                    ];
                    let n = gr.len();
                    let mut g_gamma = [0.0; 4];
                    let mut g_beta = [0.0; 2];
                    let mut gw = [[0.0; 2]; 2];
                    let mut gcr = vec![0.0; n];
                    let mut gci = vec![0.0; n];
                    for k in 0..n {
                        g_gamma[0] += gr[k] * tr[k];
                        g_gamma[1] += gr[k] * ti[k];
                        g_gamma[2] += gi[k] * tr[k];
                        g_gamma[3] += gi[k] * ti[k];
                        g_beta[0] += gr[k];
                        g_beta[1] += gi[k];
                        let gtr = gam[0] * gr[k] + gam[2] * gi[k];
                        let gti = gam[1] * gr[k] + gam[3] * gi[k];
                        gw[0][0] += gtr * cr[k];
                        gw[0][1] += gtr * ci[k];
                        gw[1][0] += gti * cr[k];
                        gw[1][1] += gti * ci[k];
                        gcr[k] = w[0][0] * gtr + w[1][0] * gti;
                        gci[k] = w[0][1] * gtr + w[1][1] * gti;
                    }
                    let dot = |m: &M2| gw[0][0] * m[0][0] + gw[0][1] * m[0][1] + gw[1][0] * m[1][0] + gw[1][1] * m[1][1];
                    let (ga, gb, gd) = (dot(&wd[1]), dot(&wd[2]), dot(&wd[3]));
                    let nf = n as f64;
                    for k in 0..n {
                        gcr[k] += (2.0 * ga * cr[k] + gb * ci[k]) / nf;
                        gci[k] += (gb * cr[k] + 2.0 * gd * ci[k]) / nf;
                    }
                    let mr = gcr.iter().sum::<f64>() / nf;
                    let mi = gci.iter().sum::<f64>() / nf;
                    gcr.iter_mut().for_each(|v| *v -= mr);
                    gci.iter_mut().for_each(|v| *v -= mi);
                    Self::scatter(&mut gx, n_rc, c, &gcr);
                    Self::scatter(&mut gx, n_rc, ch + c, &gci);
                    for (a, b) in self.gamma.grad[4 * c..4 * c + 4].iter_mut().zip(g_gamma) {
                        *a += b;
                    }
                    self.beta.grad[2 * c] += g_beta[0];
                    self.beta.grad[2 * c + 1] += g_beta[1];
                }
            }
            Domain::Real => {
                for c in 0..self.channels {
                    let gv = Self::gather(g, n_rc, c);
                    let xh = &cache.normalized[c];
                    let inv = cache.inv_std[c];
                    let gam = self.gamma.value[c];
                    let nf = gv.len() as f64;
                    let sum_g: f64 = gv.iter().sum();
                    let sum_gx: f64 = gv.iter().zip(xh).map(|(a, b)| a * b).sum();
                    self.gamma.grad[c] += sum_gx;
                    self.beta.grad[c] += sum_g;
                    let out: Vec<f64> = gv
                        .iter()
                        .zip(xh)
                        .map(|(&gk, &xk)| gam * inv * (gk - sum_g / nf - xk * sum_gx / nf))
                        .collect();
                    Self::scatter(&mut gx, n_rc, c, &out);
                }
            }
        }
        Ok(gx)
    }
}

/// `[r0, i0, r1, i1, ...]` to `[r0, r1, ..., i0, i1, ...]`.
fn reorder_pairs(v: &mut Vec<Vec<f64>>) {
    let (mut re, mut im) = (Vec::new(), Vec::new());
    for (k, x) in v.drain(..).enumerate() {
        if k % 2 == 0 {
            re.push(x);
        } else {
            im.push(x);
        }
    }
    v.extend(re);
    v.extend(im);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn inverse_square_root() {
        let (a, b, d) = (2.0, 0.7, 1.3);
        let w = inv_sqrt_2x2(a, b, d)[0];
        // W A W = I
        let m = [[a, b], [b, d]];
        let mut wa = [[0.0; 2]; 2];
        for i in 0..2 {
            for j in 0..2 {
                wa[i][j] = (0..2).map(|k| w[i][k] * m[k][j]).sum();
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..2).map(|k| wa[i][k] * w[k][j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
        assert!((w[0][1] - w[1][0]).abs() < 1e-15);
    }

    #[test]
    fn partials_match_differences() {
        let (a, b, d) = (1.7, -0.4, 0.9);
        let h = 1e-6;
        let all = inv_sqrt_2x2(a, b, d);
        for v in 0..3 {
            let bump = |s: f64| {
                let mut p = [a, b, d];
                p[v] += s;
                inv_sqrt_2x2(p[0], p[1], p[2])[0]
            };
            let (up, dn) = (bump(h), bump(-h));
            for i in 0..2 {
                for j in 0..2 {
                    let fd = (up[i][j] - dn[i][j]) / (2.0 * h);
                    assert!((fd - all[v + 1][i][j]).abs() < 1e-7, "v={v} ({i},{j})");
                }
            }
        }
    }
}

"""Small conditioned MLPs with manual backprop and an AdamW optimizer.

One architecture serves both the trajectory decoder and the energy fields: a
ReLU main net whose hidden layers are modulated (per-sample scale + shift) by
a ReLU hyper net evaluated on a conditioning vector.  Everything is plain
float64 numpy, deterministic given the seed.
"""

from __future__ import annotations

import numpy as np

__all__ = ["FilmMLP", "AdamW"]


def _he_init(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    return rng.standard_normal((fan_in, fan_out)) * np.sqrt(2.0 / fan_in)


class FilmMLP:
    """y = out(relu(gamma_l * (W_l a + b_l) + beta_l)), [gamma|beta] = hyper(c).

    The output layer is zero-initialized, so an untrained net is identically
    zero with zero gradients.  gamma is parameterized as 1 + raw hyper output.
    """

    def __init__(self, in_dim, cond_dim, hidden, hyper_hidden, out_dim=1, seed=0):
        rng = np.random.default_rng(seed)
        self.in_dim, self.cond_dim, self.out_dim = in_dim, cond_dim, out_dim
        self.hidden = list(hidden)
        self.hyper_hidden = list(hyper_hidden)
        p = {}
        prev = in_dim
        for i, h in enumerate(self.hidden):
            p[f"W{i}"] = _he_init(rng, prev, h)
            p[f"b{i}"] = np.zeros(h)
            prev = h
        p["Wout"] = np.zeros((prev, out_dim))
        p["bout"] = np.zeros(out_dim)
        mod_dim = 2 * sum(self.hidden)
        prev = cond_dim
        for i, h in enumerate(self.hyper_hidden):
            p[f"hW{i}"] = _he_init(rng, prev, h)
            p[f"hb{i}"] = np.zeros(h)
            prev = h
        p["hWout"] = np.zeros((prev, mod_dim))
        p["hbout"] = np.zeros(mod_dim)
        self.params = p

    # -- hyper net ---------------------------------------------------------
    def _hyper_forward(self, c):
        p = self.params
        acts = [c]
        a = c
        for i in range(len(self.hyper_hidden)):
            a = np.maximum(a @ p[f"hW{i}"] + p[f"hb{i}"], 0.0)
            acts.append(a)
        m = a @ p["hWout"] + p["hbout"]
        return m, acts

    def _split_mod(self, m):
        gammas, betas = [], []
        off = 0
        for h in self.hidden:
            gammas.append(1.0 + m[:, off : off + h])
            betas.append(m[:, off + h : off + 2 * h])
            off += 2 * h
        return gammas, betas

    # -- main net ----------------------------------------------------------
    def forward(self, x, c, cache_out=None):
        """x: (B, in_dim), c: (B, cond_dim) or (cond_dim,). Returns (B, out_dim)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        c = np.asarray(c, dtype=float)
        if c.ndim == 1:
            c = np.broadcast_to(c, (len(x), len(c)))
        p = self.params
        m, hyper_acts = self._hyper_forward(c)
        gammas, betas = self._split_mod(m)
        a = x
        zs, zts, acts = [], [], [x]
        for i in range(len(self.hidden)):
            z = a @ p[f"W{i}"] + p[f"b{i}"]
            zt = gammas[i] * z + betas[i]
            a = np.maximum(zt, 0.0)
            zs.append(z)
            zts.append(zt)
            acts.append(a)
        y = a @ p["Wout"] + p["bout"]
        if cache_out is not None:
            cache_out.update(
                x=x, c=c, zs=zs, zts=zts, acts=acts,
                gammas=gammas, betas=betas, hyper_acts=hyper_acts,
            )
        return y

    def backward(self, cache, dy):
        """Gradients of sum(dy * y) w.r.t. all params, x, and c."""
        p = self.params
        grads = {}
        acts, zs, zts = cache["acts"], cache["zs"], cache["zts"]
        gammas = cache["gammas"]
        grads["Wout"] = acts[-1].T @ dy
        grads["bout"] = dy.sum(axis=0)
        da = dy @ p["Wout"].T
        dmods = []
        for i in reversed(range(len(self.hidden))):
            dzt = da * (zts[i] > 0)
            dgamma = dzt * zs[i]
            dbeta = dzt
            dz = dzt * gammas[i]
            grads[f"W{i}"] = acts[i].T @ dz
            grads[f"b{i}"] = dz.sum(axis=0)
            da = dz @ p[f"W{i}"].T
            dmods.append((dgamma, dbeta))
        dx = da
        dm = np.concatenate(
            [np.concatenate(pair, axis=1) for pair in reversed(dmods)], axis=1
        )
        # hyper net backward
        hyper_acts = cache["hyper_acts"]
        grads["hWout"] = hyper_acts[-1].T @ dm
        grads["hbout"] = dm.sum(axis=0)
        dh = dm @ p["hWout"].T
        for i in reversed(range(len(self.hyper_hidden))):
            dh = dh * (hyper_acts[i + 1] > 0)
            grads[f"hW{i}"] = hyper_acts[i].T @ dh
            grads[f"hb{i}"] = dh.sum(axis=0)
            dh = dh @ p[f"hW{i}"].T
        dc = dh
        return grads, dx, dc

    def grad_x(self, x, c):
        """(y, dy/dx) for scalar-output nets; conditioning treated as constant.

        At ReLU kinks the (z > 0) subgradient is used.  Batched over rows.
        """
        if self.out_dim != 1:
            raise ValueError("grad_x supports scalar-output nets only")
        cache = {}
        y = self.forward(x, c, cache_out=cache)
        p = self.params
        da = np.tile(p["Wout"][:, 0][None, :], (len(cache["x"]), 1))
        for i in reversed(range(len(self.hidden))):
            dzt = da * (cache["zts"][i] > 0)
            dz = dzt * cache["gammas"][i]
            da = dz @ p[f"W{i}"].T
        return y[:, 0], da

    # -- serialization -----------------------------------------------------
    def arch(self) -> dict:
        return {
            "in_dim": self.in_dim, "cond_dim": self.cond_dim,
            "hidden": self.hidden, "hyper_hidden": self.hyper_hidden,
            "out_dim": self.out_dim,
        }

    @classmethod
    def from_arch(cls, arch: dict, params: dict) -> "FilmMLP":
        net = cls(**arch)
        for k in net.params:
            net.params[k] = np.asarray(params[k], dtype=float)
        return net


class AdamW:
    """Decoupled weight-decay Adam over a dict of parameter arrays."""

    def __init__(self, params: dict, lr=1e-3, betas=(0.9, 0.999), eps=1e-8, weight_decay=1e-4):
        self.params = params
        self.lr, self.eps, self.weight_decay = lr, eps, weight_decay
        self.b1, self.b2 = betas
        self.t = 0
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}

    def step(self, grads: dict):
        self.t += 1
        bc1 = 1.0 - self.b1**self.t
        bc2 = 1.0 - self.b2**self.t
        for k, g in grads.items():
            p = self.params[k]
            self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
            self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            mh = self.m[k] / bc1
            vh = self.v[k] / bc2
            p -= self.lr * (mh / (np.sqrt(vh) + self.eps) + self.weight_decay * p)

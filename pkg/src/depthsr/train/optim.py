"""Adam with named-parameter diagnostics, and the stepped learning-rate rule."""

import torch


def lr_at_epoch(epoch, config):
    """Learning rate as a pure function of the global epoch number.

    The schedule never resets: the epoch counter runs continuously through
    both training steps, decaying by `lr_decay_factor` after every
    `lr_decay_period` completed epochs.
    """
    if epoch < 1:
        raise ValueError(f"epoch numbering starts at 1, got {epoch}")
    return config.initial_lr * config.lr_decay_factor ** ((epoch - 1) // config.lr_decay_period)


def adam_update(param, grad, m, v, step, lr, beta1, beta2, eps):
    """One bias-corrected Adam update; returns (new_param, new_m, new_v)."""
    m = beta1 * m + (1.0 - beta1) * grad
    v = beta2 * v + (1.0 - beta2) * grad * grad
    m_hat = m / (1.0 - beta1**step)
    v_hat = v / (1.0 - beta2**step)
    return param - lr * m_hat / (v_hat.sqrt() + eps), m, v


class Adam:
    """Adam over a dict of named parameters.

    Hand-rolled so that non-finite gradients abort with the offending
    parameter's name and the whole moment state round-trips exactly through
    checkpoints. Parameters whose grad is None are skipped (they were not part
    of the current graph).
    """

    def __init__(self, named_params, beta1=0.9, beta2=0.99, eps=1e-8):
        self.params = dict(named_params)
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.state = {
            name: {"step": 0, "m": torch.zeros_like(p), "v": torch.zeros_like(p)}
            for name, p in self.params.items()
        }

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None

    @torch.no_grad()
    def step(self, lr):
        # in-place version of adam_update with identical operation grouping,
        # so stepping here and stepping the reference agree bitwise
        for name, p in self.params.items():
            g = p.grad
            if g is None:
                continue
            if not torch.isfinite(g).all():
                raise ValueError(f"non-finite gradient for parameter {name!r}")
            st = self.state[name]
            st["step"] += 1
            m, v = st["m"], st["v"]
            m.mul_(self.beta1).add_((1.0 - self.beta1) * g)
            v.mul_(self.beta2).add_((1.0 - self.beta2) * g * g)
            m_hat = m / (1.0 - self.beta1 ** st["step"])
            v_hat = v / (1.0 - self.beta2 ** st["step"])
            p.sub_((lr * m_hat).div_(v_hat.sqrt_().add_(self.eps)))

    def state_dict(self):
        return {
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "state": {
                name: {"step": st["step"], "m": st["m"].clone(), "v": st["v"].clone()}
                for name, st in self.state.items()
            },
        }

    def load_state_dict(self, payload):
        self.beta1 = payload["beta1"]
        self.beta2 = payload["beta2"]
        self.eps = payload["eps"]
        for name, st in payload["state"].items():
            if name not in self.state:
                raise ValueError(f"optimizer state for unknown parameter {name!r}")
            if st["m"].shape != self.state[name]["m"].shape:
                raise ValueError(
                    f"optimizer state shape mismatch for {name!r}: "
                    f"{tuple(st['m'].shape)} vs {tuple(self.state[name]['m'].shape)}"
                )
            self.state[name] = {"step": int(st["step"]), "m": st["m"].clone(), "v": st["v"].clone()}

"""Two-step training: independent pre-training, then role-exchanging co-training.

Step 1 trains the super-resolution and depth-estimation networks separately on
their task losses. In step 2 each epoch opens by comparing the mean recovery
errors both networks accumulated over the previous epoch: the lower-error
network becomes the teacher (frozen, forward passes without gradients) and the
other trains as student with the combined objective. Both networks run forward
on every batch anyway (the teacher's outputs feed the distillation terms), so
fresh errors for the next decision are accumulated during the epoch at no
extra cost. The structure predictor and both uncertainty gates update every
step-2 epoch regardless of who is student, since they serve both branches.

Batch order is a pure function of (seed, epoch) and the learning rate a pure
function of the epoch, so trajectories are reproducible and interrupted runs
can resume exactly.
"""

import time
from dataclasses import dataclass, field

import numpy as np
import torch

from ..distill import (
    DE,
    DSR,
    RoleAssignment,
    affinity_space_loss,
    distill_loss,
    output_space_loss,
    select_roles,
)
from ..fusion import UncertaintyConv, attention_fuse, structure_loss, uncertainty_map
from ..losses import de_loss, dsr_loss, total_student_loss
from ..models import DENet, DSRNet, SPNet, derive_seed, init_params
from .optim import Adam, lr_at_epoch


class TrainingDiverged(RuntimeError):
    """Raised when any loss component stops being finite."""

    def __init__(self, epoch, batch, components):
        self.epoch = epoch
        self.batch = batch
        self.components = dict(components)
        super().__init__(
            f"non-finite loss at epoch {epoch}, batch {batch}: {self.components}"
        )


@dataclass
class TrainState:
    config: object
    dsrnet: DSRNet
    denet: DENet
    opt_dsr: Adam
    opt_de: Adam
    spnet: SPNet = None
    u_sr: UncertaintyConv = None
    u_de: UncertaintyConv = None
    opt_sp: Adam = None
    opt_unc: Adam = None
    epoch: int = 0
    e_dsr: float = None
    e_de: float = None
    role_history: list = field(default_factory=list)
    log: list = field(default_factory=list)


def _to_channels_last(module):
    return module.to(memory_format=torch.channels_last)


def init_state(config):
    """Fresh networks with per-network seeded initialization.

    Each network's init stream is derived from (seed, name), so the
    super-resolution network starts from identical weights whether or not the
    other networks exist in the run.
    """
    dsrnet = init_params(
        DSRNet(config.scale, config.stage_count, config.channels),
        derive_seed(config.seed, "dsrnet"),
    )
    denet = init_params(
        DENet(config.stage_count, config.channels, config.de_units_per_stage),
        derive_seed(config.seed, "denet"),
    )
    _to_channels_last(dsrnet)
    _to_channels_last(denet)
    return TrainState(
        config=config,
        dsrnet=dsrnet,
        denet=denet,
        opt_dsr=_adam_for(config, dsrnet, "dsrnet"),
        opt_de=_adam_for(config, denet, "denet"),
    )


def _adam_for(config, module, prefix):
    return Adam(
        dict(module.named_parameters(prefix=prefix)),
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.epsilon,
    )


def _ensure_step2_modules(state, config):
    if not config.use_structure or state.spnet is not None:
        return
    fused_channels = 2 * config.channels
    width = config.spnet_width if config.spnet_width else None
    state.spnet = _to_channels_last(
        init_params(SPNet(fused_channels, width), derive_seed(config.seed, "spnet"))
    )
    state.u_sr = UncertaintyConv()
    state.u_de = UncertaintyConv()
    state.opt_sp = _adam_for(config, state.spnet, "spnet")
    state.opt_unc = Adam(
        {
            **dict(state.u_sr.named_parameters(prefix="u_sr")),
            **dict(state.u_de.named_parameters(prefix="u_de")),
        },
        beta1=config.beta1,
        beta2=config.beta2,
        eps=config.epsilon,
    )


class _Stacked:
    """Training samples stacked into float32 tensors for batch slicing."""

    @classmethod
    def wrap(cls, data, scale):
        """Pass through an already-stacked set; the ablation runner reuses one."""
        if isinstance(data, cls):
            if data.scale != scale:
                raise ValueError(f"stacked set has scale {data.scale}, config expects {scale}")
            return data
        return cls(data, scale)

    def __init__(self, samples, scale):
        if not samples:
            raise ValueError("empty training set")
        self.scale = scale
        for i, s in enumerate(samples):
            if s.scale != scale:
                raise ValueError(f"sample {i} has scale {s.scale}, config expects {scale}")
        cl = torch.channels_last
        self.d_lr = torch.from_numpy(
            np.stack([s.d_lr.data for s in samples])[:, None].astype(np.float32)
        ).contiguous(memory_format=cl)
        self.d_hr = torch.from_numpy(
            np.stack([s.d_hr.data for s in samples])[:, None].astype(np.float32)
        ).contiguous(memory_format=cl)
        self.rgb = torch.from_numpy(
            np.stack([s.rgb.data for s in samples]).transpose(0, 3, 1, 2).astype(np.float32)
        ).contiguous(memory_format=cl)
        self.s_gt = torch.from_numpy(
            np.stack([s.s_gt.data for s in samples])[:, None].astype(np.float32)
        ).contiguous(memory_format=cl)

    def __len__(self):
        return self.d_lr.shape[0]

    def batch(self, idx):
        cl = torch.channels_last
        take = lambda t: t[idx].contiguous(memory_format=cl)
        return take(self.d_lr), take(self.d_hr), take(self.rgb), take(self.s_gt)


def epoch_batches(n, batch_size, seed, epoch):
    """Seed-and-epoch-determined sample order, split into batches."""
    order = np.random.default_rng(np.random.SeedSequence([seed, epoch])).permutation(n)
    return [
        torch.from_numpy(order[i : i + batch_size].copy())
        for i in range(0, n, batch_size)
    ]


def _check_finite(components, epoch, batch):
    for name, value in components.items():
        if not np.isfinite(value):
            raise TrainingDiverged(epoch, batch, components)


class FrozenTeacherCache:
    """Forward results of the frozen teacher over the full training set.

    The teacher's parameters only change in epochs where it trained as the
    student, so its no-gradient forward outputs are identical from one
    teaching epoch to the next; recomputing them per batch is pure waste.
    Entries are keyed by a content digest of the network's parameters, which
    makes reuse exact (a hit returns what recomputation would return) and
    safe to share between runs that train on the same sample tensors.
    """

    def __init__(self):
        self._key = None
        self._final = None
        self._sides = None
        self._features = None

    @torch.no_grad()
    def refresh(self, net, inputs, batch_size, need_sides, need_features):
        key = (parameter_checksum(net), need_sides, need_features, len(inputs))
        if key == self._key:
            return
        cl = torch.channels_last
        finals, sides, features = [], [], []
        for i in range(0, len(inputs), batch_size):
            x = inputs[i : i + batch_size].contiguous(memory_format=cl)
            stack = net(x, side_outputs=need_sides)
            finals.append(stack.final_output)
            if need_sides:
                sides.append(stack.side_outputs)
            if need_features:
                features.append(stack.features)
        self._final = torch.cat(finals)
        self._sides = [torch.cat(s) for s in zip(*sides)] if need_sides else None
        self._features = [torch.cat(f) for f in zip(*features)] if need_features else None
        self._key = key

    def batch(self, idx):
        cl = torch.channels_last
        take = lambda t: t[idx].contiguous(memory_format=cl)
        final = take(self._final)
        sides = [take(s) for s in self._sides] if self._sides is not None else None
        features = [take(f) for f in self._features] if self._features is not None else None
        return final, sides, features


def run_step1(config, data, state=None):
    """Independent pre-training of both networks on their task losses."""
    if state is None:
        state = init_state(config)
    tensors = _Stacked.wrap(data, config.scale)

    for epoch in range(state.epoch + 1, config.step1_epochs + 1):
        t0 = time.perf_counter()
        lr = lr_at_epoch(epoch, config)
        final_epoch = epoch == config.step1_epochs
        sums = {"l_dsr": 0.0, "l_de": 0.0}
        err_sum_sr = err_sum_de = 0.0
        seen = 0
        for bi, idx in enumerate(epoch_batches(len(tensors), config.batch_size, config.seed, epoch)):
            d_lr, d_hr, rgb, _ = tensors.batch(idx)

            sr_final = state.dsrnet(d_lr, side_outputs=False).final_output
            l_sr = dsr_loss(sr_final, d_hr)
            de_final = state.denet(rgb, side_outputs=False).final_output
            l_de = de_loss(de_final, d_hr, config.weights.lam)
            batch_losses = {"l_dsr": l_sr.item(), "l_de": l_de.item()}
            _check_finite(batch_losses, epoch, bi)

            state.opt_dsr.zero_grad()
            l_sr.backward()
            state.opt_dsr.step(lr)
            state.opt_de.zero_grad()
            l_de.backward()
            state.opt_de.step(lr)
            b = idx.shape[0]
            sums["l_dsr"] += batch_losses["l_dsr"] * b
            sums["l_de"] += batch_losses["l_de"] * b
            seen += b
            if final_epoch:
                with torch.no_grad():
                    err_sum_sr += float((sr_final - d_hr).abs().mean(dim=(1, 2, 3)).sum())
                    err_sum_de += float((de_final - d_hr).abs().mean(dim=(1, 2, 3)).sum())

        if final_epoch:
            state.e_dsr = err_sum_sr / seen
            state.e_de = err_sum_de / seen
        state.epoch = epoch
        state.log.append(
            {
                "epoch": epoch,
                "step": 1,
                "lr": lr,
                "losses": {k: v / seen for k, v in sums.items()},
                "e_dsr": state.e_dsr if final_epoch else None,
                "e_de": state.e_de if final_epoch else None,
                "teacher": None,
                "wall_time": time.perf_counter() - t0,
            }
        )
    return state


def _seed_error_accumulators(state, tensors):
    """Bootstrap e scores when step 1 ran for zero epochs."""
    with torch.no_grad():
        err_sr = err_de = 0.0
        for i in range(0, len(tensors), state.config.batch_size):
            idx = torch.arange(i, min(i + state.config.batch_size, len(tensors)))
            d_lr, d_hr, rgb, _ = tensors.batch(idx)
            sr = state.dsrnet(d_lr, side_outputs=False).final_output
            de = state.denet(rgb, side_outputs=False).final_output
            err_sr += float((sr - d_hr).abs().mean(dim=(1, 2, 3)).sum())
            err_de += float((de - d_hr).abs().mean(dim=(1, 2, 3)).sum())
    state.e_dsr = err_sr / len(tensors)
    state.e_de = err_de / len(tensors)


def run_step2(state, config, data, force_student=None, teacher_cache=None):
    """Role-exchanging co-training with distillation and structure supervision.

    `force_student` pins the student branch (bypassing error-based selection);
    it exists for protocol verification, not normal training. `teacher_cache`
    may carry a FrozenTeacherCache across calls that train on the same sample
    list (the ablation runner does this); by default each call gets its own.
    """
    if state.epoch < config.step1_epochs:
        raise ValueError(
            f"step 2 requires step 1 to be complete (epoch {state.epoch} < {config.step1_epochs})"
        )
    _ensure_step2_modules(state, config)
    tensors = _Stacked.wrap(data, config.scale)
    if state.e_dsr is None or state.e_de is None:
        _seed_error_accumulators(state, tensors)

    w = config.weights
    zero = torch.zeros(())
    cache = teacher_cache if teacher_cache is not None else FrozenTeacherCache()

    for epoch in range(state.epoch + 1, config.max_epochs + 1):
        t0 = time.perf_counter()
        lr = lr_at_epoch(epoch, config)
        if force_student is None:
            roles = select_roles(state.e_dsr, state.e_de)
        elif force_student == DSR:
            roles = RoleAssignment(teacher=DE, student=DSR, e_dsr=state.e_dsr, e_de=state.e_de)
        else:
            roles = RoleAssignment(teacher=DSR, student=DE, e_dsr=state.e_dsr, e_de=state.e_de)

        dsr_is_student = roles.student == DSR
        student_net = state.dsrnet if dsr_is_student else state.denet
        teacher_net = state.denet if dsr_is_student else state.dsrnet
        student_opt = state.opt_dsr if dsr_is_student else state.opt_de

        need_sides = config.use_output_distill
        need_features = config.use_affinity_distill or config.use_structure
        cache.refresh(
            teacher_net,
            tensors.rgb if dsr_is_student else tensors.d_lr,
            config.batch_size,
            need_sides,
            need_features,
        )

        sums = {"task": 0.0, "l_struc": 0.0, "l_o": 0.0, "l_a": 0.0, "l_distill": 0.0, "total": 0.0}
        err_sum_sr = err_sum_de = 0.0
        seen = 0

        for bi, idx in enumerate(epoch_batches(len(tensors), config.batch_size, config.seed, epoch)):
            d_lr, d_hr, rgb, s_gt = tensors.batch(idx)
            student_in = d_lr if dsr_is_student else rgb

            t_final, t_sides, t_features = cache.batch(idx)
            s_stack = student_net(student_in, side_outputs=need_sides)
            if dsr_is_student:
                task = dsr_loss(s_stack.final_output, d_hr)
                sr_final, de_final = s_stack.final_output, t_final
                sr_sides, de_sides = s_stack.side_outputs, t_sides
                sr_features, de_features = s_stack.features, t_features
            else:
                task = de_loss(s_stack.final_output, d_hr, w.lam)
                sr_final, de_final = t_final, s_stack.final_output
                sr_sides, de_sides = t_sides, s_stack.side_outputs
                sr_features, de_features = t_features, s_stack.features

            l_o = (
                output_space_loss(sr_sides, de_sides)
                if config.use_output_distill
                else zero
            )
            l_a = (
                affinity_space_loss(sr_features, de_features, config.affinity_pool)
                if config.use_affinity_distill
                else zero
            )
            l_dist = distill_loss(l_o, l_a, w.gamma) if config.use_affinity_distill else l_o

            if config.use_structure:
                u_sr = uncertainty_map(sr_final, d_hr, state.u_sr)
                u_de = uncertainty_map(de_final, d_hr, state.u_de)
                fused = attention_fuse(sr_features[-1], de_features[-1], u_sr, u_de)
                l_struc = structure_loss(state.spnet(fused), s_gt)
            else:
                l_struc = zero

            total = total_student_loss(task, l_struc, l_dist, w)
            batch_losses = {
                "task": task.item(),
                "l_struc": l_struc.item(),
                "l_o": l_o.item(),
                "l_a": l_a.item(),
                "l_distill": l_dist.item(),
                "total": total.item(),
            }
            _check_finite(batch_losses, epoch, bi)

            student_opt.zero_grad()
            if config.use_structure:
                state.opt_sp.zero_grad()
                state.opt_unc.zero_grad()
            total.backward()
            student_opt.step(lr)
            if config.use_structure:
                state.opt_sp.step(lr)
                state.opt_unc.step(lr)

            b = idx.shape[0]
            seen += b
            for k, v in batch_losses.items():
                sums[k] += v * b
            with torch.no_grad():
                err_sum_sr += float((sr_final - d_hr).abs().mean(dim=(1, 2, 3)).sum())
                err_sum_de += float((de_final - d_hr).abs().mean(dim=(1, 2, 3)).sum())

        fresh_sr, fresh_de = err_sum_sr / seen, err_sum_de / seen

        state.role_history.append(
            {"epoch": epoch, "e_dsr": roles.e_dsr, "e_de": roles.e_de, "teacher": roles.teacher}
        )
        state.e_dsr, state.e_de = fresh_sr, fresh_de
        state.epoch = epoch
        state.log.append(
            {
                "epoch": epoch,
                "step": 2,
                "lr": lr,
                "losses": {k: v / seen for k, v in sums.items()},
                "student": roles.student,
                "teacher": roles.teacher,
                "e_dsr": fresh_sr,
                "e_de": fresh_de,
                "wall_time": time.perf_counter() - t0,
            }
        )
    return state


def run_plain_dsr(state, config, data, until_epoch):
    """Continue training only the super-resolution network with its task loss.

    Uses the same batch order and schedule as the two-step runs, so it serves
    as the no-guidance reference branch.
    """
    tensors = _Stacked.wrap(data, config.scale)
    for epoch in range(state.epoch + 1, until_epoch + 1):
        t0 = time.perf_counter()
        lr = lr_at_epoch(epoch, config)
        total = 0.0
        seen = 0
        for bi, idx in enumerate(epoch_batches(len(tensors), config.batch_size, config.seed, epoch)):
            d_lr, d_hr, _, _ = tensors.batch(idx)
            loss = dsr_loss(state.dsrnet(d_lr, side_outputs=False).final_output, d_hr)
            _check_finite({"l_dsr": loss.item()}, epoch, bi)
            state.opt_dsr.zero_grad()
            loss.backward()
            state.opt_dsr.step(lr)
            total += loss.item() * idx.shape[0]
            seen += idx.shape[0]
        state.epoch = epoch
        state.log.append(
            {
                "epoch": epoch,
                "step": "plain",
                "lr": lr,
                "losses": {"l_dsr": total / seen},
                "e_dsr": None,
                "e_de": None,
                "teacher": None,
                "wall_time": time.perf_counter() - t0,
            }
        )
    return state


def parameter_checksum(module):
    """Order-stable digest of a module's parameters."""
    import hashlib

    digest = hashlib.sha256()
    for name, p in sorted(module.named_parameters()):
        digest.update(name.encode())
        digest.update(p.detach().contiguous().cpu().numpy().tobytes())
    return digest.hexdigest()

"""Quaternion graph convolution network.

Two branches (joint graph on 2D coordinates, bone graph on 2D rotation
features) of three spatial-temporal convolution blocks each, a squeeze-
excitation gate per branch, then a shared two-layer head that emits one
quaternion per bone per frame. A third branch of the same shape predicts
the root trajectory. Gradients come from the reverse-mode engine in
``autodiff``; there is no framework dependency.

Feature layout is (channels, nodes, frames) throughout the conv stack.
"""

import io as _io
import json
import struct
from dataclasses import dataclass, asdict, field, replace

import numpy as np

from .autodiff import Tensor, as_tensor, concat, unfold_time
from .graph import K_SUBSETS, build_stacks
from .skeleton import OrientationSequence

_CKPT_MAGIC = b"SKQGCKPT"
_CKPT_VERSION = 1


class DivergenceError(RuntimeError):
    """Training loss became non-finite."""

    def __init__(self, epoch):
        super().__init__(f"training diverged at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class QGCNConfig:
    temporal_kernel: int = 10
    kernel_size: int = K_SUBSETS
    channels: tuple = (2, 64, 128, 256)
    fc_hidden: int = 256
    dropout: float = 0.1
    se_reduction: int = 4
    loss_mix: float = 0.5           # weight on the angular term
    learning_rate: float = 0.05
    momentum: float = 0.9
    epochs: int = 200
    seed: int = 0
    input_scale: float = 1e-3       # pixels -> network units
    bn_eps: float = 1e-5
    bn_momentum: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "channels", tuple(int(c) for c in self.channels))
        if self.kernel_size != K_SUBSETS:
            raise ValueError(f"kernel_size must be {K_SUBSETS}")
        if len(self.channels) != 4 or any(c <= 0 for c in self.channels):
            raise ValueError("channels must be four positive widths (in, b1, b2, b3)")
        if self.channels[0] != 2:
            raise ValueError("input channel width must be 2")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError("dropout must be in [0, 1)")
        if not 0.0 <= self.loss_mix <= 1.0:
            raise ValueError("loss_mix must be in [0, 1]")
        if self.temporal_kernel < 1 or self.se_reduction < 1 or self.fc_hidden < 1:
            raise ValueError("temporal_kernel, se_reduction, fc_hidden must be >= 1")


@dataclass
class QGCNModel:
    config: QGCNConfig
    n_joints: int
    n_bones: int
    params: dict                    # name -> Tensor (requires_grad)
    buffers: dict                   # name -> ndarray (batch-norm statistics)
    vertex_adj: np.ndarray          # (K, J, J) normalised
    edge_adj: np.ndarray            # (K, B, B) normalised

    def param_names(self):
        return list(self.params)

    def n_parameters(self):
        return int(sum(p.data.size for p in self.params.values()))


# ---------------------------------------------------------------------------
# layer primitives (Tensor in, Tensor out)


def _channel_map(x, w):
    """1x1 convolution: (C, N, T) x (C, D) -> (D, N, T)."""
    c, n, t = x.data.shape
    z = x.transpose((1, 2, 0)).reshape(n * t, c) @ w
    return z.reshape(n, t, w.data.shape[1]).transpose((2, 0, 1))


def spatial_conv(features, stack, weights):
    """Sum over subsets of normalised-adjacency propagation + 1x1 conv.

    ``features`` is (N, C) for one frame or (C, N, T) for a sequence;
    ``stack`` an AdjacencyStack with ``normalized`` filled (or a raw
    (K, N, N) array); ``weights`` a list of K (C, D) matrices. Returns the
    same kind (array in, array out; Tensor in, Tensor out).
    """
    adj = stack if isinstance(stack, np.ndarray) else stack.normalized
    if adj is None:
        raise ValueError("adjacency stack is not normalised")
    arr_in = not isinstance(features, Tensor)
    x = as_tensor(features)
    single = x.data.ndim == 2
    if single:
        x = x.transpose((1, 0)).reshape(x.data.shape[1], x.data.shape[0], 1)
    c, n, t = x.data.shape
    if adj.shape[1] != n:
        raise ValueError(f"features have {n} nodes, adjacency has {adj.shape[1]}")
    ws = [as_tensor(w) for w in weights]
    if len(ws) != adj.shape[0]:
        raise ValueError("need one weight matrix per subset")
    xt = x.transpose((1, 0, 2)).reshape(n, c * t)
    out = None
    for k in range(adj.shape[0]):
        prop = (Tensor(adj[k]) @ xt).reshape(n, c, t).transpose((1, 0, 2))
        z = _channel_map(prop, ws[k])
        out = z if out is None else out + z
    if single:
        out = out.reshape(out.data.shape[0], n).transpose((1, 0))
    return out.data if arr_in else out


def temporal_conv(features, weight, bias=None, kernel=None):
    """Per-node convolution along frames with channel mixing.

    ``features`` is (C, N, T); ``weight`` is (C * kernel, D) with rows
    ordered channel-major then tap; zero padding keeps the length
    ((kernel-1)//2 left, the rest right).
    """
    arr_in = not isinstance(features, Tensor)
    x = as_tensor(features)
    w = as_tensor(weight)
    c, n, t = x.data.shape
    if kernel is None:
        kernel = w.data.shape[0] // c
    win = unfold_time(x, kernel)                        # (C, N, T, k)
    z = win.transpose((1, 2, 0, 3)).reshape(n * t, c * kernel) @ w
    out = z.reshape(n, t, w.data.shape[1]).transpose((2, 0, 1))
    if bias is not None:
        out = out + as_tensor(bias).reshape(-1, 1, 1)
    return out.data if arr_in else out


def se_block(features, w1, b1, w2, b2):
    """Squeeze-and-excitation: global mean per channel, two affine layers
    (rectifier then logistic gate), output scaled per channel."""
    arr_in = not isinstance(features, Tensor)
    x = as_tensor(features)
    c = x.data.shape[0]
    s = x.mean(axis=(1, 2)).reshape(1, c)
    z = (s @ as_tensor(w1) + as_tensor(b1)).relu()
    gate = (z @ as_tensor(w2) + as_tensor(b2)).sigmoid()
    out = x * gate.reshape(c, 1, 1)
    return out.data if arr_in else out


def _batchnorm(x, gamma, beta, buffers, key, cfg, training, update_stats, axes):
    """Normalise per channel by the running statistics.

    Training updates the running moments from the current sequence before
    normalising. A whole sequence is one training item here, so
    normalising by per-sequence batch moments would erase exactly the
    cross-sequence level information (absolute depth, mean orientation)
    the heads must predict; the slowly tracked global moments keep it.
    """
    if training and update_stats:
        m = x.data.mean(axis=axes)
        v = x.data.var(axis=axes)
        mom = cfg.bn_momentum
        buffers[key + ".running_mean"] *= 1.0 - mom
        buffers[key + ".running_mean"] += mom * m
        buffers[key + ".running_var"] *= 1.0 - mom
        buffers[key + ".running_var"] += mom * v
    shape = [1] * x.data.ndim
    shape[0 if axes != (0,) else 1] = -1
    rm = buffers[key + ".running_mean"].reshape(shape)
    rv = buffers[key + ".running_var"].reshape(shape)
    xhat = (x - rm) * (1.0 / np.sqrt(rv + cfg.bn_eps))
    return xhat * gamma.reshape(shape) + beta.reshape(shape)


# ---------------------------------------------------------------------------
# model construction


def _glorot(rng, fan_in, fan_out, shape):
    std = np.sqrt(2.0 / (fan_in + fan_out))
    return rng.normal(0.0, std, size=shape)


def init_model(config, skel=None, n_joints=None, n_bones=None, stacks=None):
    """Fresh model with seeded initialisation.

    Either pass a skeleton (adjacency built from it) or explicit sizes
    plus prebuilt normalised stacks.
    """
    if skel is not None:
        n_joints, n_bones = skel.n_joints, skel.n_bones
        vs, es = build_stacks(skel)
        vertex_adj, edge_adj = vs.normalized, es.normalized
    else:
        if stacks is None or n_joints is None or n_bones is None:
            raise ValueError("need a skeleton or explicit sizes and stacks")
        vertex_adj, edge_adj = stacks

    rng = np.random.default_rng(config.seed)
    params = {}
    buffers = {}

    def add(name, arr):
        params[name] = Tensor(arr, requires_grad=True)

    def add_branch(branch, n_nodes):
        ch = config.channels
        for i in range(3):
            cin, cout = ch[i], ch[i + 1]
            p = f"{branch}.b{i}"
            for k in range(config.kernel_size):
                add(f"{p}.spatial.w{k}", _glorot(rng, cin, cout, (cin, cout)))
            add(f"{p}.bn.gamma", np.ones(cout))
            add(f"{p}.bn.beta", np.zeros(cout))
            buffers[f"{p}.bn.running_mean"] = np.zeros(cout)
            buffers[f"{p}.bn.running_var"] = np.ones(cout)
            kin = cout * config.temporal_kernel
            add(f"{p}.temporal.weight", _glorot(rng, kin, cout, (kin, cout)))
            add(f"{p}.temporal.bias", np.zeros(cout))
            if cin != cout:
                add(f"{p}.res.weight", _glorot(rng, cin, cout, (cin, cout)))
        c3 = ch[3]
        cr = max(1, c3 // config.se_reduction)
        add(f"{branch}.se.w1", _glorot(rng, c3, cr, (c3, cr)))
        add(f"{branch}.se.b1", np.zeros(cr))
        add(f"{branch}.se.w2", _glorot(rng, cr, c3, (cr, c3)))
        add(f"{branch}.se.b2", np.zeros(c3))

    def add_head(prefix, in_dim, out_dim, out_bias=None):
        h = config.fc_hidden
        add(f"{prefix}.fc1.weight", _glorot(rng, in_dim, h, (in_dim, h)))
        add(f"{prefix}.fc1.bias", np.zeros(h))
        add(f"{prefix}.bn.gamma", np.ones(h))
        add(f"{prefix}.bn.beta", np.zeros(h))
        buffers[f"{prefix}.bn.running_mean"] = np.zeros(h)
        buffers[f"{prefix}.bn.running_var"] = np.ones(h)
        add(f"{prefix}.fc2.weight", _glorot(rng, h, out_dim, (h, out_dim)))
        add(f"{prefix}.fc2.bias", np.zeros(out_dim) if out_bias is None else out_bias)

    add_branch("vertex", n_joints)
    add_branch("edge", n_bones)
    add_branch("traj", n_joints)
    c3 = config.channels[3]
    head_bias = np.tile([1.0, 0.0, 0.0, 0.0], n_bones)   # start near identity
    add_head("head", (n_joints + n_bones) * c3, n_bones * 4, head_bias)
    add_head("traj_head", n_joints * c3, 3)

    return QGCNModel(
        config=config,
        n_joints=n_joints,
        n_bones=n_bones,
        params=params,
        buffers=buffers,
        vertex_adj=np.asarray(vertex_adj),
        edge_adj=np.asarray(edge_adj),
    )


# ---------------------------------------------------------------------------
# forward


def _check_finite(t, where):
    if not np.isfinite(t.data).all():
        raise FloatingPointError(f"non-finite activations in {where}")


def _branch(model, x, adj, branch, training, update_stats, masks):
    cfg = model.config
    p = model.params
    ch = cfg.channels
    for i in range(3):
        pre = f"{branch}.b{i}"
        ws = [p[f"{pre}.spatial.w{k}"] for k in range(cfg.kernel_size)]
        s = spatial_conv(x, adj, ws)
        s = _batchnorm(s, p[f"{pre}.bn.gamma"], p[f"{pre}.bn.beta"], model.buffers,
                       f"{pre}.bn", cfg, training, update_stats, axes=(1, 2))
        s = s.relu()
        if training and cfg.dropout > 0.0:
            s = s * masks[f"{branch}.b{i}"]
        s = temporal_conv(s, p[f"{pre}.temporal.weight"], p[f"{pre}.temporal.bias"],
                          cfg.temporal_kernel)
        res = x if ch[i] == ch[i + 1] else _channel_map(x, p[f"{pre}.res.weight"])
        x = s + res
        _check_finite(x, f"{branch} block {i}")
    x = se_block(x, p[f"{branch}.se.w1"], p[f"{branch}.se.b1"],
                 p[f"{branch}.se.w2"], p[f"{branch}.se.b2"])
    _check_finite(x, f"{branch} se")
    return x


def _head(model, x, prefix, training, update_stats):
    cfg = model.config
    p = model.params
    c, n, t = x.data.shape
    z = x.transpose((2, 1, 0)).reshape(t, n * c)
    z = z @ p[f"{prefix}.fc1.weight"] + p[f"{prefix}.fc1.bias"]
    z = _batchnorm(z, p[f"{prefix}.bn.gamma"], p[f"{prefix}.bn.beta"], model.buffers,
                   f"{prefix}.bn", cfg, training, update_stats, axes=(0,))
    z = z.relu()
    return z @ p[f"{prefix}.fc2.weight"] + p[f"{prefix}.fc2.bias"]


def make_dropout_masks(model, n_frames, rng):
    """Inverted-dropout masks, one per conv block per branch."""
    cfg = model.config
    masks = {}
    keep = 1.0 - cfg.dropout
    sizes = {"vertex": model.n_joints, "edge": model.n_bones, "traj": model.n_joints}
    for branch, n in sizes.items():
        for i in range(3):
            shape = (cfg.channels[i + 1], n, n_frames)
            masks[f"{branch}.b{i}"] = (rng.random(shape) < keep) / keep
    return masks


def forward_tensors(model, pose, rots, training=False, update_stats=False, masks=None):
    """Forward pass returning Tensors: quats (T, B, 4) unit, root (T, 3)."""
    coords = pose.coords
    feats = rots.feats
    t = coords.shape[0]
    if feats.shape[0] != t:
        raise ValueError("pose and rotation sequences disagree on frame count")
    if coords.shape[1] != model.n_joints or feats.shape[1] != model.n_bones:
        raise ValueError("input shapes do not match the model's skeleton sizes")
    if training and model.config.dropout > 0.0 and masks is None:
        raise ValueError("training forward with dropout needs masks")

    xv = Tensor(coords.transpose(2, 1, 0) * model.config.input_scale)
    xe = Tensor(feats.transpose(2, 1, 0))

    hv = _branch(model, xv, model.vertex_adj, "vertex", training, update_stats, masks)
    he = _branch(model, xe, model.edge_adj, "edge", training, update_stats, masks)
    h = concat([hv, he], axis=1)
    q = _head(model, h, "head", training, update_stats).reshape(t, model.n_bones, 4)
    n2 = (q * q).sum(axis=2, keepdims=True)
    quats = q / (n2 + 1e-30).sqrt()

    ht = _branch(model, xv, model.vertex_adj, "traj", training, update_stats, masks)
    root = _head(model, ht, "traj_head", training, update_stats)
    return quats, root


def forward(model, pose, rots):
    """Inference forward pass: (quats (T, B, 4), root (T, 3)) arrays.

    Pure function of (inputs, parameters): batch norm uses the stored
    running statistics and dropout is off.
    """
    quats, root = forward_tensors(model, pose, rots, training=False)
    return quats.data.copy(), root.data.copy()


# ---------------------------------------------------------------------------
# loss / training / gradient checking


def loss(pred, target, lam, depths=None):
    """``lam * aad + (1 - lam) * wmpjpe`` as a Tensor (differentiable).

    ``pred`` is the (quats, root) pair from the forward pass (Tensors or
    arrays); ``target`` an OrientationSequence. The position term uses an
    epsilon-regularised norm so its value at zero error is ~1e-9.
    """
    q, r = pred
    q = as_tensor(q)
    r = as_tensor(r)
    if q.data.shape != target.quats.shape or r.data.shape != target.root_positions.shape:
        raise ValueError("prediction and target shapes disagree")
    dot = (q * Tensor(target.quats)).sum(axis=2)
    aad = (dot.abs().arccos() * 2.0).mean()
    diff = r - Tensor(target.root_positions)
    err = ((diff * diff).sum(axis=1) + 1e-18).sqrt()
    if depths is not None:
        err = err * (1.0 / np.asarray(depths, dtype=np.float64))
    pos = err.mean()
    return aad * lam + pos * (1.0 - lam)


def _sgd_step(model, velocities, lr, momentum):
    for name, p in model.params.items():
        if p.grad is None:
            continue
        v = velocities[name]
        v *= momentum
        v -= lr * p.grad
        p.data += v
        p.zero_grad()


def train(data, config, skel=None, n_joints=None, n_bones=None, stacks=None,
          stop_loss=None):
    """Gradient descent with momentum over (pose, rots, target, depths) items.

    Returns (model, history) where history is the per-epoch mean loss.
    Deterministic for a fixed config seed. Raises DivergenceError when the
    loss goes non-finite.
    """
    if len(data) == 0:
        raise ValueError("empty dataset")
    model = init_model(config, skel=skel, n_joints=n_joints, n_bones=n_bones,
                       stacks=stacks)
    rng = np.random.default_rng(config.seed + 1)
    velocities = {n: np.zeros_like(p.data) for n, p in model.params.items()}
    history = []
    for epoch in range(config.epochs):
        order = rng.permutation(len(data))
        total = 0.0
        for idx in order:
            pose, rots, target, depths = data[idx]
            masks = None
            if config.dropout > 0.0:
                masks = make_dropout_masks(model, pose.frames, rng)
            try:
                pred = forward_tensors(model, pose, rots, training=True,
                                       update_stats=True, masks=masks)
                lo = loss(pred, target, config.loss_mix, depths)
            except FloatingPointError as exc:
                raise DivergenceError(epoch) from exc
            if not np.isfinite(lo.data):
                raise DivergenceError(epoch)
            lo.backward()
            _sgd_step(model, velocities, config.learning_rate, config.momentum)
            total += float(lo.data)
        history.append(total / len(data))
        if stop_loss is not None and history[-1] <= stop_loss:
            break
    return model, history


@dataclass
class GradCheckEntry:
    name: str
    index: int
    analytic: float
    numeric: float
    rel_error: float


@dataclass
class GradCheckReport:
    n_checked: int
    max_rel_error: float
    tolerance: float
    worst: GradCheckEntry
    passed: bool = field(init=False)

    def __post_init__(self):
        self.passed = self.max_rel_error < self.tolerance


def gradient_check(model, item, tolerance=1e-4, n_params=200, step=1e-5, seed=0):
    """Compare reverse-mode gradients against central finite differences.

    ``item`` is a (pose, rots, target, depths) tuple. The loss closure
    runs batch-statistics normalisation with frozen running stats and, if
    the model uses dropout, one fixed mask set. Relative error uses
    ``|a - n| / max(|a|, |n|, 1e-6)``.
    """
    pose, rots, target, depths = item
    rng = np.random.default_rng(seed)
    masks = None
    if model.config.dropout > 0.0:
        masks = make_dropout_masks(model, pose.frames, rng)

    def closure():
        pred = forward_tensors(model, pose, rots, training=True,
                               update_stats=False, masks=masks)
        return loss(pred, target, model.config.loss_mix, depths)

    for p in model.params.values():
        p.zero_grad()
    out = closure()
    out.backward()

    names = list(model.params)
    sizes = np.array([model.params[n].data.size for n in names], dtype=np.float64)
    probs = sizes / sizes.sum()
    picks = rng.choice(len(names), size=n_params, p=probs)
    entries = []
    for t in picks:
        name = names[t]
        p = model.params[name]
        flat = p.data.reshape(-1)
        i = int(rng.integers(flat.size))
        keep = flat[i]
        flat[i] = keep + step
        up = float(closure().data)
        flat[i] = keep - step
        dn = float(closure().data)
        flat[i] = keep
        numeric = (up - dn) / (2.0 * step)
        analytic = float(p.grad.reshape(-1)[i])
        rel = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6)
        entries.append(GradCheckEntry(name, i, analytic, numeric, rel))
    worst = max(entries, key=lambda e: e.rel_error)
    return GradCheckReport(
        n_checked=len(entries),
        max_rel_error=worst.rel_error,
        tolerance=tolerance,
        worst=worst,
    )


# ---------------------------------------------------------------------------
# checkpoint container
#
# Layout (all integers little-endian):
#   8s   magic "SKQGCKPT"
#   u32  version (1)
#   u32  length of meta JSON; meta = {"config": {...}, "n_joints", "n_bones"}
#   u32  tensor count; then per tensor:
#        u16 name length, name utf-8, u8 ndim, ndim * u64 shape,
#        float64 little-endian payload
# Parameter tensors use their model names; batch-norm statistics are
# prefixed "buffer:" and the adjacency stacks are "adj:vertex"/"adj:edge".


def save_checkpoint(model, path):
    buf = _io.BytesIO()
    buf.write(_CKPT_MAGIC)
    meta = json.dumps(
        {"config": asdict(model.config), "n_joints": model.n_joints,
         "n_bones": model.n_bones},
        sort_keys=True,
    ).encode()
    buf.write(struct.pack("<I", _CKPT_VERSION))
    buf.write(struct.pack("<I", len(meta)))
    buf.write(meta)

    tensors = [(n, p.data) for n, p in model.params.items()]
    tensors += [("buffer:" + n, a) for n, a in model.buffers.items()]
    tensors += [("adj:vertex", model.vertex_adj), ("adj:edge", model.edge_adj)]
    buf.write(struct.pack("<I", len(tensors)))
    for name, arr in tensors:
        nb = name.encode()
        buf.write(struct.pack("<H", len(nb)))
        buf.write(nb)
        arr = np.asarray(arr, dtype=np.float64)
        buf.write(struct.pack("<B", arr.ndim))
        for s in arr.shape:
            buf.write(struct.pack("<Q", s))
        buf.write(arr.astype("<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_checkpoint(path):
    with open(path, "rb") as fh:
        raw = fh.read()
    view = memoryview(raw)
    if bytes(view[:8]) != _CKPT_MAGIC:
        raise ValueError("not a model checkpoint (bad magic)")
    off = 8
    (version,) = struct.unpack_from("<I", view, off); off += 4
    if version != _CKPT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack_from("<I", view, off); off += 4
    meta = json.loads(bytes(view[off:off + meta_len]).decode()); off += meta_len
    (count,) = struct.unpack_from("<I", view, off); off += 4

    tensors = {}
    for _ in range(count):
        (nlen,) = struct.unpack_from("<H", view, off); off += 2
        name = bytes(view[off:off + nlen]).decode(); off += nlen
        (ndim,) = struct.unpack_from("<B", view, off); off += 1
        shape = struct.unpack_from(f"<{ndim}Q", view, off); off += 8 * ndim
        n = int(np.prod(shape)) if ndim else 1
        arr = np.frombuffer(view, dtype="<f8", count=n, offset=off).reshape(shape)
        off += 8 * n
        tensors[name] = np.array(arr, dtype=np.float64)

    cfg_dict = dict(meta["config"])
    cfg_dict["channels"] = tuple(cfg_dict["channels"])
    config = QGCNConfig(**cfg_dict)
    params = {}
    buffers = {}
    vertex_adj = edge_adj = None
    for name, arr in tensors.items():
        if name == "adj:vertex":
            vertex_adj = arr
        elif name == "adj:edge":
            edge_adj = arr
        elif name.startswith("buffer:"):
            buffers[name[len("buffer:"):]] = arr
        else:
            params[name] = Tensor(arr, requires_grad=True)
    if vertex_adj is None or edge_adj is None:
        raise ValueError("checkpoint is missing adjacency stacks")
    return QGCNModel(
        config=config,
        n_joints=int(meta["n_joints"]),
        n_bones=int(meta["n_bones"]),
        params=params,
        buffers=buffers,
        vertex_adj=vertex_adj,
        edge_adj=edge_adj,
    )


def predict_sequence(model, pose, rots, skel=None):
    """Forward pass packaged as an OrientationSequence."""
    quats, root = forward(model, pose, rots)
    return OrientationSequence(root_positions=root, quats=quats)

"""Feed-forward actor-critic in numpy with hand-written backpropagation.

Actor and critic are separate tanh MLPs of the same hidden shape. Parameters
live in one flat float64 vector; :class:`PolicyParams` exposes per-layer views.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..exceptions import CheckpointError
from ..validation import check_rng

CHECKPOINT_VERSION = 1


def _layer_shapes(obs_dim, n_actions, hidden):
    sizes = [obs_dim, *hidden]
    actor = [(a, b) for a, b in zip(sizes, sizes[1:])] + [(sizes[-1], n_actions)]
    critic = [(a, b) for a, b in zip(sizes, sizes[1:])] + [(sizes[-1], 1)]
    return actor, critic


@dataclass
class PolicyParams:
    obs_dim: int
    n_actions: int
    hidden: tuple = (64, 64)
    flat: np.ndarray = None
    actor: list = field(init=False, repr=False)
    critic: list = field(init=False, repr=False)

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        a_shapes, c_shapes = _layer_shapes(self.obs_dim, self.n_actions, self.hidden)
        size = sum(i * o + o for i, o in a_shapes + c_shapes)
        if self.flat is None:
            self.flat = np.zeros(size)
        self.flat = np.ascontiguousarray(self.flat, dtype=np.float64)
        if self.flat.shape != (size,):
            raise ValueError(f"expected {size} parameters, got {self.flat.shape}")
        self.actor, self.critic = [], []
        pos = 0
        for shapes, dest in ((a_shapes, self.actor), (c_shapes, self.critic)):
            for i, o in shapes:
                W = self.flat[pos : pos + i * o].reshape(i, o)
                pos += i * o
                b = self.flat[pos : pos + o]
                pos += o
                dest.append((W, b))

    @property
    def size(self) -> int:
        return self.flat.size

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.obs_dim, self.n_actions, self.hidden, self.flat.copy())

    def architecture(self) -> dict:
        return {
            "obs_dim": self.obs_dim,
            "n_actions": self.n_actions,
            "hidden": list(self.hidden),
            "activation": "tanh",
            "layout": "separate actor and critic",
        }


def _orthogonal(rng, shape, gain):
    a = rng.standard_normal((max(shape), min(shape)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if shape[0] < shape[1]:
        q = q.T
    return gain * q[: shape[0], : shape[1]]


def init_policy(obs_dim: int, n_actions: int, hidden=(64, 64), rng=None) -> PolicyParams:
    """Orthogonal weights (gain sqrt(2) hidden, 0.01 policy head, 1 value head), zero biases."""
    rng = check_rng(rng)
    params = PolicyParams(obs_dim, n_actions, hidden)
    for layers, head_gain in ((params.actor, 0.01), (params.critic, 1.0)):
        for k, (W, b) in enumerate(layers):
            gain = head_gain if k == len(layers) - 1 else np.sqrt(2.0)
            W[...] = _orthogonal(rng, W.shape, gain)
            b[...] = 0.0
    return params


def _mlp(layers, x):
    acts = [x]
    h = x
    for W, b in layers[:-1]:
        h = np.tanh(h @ W + b)
        acts.append(h)
    W, b = layers[-1]
    return h @ W + b, acts


def _mlp_backward(layers, acts, grad_out, grads):
    g = grad_out
    for k in range(len(layers) - 1, -1, -1):
        W, _ = layers[k]
        gW, gb = grads[k]
        gW += acts[k].T @ g
        gb += g.sum(axis=0)
        if k:
            g = (g @ W.T) * (1.0 - acts[k] ** 2)


def log_softmax(z):
    z = z - z.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def policy_forward(params: PolicyParams, obs):
    """Action probabilities and value estimates for one or many observations."""
    x = np.asarray(obs, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != params.obs_dim:
        raise ValueError(f"observation has {x.shape[1]} entries, policy expects {params.obs_dim}")
    logits, _ = _mlp(params.actor, x)
    value, _ = _mlp(params.critic, x)
    probs = np.exp(log_softmax(logits))
    value = value[:, 0]
    return (probs[0], value[0]) if single else (probs, value)


def policy_logits(params: PolicyParams, obs) -> np.ndarray:
    return _mlp(params.actor, np.atleast_2d(np.asarray(obs, dtype=np.float64)))[0]


@dataclass
class LossTerms:
    total: float
    policy: float
    value: float
    entropy: float
    approx_kl: float
    clip_fraction: float


def ppo_loss(params: PolicyParams, obs, actions, old_logp, advantages, returns,
             clip_range=0.2, ent_coef=0.01, vf_coef=0.5, need_grad=True):
    """Clipped surrogate loss with value and entropy terms, and its gradient.

    ``loss = -mean(min(r A, clip(r) A)) + vf_coef * mean((V - R)^2) - ent_coef * mean(H)``
    with ``r = exp(logp - old_logp)``. Returns ``(LossTerms, flat_gradient)``.
    """
    obs = np.atleast_2d(np.asarray(obs, dtype=np.float64))
    actions = np.asarray(actions, dtype=np.int64)
    B = obs.shape[0]
    idx = np.arange(B)

    logits, a_acts = _mlp(params.actor, obs)
    v_out, c_acts = _mlp(params.critic, obs)
    v = v_out[:, 0]
    logp_all = log_softmax(logits)
    p = np.exp(logp_all)
    logp = logp_all[idx, actions]
    ratio = np.exp(logp - old_logp)
    clipped = np.clip(ratio, 1.0 - clip_range, 1.0 + clip_range)
    s1, s2 = ratio * advantages, clipped * advantages
    use_unclipped = s1 <= s2
    policy_loss = -np.mean(np.minimum(s1, s2))
    value_loss = np.mean((v - returns) ** 2)
    ent = -(p * logp_all).sum(axis=1)
    entropy = ent.mean()
    total = policy_loss + vf_coef * value_loss - ent_coef * entropy
    terms = LossTerms(
        float(total),
        float(policy_loss),
        float(value_loss),
        float(entropy),
        float(np.mean((ratio - 1.0) - (logp - old_logp))),
        float(np.mean(np.abs(ratio - 1.0) > clip_range)),
    )
    if not need_grad:
        return terms, None

    # d loss / d logp for the surrogate; zero where the clipped branch is active
    g_logp = np.where(use_unclipped, -s1, 0.0) / B
    onehot = np.zeros_like(p)
    onehot[idx, actions] = 1.0
    g_logits = g_logp[:, None] * (onehot - p)
    # d(-ent_coef * mean H)/d logits = ent_coef * p (log p + H) / B
    g_logits += ent_coef * p * (logp_all + ent[:, None]) / B
    g_v = (vf_coef * 2.0 * (v - returns) / B)[:, None]

    grad = PolicyParams(params.obs_dim, params.n_actions, params.hidden)
    _mlp_backward(params.actor, a_acts, g_logits, grad.actor)
    _mlp_backward(params.critic, c_acts, g_v, grad.critic)
    return terms, grad.flat


# --------------------------------------------------------------------------
# checkpoints
# --------------------------------------------------------------------------
def policy_to_dict(params: PolicyParams, metadata: dict = None) -> dict:
    return {
        "format": "prpkit-policy",
        "version": CHECKPOINT_VERSION,
        "architecture": params.architecture(),
        # repr of a Python float round-trips exactly through JSON
        "parameters": [float(x) for x in params.flat],
        "metadata": metadata or {},
    }


def policy_from_dict(doc: dict):
    if not isinstance(doc, dict) or doc.get("format") != "prpkit-policy":
        raise CheckpointError("not a policy checkpoint")
    if doc.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {doc.get('version')!r} (expected {CHECKPOINT_VERSION})")
    try:
        arch = doc["architecture"]
        params = PolicyParams(int(arch["obs_dim"]), int(arch["n_actions"]), tuple(arch["hidden"]),
                              np.array(doc["parameters"], dtype=np.float64))
    except (KeyError, TypeError, ValueError) as exc:
        raise CheckpointError(f"malformed checkpoint: {exc}") from exc
    if not np.all(np.isfinite(params.flat)):
        raise CheckpointError("checkpoint contains non-finite parameters")
    return params, doc.get("metadata", {})


def save_policy(params: PolicyParams, path, metadata: dict = None) -> Path:
    path = Path(path)
    path.write_text(json.dumps(policy_to_dict(params, metadata), sort_keys=True) + "\n")
    return path


def load_policy(path):
    """Returns ``(params, metadata)``."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text())
    except FileNotFoundError as exc:
        raise CheckpointError(f"checkpoint not found: {path}") from exc
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    return policy_from_dict(doc)

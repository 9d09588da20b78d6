"""
Neural Core
Small float64 transformer encoder, sigmoid/BCE, Adam step, finite-difference
gradient checking and the "ADE1" parameter checkpoint format.
"""

from __future__ import annotations

import math
import os
import random
import struct
from dataclasses import dataclass
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
import torch
from pydantic import BaseModel, Field, model_validator
from torch import nn

from modules.artifacts import atomic_write_bytes
from modules.schema import MissingArtifact, SequenceTooLong, ShapeMismatch, TokenOutOfVocab

DTYPE = torch.float64
BCE_EPS = 1e-12
LAYER_NORM_EPS = 1e-12
CHECKPOINT_MAGIC = b"ADE1"
# probabilities stay inside the open interval (0, 1)
PROB_FLOOR = math.ulp(0.0)
PROB_CEIL = math.nextafter(1.0, 0.0)


class ModelConfig(BaseModel):
    vocab_size: int = Field(1000, gt=0)
    d_model: int = Field(64, gt=0)
    n_layers: int = Field(2, ge=0)
    n_heads: int = Field(4, gt=0)
    max_seq_len: int = Field(128, gt=0)
    d_ff: Optional[int] = Field(None, gt=0)
    seed: int = 0

    @model_validator(mode="after")
    def _check_heads(self):
        if self.d_model % self.n_heads != 0:
            raise ValueError(f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")
        return self

    @property
    def ff_dim(self) -> int:
        return self.d_ff or 2 * self.d_model


# -----------------------
# Layers
# -----------------------
class MultiHeadSelfAttention(nn.Module):
    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.n_heads = n_heads
        self.d_head = d_model // n_heads
        self.q_proj = nn.Linear(d_model, d_model, dtype=DTYPE)
        # a key bias shifts every score of a query row equally, which softmax ignores
        self.k_proj = nn.Linear(d_model, d_model, bias=False, dtype=DTYPE)
        self.v_proj = nn.Linear(d_model, d_model, dtype=DTYPE)
        self.out_proj = nn.Linear(d_model, d_model, dtype=DTYPE)

    def forward(self, x: torch.Tensor, key_mask: Optional[torch.Tensor] = None):
        """
        Args:
            x: [B, T, d]
            key_mask: [B, T] bool, True for real tokens

        Returns:
            (output [B, T, d], attention weights [B, heads, T, T])
        """
        b, t, d = x.shape

        def _heads(proj):
            return proj(x).view(b, t, self.n_heads, self.d_head).transpose(1, 2)

        q, k, v = _heads(self.q_proj), _heads(self.k_proj), _heads(self.v_proj)
        scores = q @ k.transpose(-2, -1) / math.sqrt(self.d_head)
        if key_mask is not None:
            scores = scores.masked_fill(~key_mask[:, None, None, :], float("-inf"))
        weights = torch.softmax(scores, dim=-1)
        context = (weights @ v).transpose(1, 2).reshape(b, t, d)
        return self.out_proj(context), weights


class FeedForward(nn.Module):
    def __init__(self, d_model: int, d_ff: int):
        super().__init__()
        self.up = nn.Linear(d_model, d_ff, dtype=DTYPE)
        self.down = nn.Linear(d_ff, d_model, dtype=DTYPE)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.down(nn.functional.gelu(self.up(x)))


class EncoderLayer(nn.Module):
    """self-attention -> add & norm -> feed-forward -> add & norm"""

    def __init__(self, d_model: int, n_heads: int, d_ff: int):
        super().__init__()
        self.attention = MultiHeadSelfAttention(d_model, n_heads)
        self.norm1 = nn.LayerNorm(d_model, eps=LAYER_NORM_EPS, dtype=DTYPE)
        self.feed_forward = FeedForward(d_model, d_ff)
        self.norm2 = nn.LayerNorm(d_model, eps=LAYER_NORM_EPS, dtype=DTYPE)

    def forward(self, x: torch.Tensor, key_mask: Optional[torch.Tensor] = None) -> torch.Tensor:
        attended, _ = self.attention(x, key_mask)
        x = self.norm1(x + attended)
        return self.norm2(x + self.feed_forward(x))


class Encoder(nn.Module):
    """Learned token + position embeddings followed by n_layers encoder layers"""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        self.token_embedding = nn.Embedding(config.vocab_size, config.d_model, dtype=DTYPE)
        self.position_embedding = nn.Embedding(config.max_seq_len, config.d_model, dtype=DTYPE)
        self.layers = nn.ModuleList(
            EncoderLayer(config.d_model, config.n_heads, config.ff_dim) for _ in range(config.n_layers)
        )

    def forward(self, token_ids: torch.Tensor, key_mask: Optional[torch.Tensor] = None) -> torch.Tensor:
        """
        Args:
            token_ids: [B, T] long
            key_mask: [B, T] bool, True for real tokens (None: all real)

        Returns:
            Hidden states [B, T, d]
        """
        _, t = token_ids.shape
        if t > self.config.max_seq_len:
            raise SequenceTooLong(f"sequence of {t} tokens exceeds max_seq_len={self.config.max_seq_len}")
        if token_ids.numel() and (int(token_ids.max()) >= self.config.vocab_size or int(token_ids.min()) < 0):
            raise TokenOutOfVocab(f"token id outside [0, {self.config.vocab_size})")
        positions = torch.arange(t, device=token_ids.device)
        x = self.token_embedding(token_ids) + self.position_embedding(positions)[None, :, :]
        for layer in self.layers:
            x = layer(x, key_mask)
        return x


def seeded_module(factory: Callable[[], nn.Module], seed: int) -> nn.Module:
    """Build a module with parameters drawn from a private, seeded RNG stream"""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        return factory()


def forward_encoder(token_ids: Sequence[int], encoder: Encoder) -> torch.Tensor:
    """Encode one sequence; returns H with shape [T, d]"""
    ids = torch.tensor([list(token_ids)], dtype=torch.long)
    return encoder(ids)[0]


def param_set(module: nn.Module) -> Dict[str, torch.Tensor]:
    """Named trainable parameters; each carries its gradient slot in .grad"""
    return dict(module.named_parameters())


# -----------------------
# Probabilities and loss
# -----------------------
def squash(z: torch.Tensor) -> torch.Tensor:
    """torch.sigmoid clamped into the open interval (0, 1)"""
    return torch.sigmoid(z).clamp(PROB_FLOOR, PROB_CEIL)


def sigmoid(z):
    """Logistic function on a float or a tensor, strictly inside (0, 1)"""
    if isinstance(z, torch.Tensor):
        return squash(z)
    return float(squash(torch.tensor(float(z), dtype=DTYPE)))


def bce_loss(p: torch.Tensor, y: torch.Tensor, mask: Optional[torch.Tensor] = None) -> torch.Tensor:
    """
    Mean binary cross-entropy over (unmasked) elements with p clamped to
    [1e-12, 1 - 1e-12].

    Raises:
        ShapeMismatch: p, y (and mask) shapes differ
    """
    if p.shape != y.shape or (mask is not None and mask.shape != p.shape):
        raise ShapeMismatch(f"bce_loss shapes differ: p={tuple(p.shape)} y={tuple(y.shape)}")
    p = p.clamp(BCE_EPS, 1.0 - BCE_EPS)
    losses = -(y * torch.log(p) + (1.0 - y) * torch.log1p(-p))
    if mask is None:
        return losses.mean()
    weights = mask.to(p.dtype)
    return (losses * weights).sum() / weights.sum().clamp_min(1.0)


def bce_with_logits(z: torch.Tensor, y: torch.Tensor, mask: Optional[torch.Tensor] = None) -> torch.Tensor:
    """Same mean BCE computed from logits, used for training"""
    if z.shape != y.shape or (mask is not None and mask.shape != z.shape):
        raise ShapeMismatch(f"bce shapes differ: z={tuple(z.shape)} y={tuple(y.shape)}")
    losses = nn.functional.binary_cross_entropy_with_logits(z, y, reduction="none")
    if mask is None:
        return losses.mean()
    weights = mask.to(z.dtype)
    return (losses * weights).sum() / weights.sum().clamp_min(1.0)


# -----------------------
# Gradient check
# -----------------------
@dataclass
class GradCheckResult:
    max_relative_error: float
    n_checked: int
    worst: Optional[tuple] = None


def grad_check(module: nn.Module, loss_fn: Callable[[], torch.Tensor], eps: float = 1e-5,
               n_coords: int = 200, seed: int = 0, param_names: Optional[Iterable[str]] = None,
               grad_hook: Optional[Callable[[Dict[str, torch.Tensor]], None]] = None) -> GradCheckResult:
    """
    Compare autograd gradients with central finite differences.

    Args:
        module: Model whose parameters are checked
        loss_fn: Recomputes the scalar loss from the current parameters
        eps: Finite-difference step
        n_coords: Number of parameter coordinates sampled (all if fewer exist)
        seed: Sampling seed
        param_names: Restrict the check to these parameters
        grad_hook: Called with the analytic gradients before comparison

    Returns:
        GradCheckResult with the max |a - f| / max(|a|, |f|, 1e-8)
    """
    params = param_set(module)
    names = list(param_names) if param_names is not None else list(params)

    module.zero_grad(set_to_none=True)
    loss_fn().backward()
    analytic = {
        name: (params[name].grad.detach().clone() if params[name].grad is not None
               else torch.zeros_like(params[name]))
        for name in names
    }
    if grad_hook is not None:
        grad_hook(analytic)

    coords = [(name, i) for name in names for i in range(params[name].numel())]
    rng = random.Random(seed)
    if len(coords) > n_coords:
        coords = rng.sample(coords, n_coords)

    worst = None
    max_err = 0.0
    with torch.no_grad():
        for name, i in coords:
            flat = params[name].data.view(-1)
            original = float(flat[i])
            flat[i] = original + eps
            loss_plus = float(loss_fn())
            flat[i] = original - eps
            loss_minus = float(loss_fn())
            flat[i] = original
            numeric = (loss_plus - loss_minus) / (2 * eps)
            exact = float(analytic[name].view(-1)[i])
            err = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-8)
            if err > max_err or worst is None:
                max_err = max(max_err, err)
                worst = (name, i, exact, numeric)
    module.zero_grad(set_to_none=True)
    return GradCheckResult(max_err, len(coords), worst)


# -----------------------
# Optimizer
# -----------------------
def optimizer_step(params: Dict[str, torch.Tensor], grads: Dict[str, torch.Tensor],
                   state: Optional[torch.optim.Adam], lr: float,
                   beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> torch.optim.Adam:
    """
    One Adam update with bias correction.

    Args:
        params: Named parameters, updated in place
        grads: Named gradients, same names and shapes
        state: Optimizer from the previous step (None on the first step)

    Returns:
        The optimizer holding the moment estimates for the next step
    """
    if set(params) != set(grads):
        raise ShapeMismatch("params and grads have different names")
    for name, p in params.items():
        if grads[name].shape != p.shape:
            raise ShapeMismatch(f"gradient for {name} has shape {tuple(grads[name].shape)}, expected {tuple(p.shape)}")
    if state is None:
        state = torch.optim.Adam(list(params.values()), lr=lr, betas=(beta1, beta2), eps=eps)
    for group in state.param_groups:
        group["lr"] = lr
        group["betas"] = (beta1, beta2)
    for name, p in params.items():
        p.grad = grads[name].detach().clone()
    state.step()
    return state


# -----------------------
# Checkpoints
# -----------------------
def checkpoint_bytes(tensors: Dict[str, torch.Tensor]) -> bytes:
    """
    Serialize named tensors: b"ADE1", u32 record count, then per record
    u32 name length, UTF-8 name, u32 ndim, u64 dims, float64 data; all
    little-endian.
    """
    chunks = [CHECKPOINT_MAGIC, struct.pack("<I", len(tensors))]
    for name in sorted(tensors):
        array = tensors[name].detach().cpu().to(DTYPE).numpy()
        encoded = name.encode("utf-8")
        chunks.append(struct.pack("<I", len(encoded)))
        chunks.append(encoded)
        chunks.append(struct.pack("<I", array.ndim))
        chunks.append(struct.pack(f"<{array.ndim}Q", *array.shape))
        chunks.append(np.ascontiguousarray(array, dtype="<f8").tobytes())
    return b"".join(chunks)


def save_checkpoint(path: str, module: nn.Module) -> None:
    atomic_write_bytes(path, checkpoint_bytes(module.state_dict()))


def read_checkpoint(path: str) -> Dict[str, torch.Tensor]:
    if not os.path.exists(path):
        raise MissingArtifact(f"checkpoint not found: {path}")
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != CHECKPOINT_MAGIC:
        raise MissingArtifact(f"{path} is not an ADE1 checkpoint")
    pos = 4
    (count,) = struct.unpack_from("<I", data, pos)
    pos += 4
    tensors = {}
    for _ in range(count):
        (name_len,) = struct.unpack_from("<I", data, pos)
        pos += 4
        name = data[pos:pos + name_len].decode("utf-8")
        pos += name_len
        (ndim,) = struct.unpack_from("<I", data, pos)
        pos += 4
        shape = struct.unpack_from(f"<{ndim}Q", data, pos)
        pos += 8 * ndim
        n = int(np.prod(shape)) if ndim else 1
        array = np.frombuffer(data, dtype="<f8", count=n, offset=pos).reshape(shape)
        pos += 8 * n
        tensors[name] = torch.tensor(array.copy(), dtype=DTYPE)
    return tensors


def load_checkpoint(path: str, module: nn.Module) -> None:
    """Load an ADE1 checkpoint into module, checking names and shapes"""
    tensors = read_checkpoint(path)
    expected = module.state_dict()
    if set(tensors) != set(expected):
        missing = sorted(set(expected) - set(tensors))
        extra = sorted(set(tensors) - set(expected))
        raise ShapeMismatch(f"checkpoint parameters differ (missing={missing}, unexpected={extra})")
    for name, tensor in tensors.items():
        if tensor.shape != expected[name].shape:
            raise ShapeMismatch(f"{name}: checkpoint {tuple(tensor.shape)} vs model {tuple(expected[name].shape)}")
    module.load_state_dict(tensors)

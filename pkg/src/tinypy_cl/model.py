"""Character-level decoder-only transformer with explicit training loop.

Architecture (pre-norm residual blocks, no biases anywhere, no dropout):
token embedding + absolute position embedding, `n_layers` blocks of causal
multi-head self-attention and a 4x GELU MLP, a final layer norm, and an
output head weight-tied to the token embedding.  At the default
configuration (6 layers, 6 heads, width 120, block 256, vocab 41) the
parameter count is 1,074,000.

Training is plain next-token prediction over uniformly sampled contiguous
windows of a token stream, optimized by a hand-rolled decoupled-weight-decay
Adam with bias correction, global-norm gradient clipping, and milestone
learning-rate decay.  Everything is deterministic given the seeds; training
state round-trips losslessly through the binary checkpoint format (magic
``TPCL``: versioned header, float32 tensors in registration order, optimizer
moments, sampler RNG state, CRC-32 trailer).
"""

from __future__ import annotations

import json
import math
import struct
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from .alphabet import ALPHABET, CHAR_TO_ID, VOCAB_SIZE, alphabet_crc

NEWLINE_ID = CHAR_TO_ID["\n"]

CHECKPOINT_MAGIC = b"TPCL"
CHECKPOINT_VERSION = 1


class UnknownCharacterError(Exception):
    def __init__(self, char: str, position: int):
        super().__init__(f"character {char!r} at position {position} is not in the alphabet")
        self.char = char
        self.position = position


class WindowTooLongError(Exception):
    pass


class NonFiniteGradientError(Exception):
    pass


class CheckpointVersionError(Exception):
    pass


class CheckpointCorruptError(Exception):
    pass


# ---------------------------------------------------------------------------
# Tokenizer
# ---------------------------------------------------------------------------

_ENC_LUT = np.full(256, 255, dtype=np.uint8)
for _ch, _i in CHAR_TO_ID.items():
    _ENC_LUT[ord(_ch)] = _i
_DEC_LUT = np.frombuffer(ALPHABET.encode("ascii"), dtype=np.uint8)


def tokenize(text: str) -> np.ndarray:
    """Characters to ids 0..40 (uint8); raises on any character outside the
    alphabet, with its position."""
    try:
        raw = text.encode("ascii")
    except UnicodeEncodeError as exc:
        raise UnknownCharacterError(text[exc.start], exc.start) from None
    ids = _ENC_LUT[np.frombuffer(raw, dtype=np.uint8)]
    bad = np.nonzero(ids == 255)[0]
    if bad.size:
        pos = int(bad[0])
        raise UnknownCharacterError(text[pos], pos)
    return ids


def detokenize(ids) -> str:
    arr = np.asarray(ids)
    if arr.size and (arr.min() < 0 or arr.max() >= VOCAB_SIZE):
        raise ValueError("token id out of range")
    return _DEC_LUT[arr.astype(np.int64)].tobytes().decode("ascii")


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelConfig:
    n_layers: int = 6
    n_heads: int = 6
    embed_dim: int = 120
    block_size: int = 256
    vocab_size: int = VOCAB_SIZE
    bias: bool = False
    dropout: float = 0.0

    def __post_init__(self):
        if self.embed_dim % self.n_heads != 0:
            raise ValueError("embed_dim must be divisible by n_heads")
        if self.bias or self.dropout != 0.0:
            raise ValueError("this model family uses no biases and no dropout")


# smaller configurations used by tests and the desk-scale experiments
TINY_CONFIG = ModelConfig(n_layers=2, n_heads=2, embed_dim=16, block_size=16, vocab_size=8)
DESK_CONFIG = ModelConfig(n_layers=2, n_heads=2, embed_dim=64, block_size=160)
CONCEPT_CONFIG = ModelConfig(n_layers=2, n_heads=2, embed_dim=32, block_size=128)

MODEL_PRESETS = {
    "paper": ModelConfig(),
    "desk": DESK_CONFIG,
    "concept": CONCEPT_CONFIG,
}


class Block(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.n_heads = cfg.n_heads
        self.head_dim = cfg.embed_dim // cfg.n_heads
        self.ln1 = nn.LayerNorm(cfg.embed_dim, bias=False)
        self.qkv = nn.Linear(cfg.embed_dim, 3 * cfg.embed_dim, bias=False)
        self.proj = nn.Linear(cfg.embed_dim, cfg.embed_dim, bias=False)
        self.ln2 = nn.LayerNorm(cfg.embed_dim, bias=False)
        self.up = nn.Linear(cfg.embed_dim, 4 * cfg.embed_dim, bias=False)
        self.down = nn.Linear(4 * cfg.embed_dim, cfg.embed_dim, bias=False)

    def _split_heads(self, t):
        B, T, _ = t.shape
        return t.view(B, T, self.n_heads, self.head_dim).transpose(1, 2)

    def forward(self, x, mask, cache=None):
        B, T, D = x.shape
        q, k, v = self.qkv(self.ln1(x)).split(D, dim=2)
        q, k, v = self._split_heads(q), self._split_heads(k), self._split_heads(v)
        if cache is not None:
            k, v = cache.append(k, v)
        att = (q @ k.transpose(-2, -1)) / math.sqrt(self.head_dim)
        if mask is not None:
            att = att + mask
        att = F.softmax(att, dim=-1)
        y = (att @ v).transpose(1, 2).reshape(B, T, D)
        x = x + self.proj(y)
        x = x + self.down(F.gelu(self.up(self.ln2(x))))
        return x


class LayerCache:
    """Preallocated key/value cache for one attention layer."""

    def __init__(self, batch, n_heads, capacity, head_dim, dtype):
        self.k = torch.zeros(batch, n_heads, capacity, head_dim, dtype=dtype)
        self.v = torch.zeros_like(self.k)
        self.length = 0

    def append(self, k, v):
        t = k.shape[2]
        self.k[:, :, self.length:self.length + t] = k
        self.v[:, :, self.length:self.length + t] = v
        self.length += t
        return self.k[:, :, :self.length], self.v[:, :, :self.length]


class KVCache:
    def __init__(self, model: "TinyGPT", batch: int):
        cfg = model.config
        dtype = next(model.parameters()).dtype
        self.layers = [
            LayerCache(batch, cfg.n_heads, cfg.block_size, cfg.embed_dim // cfg.n_heads, dtype)
            for _ in range(cfg.n_layers)
        ]

    @property
    def length(self) -> int:
        return self.layers[0].length


class TinyGPT(nn.Module):
    def __init__(self, cfg: ModelConfig):
        super().__init__()
        self.config = cfg
        self.wte = nn.Embedding(cfg.vocab_size, cfg.embed_dim)
        self.wpe = nn.Embedding(cfg.block_size, cfg.embed_dim)
        self.blocks = nn.ModuleList(Block(cfg) for _ in range(cfg.n_layers))
        self.ln_f = nn.LayerNorm(cfg.embed_dim, bias=False)
        self.lm_head = nn.Linear(cfg.embed_dim, cfg.vocab_size, bias=False)
        self.lm_head.weight = self.wte.weight  # weight tying
        mask = torch.full((cfg.block_size, cfg.block_size), float("-inf")).triu(1)
        self.register_buffer("causal_mask", mask, persistent=False)

    def num_params(self) -> int:
        return sum(p.numel() for p in self.parameters())

    def forward(self, idx, cache: KVCache = None):
        """Logits for each input position.  With a cache, `idx` holds only
        the new tokens and attention runs over everything cached so far."""
        B, T = idx.shape
        if T == 0:
            raise WindowTooLongError("window must be non-empty")
        start = cache.length if cache is not None else 0
        if start + T > self.config.block_size:
            raise WindowTooLongError(
                f"window of {start + T} exceeds block size {self.config.block_size}"
            )
        pos = torch.arange(start, start + T)
        x = self.wte(idx) + self.wpe(pos)
        if T == 1:
            mask = None  # a single new token attends to everything cached
        else:
            mask = self.causal_mask[start:start + T, :start + T]
        for i, block in enumerate(self.blocks):
            x = block(x, mask, cache.layers[i] if cache is not None else None)
        return self.lm_head(self.ln_f(x))

    def param_groups(self):
        """(name, parameter, decayed) triples; weight decay applies to the
        linear weights only, not to embeddings or norm scales."""
        groups = []
        for name, p in self.named_parameters():
            decay = not (name.startswith(("wte", "wpe")) or ".ln" in name or name.startswith("ln"))
            groups.append((name, p, decay))
        return groups


def init_params(cfg: ModelConfig, seed: int, dtype=torch.float32) -> TinyGPT:
    """Gaussian init (std 0.02; residual output projections scaled by
    1/sqrt(2 * n_layers)), deterministic per seed."""
    model = TinyGPT(cfg).to(dtype)
    g = torch.Generator().manual_seed(seed)
    res_std = 0.02 / math.sqrt(2 * cfg.n_layers)
    with torch.no_grad():
        for name, p in model.named_parameters():
            if ".ln" in name or name.startswith("ln"):
                p.fill_(1.0)
            else:
                std = res_std if (".proj." in name or ".down." in name) else 0.02
                p.copy_(torch.normal(0.0, std, p.shape, generator=g).to(dtype))
    return model


def cross_entropy_loss(logits, targets):
    return F.cross_entropy(logits.reshape(-1, logits.shape[-1]), targets.reshape(-1))


def loss_and_grads(model: TinyGPT, batch):
    """Mean next-token cross-entropy over a (B, block+1) batch, plus exact
    reverse-mode gradients in parameter order."""
    for p in model.parameters():
        p.grad = None
    logits = model(batch[:, :-1])
    loss = cross_entropy_loss(logits, batch[:, 1:])
    loss.backward()
    grads = [p.grad.detach().clone() for p in model.parameters()]
    return float(loss.detach()), grads


# ---------------------------------------------------------------------------
# Optimizer and schedule
# ---------------------------------------------------------------------------

class AdamW:
    """Decoupled-weight-decay Adam with bias correction, matching
    p <- p * (1 - lr*wd); p <- p - lr * m_hat / (sqrt(v_hat) + eps)."""

    def __init__(self, groups, betas=(0.9, 0.95), eps=1e-8, weight_decay=0.1):
        self.names = [name for name, _, _ in groups]
        self.params = [p for _, p, _ in groups]
        self.decay = [d for _, _, d in groups]
        self.betas = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.step_count = 0
        self.m = [torch.zeros_like(p) for p in self.params]
        self.v = [torch.zeros_like(p) for p in self.params]

    @torch.no_grad()
    def step(self, grads, lr: float):
        b1, b2 = self.betas
        self.step_count += 1
        t = self.step_count
        for name, p, decay, m, v, g in zip(self.names, self.params, self.decay, self.m, self.v, grads):
            if not torch.isfinite(g).all():
                raise NonFiniteGradientError(
                    f"non-finite gradient in {name} at optimizer step {t}"
                )
            m.mul_(b1).add_(g, alpha=1 - b1)
            v.mul_(b2).addcmul_(g, g, value=1 - b2)
            m_hat = m / (1 - b1**t)
            v_hat = v / (1 - b2**t)
            if decay and self.weight_decay:
                p.mul_(1 - lr * self.weight_decay)
            p.addcdiv_(m_hat, v_hat.sqrt().add_(self.eps), value=-lr)


@dataclass(frozen=True)
class TrainPlan:
    total_iters: int
    batch_size: int = 64
    base_lr: float = 1e-3
    milestone_fracs: tuple = (0.7, 0.8, 0.9)
    decay_factor: float = 0.1
    grad_clip: float = 1.0
    weight_decay: float = 0.1
    betas: tuple = (0.9, 0.95)
    eps: float = 1e-8
    log_interval: int = 50

    def __post_init__(self):
        if list(self.milestone_fracs) != sorted(set(self.milestone_fracs)) or not all(
            0 < f < 1 for f in self.milestone_fracs
        ):
            raise ValueError("milestone fractions must be strictly increasing in (0, 1)")
        if not 0 < self.decay_factor < 1:
            raise ValueError("decay factor must be in (0, 1)")


def lr_at(plan: TrainPlan, iteration: int) -> float:
    """Base LR, multiplied by the decay factor at each passed milestone."""
    passed = sum(1 for f in plan.milestone_fracs if iteration >= int(f * plan.total_iters))
    return plan.base_lr * plan.decay_factor**passed


def sample_windows(stream: np.ndarray, batch: int, width: int, generator) -> torch.Tensor:
    """Uniform random contiguous windows of `width` ids."""
    n = len(stream) - width
    if n < 0:
        raise ValueError(f"stream of {len(stream)} ids is shorter than a window of {width}")
    starts = torch.randint(0, n + 1, (batch,), generator=generator).numpy()
    windows = stream[starts[:, None] + np.arange(width)]
    return torch.from_numpy(windows.astype(np.int64))


@torch.no_grad()
def stream_loss(model: TinyGPT, stream: np.ndarray, batch: int = 32, max_windows: int = 64) -> float:
    """Deterministic held-out loss: evenly spaced windows across the stream."""
    width = model.config.block_size + 1
    n = len(stream) - width
    if n < 0:
        raise ValueError("stream shorter than one window")
    k = min(max_windows, n + 1)
    starts = np.unique(np.linspace(0, n, k).astype(np.int64))
    total, count = 0.0, 0
    for i in range(0, len(starts), batch):
        chunk = starts[i:i + batch]
        windows = torch.from_numpy(stream[chunk[:, None] + np.arange(width)].astype(np.int64))
        logits = model(windows[:, :-1])
        loss = cross_entropy_loss(logits, windows[:, 1:])
        total += float(loss) * len(chunk)
        count += len(chunk)
    return total / count


@dataclass
class TrainResult:
    rows: list  # (iteration, stage, lr, train_loss, val_loss or None)
    optimizer: AdamW
    generator: torch.Generator


def train(
    model: TinyGPT,
    plan: TrainPlan,
    stream: np.ndarray,
    seed: int,
    val_stream: np.ndarray = None,
    stage: str = "0",
    eval_hook=None,
    optimizer: AdamW = None,
    generator: torch.Generator = None,
    start_iter: int = 0,
    stop_iter: int = None,
    progress=None,
) -> TrainResult:
    """Train for `plan.total_iters` optimizer steps; fully reproducible per
    seed.  A run can be paused at `stop_iter` and resumed bit-identically by
    passing the checkpointed `optimizer`, `generator`, and `start_iter`."""
    width = model.config.block_size + 1
    if len(stream) <= width:
        raise ValueError("training stream must be longer than block_size + 1")
    if optimizer is None:
        optimizer = AdamW(
            model.param_groups(), betas=plan.betas, eps=plan.eps, weight_decay=plan.weight_decay
        )
    if generator is None:
        generator = torch.Generator().manual_seed(seed)
    rows = []
    for it in range(start_iter, plan.total_iters if stop_iter is None else stop_iter):
        lr = lr_at(plan, it)
        batch = sample_windows(stream, plan.batch_size, width, generator)
        loss, grads = loss_and_grads(model, batch)
        if plan.grad_clip:
            total = math.sqrt(sum(float(g.double().pow(2).sum()) for g in grads))
            if total > plan.grad_clip:
                scale = plan.grad_clip / total
                for g in grads:
                    g.mul_(scale)
        optimizer.step(grads, lr)
        if it % plan.log_interval == 0 or it == plan.total_iters - 1:
            val = stream_loss(model, val_stream) if val_stream is not None else None
            rows.append((it, stage, lr, loss, val))
            if progress is not None:
                progress(it, loss, val)
        if eval_hook is not None:
            eval_hook(it, model)
    return TrainResult(rows=rows, optimizer=optimizer, generator=generator)


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def _pick_next(logits, mode, temperature, generator):
    if mode == "greedy":
        return torch.argmax(logits, dim=-1)
    probs = F.softmax(logits / temperature, dim=-1)
    return torch.multinomial(probs, 1, generator=generator).squeeze(-1)


def generate_batch(
    model: TinyGPT,
    prompts,
    max_new,
    mode: str = "greedy",
    temperature: float = 1.0,
    seed: int = 0,
    stop: str = None,
):
    """Autoregressive continuation for a batch of equal-length prompts.

    The context is the last `block_size` ids at every step.  Stopping rules:
    ``"terminator"`` ends a row once prompt+generated text ends with two
    newlines (so a snippet whose output is empty terminates on its first
    generated newline); ``"newline"`` ends a row at the first generated
    newline; None generates `max_new` ids.  Returns a list of id arrays.
    """
    if mode not in ("greedy", "sample"):
        raise ValueError(f"unknown decode mode {mode!r}")
    block = model.config.block_size
    lens = {len(p) for p in prompts}
    if len(lens) != 1 or 0 in lens:
        raise ValueError("prompts must be non-empty and of equal length")
    plen = lens.pop()
    B = len(prompts)
    caps = [max_new] * B if isinstance(max_new, int) else list(max_new)
    steps = max(caps)
    idx = torch.from_numpy(np.stack([np.asarray(p, dtype=np.int64) for p in prompts]))
    generator = torch.Generator().manual_seed(seed) if mode == "sample" else None

    generated = np.zeros((B, steps), dtype=np.int64)
    done = np.zeros(B, dtype=bool)
    done_at = np.full(B, steps, dtype=np.int64)

    cache = None
    if plen < block:
        cache = KVCache(model, B)
        with torch.no_grad():
            logits = model(idx, cache)[:, -1]
    else:
        with torch.no_grad():
            logits = model(idx[:, -block:])[:, -1]

    last_two = np.zeros((B, 2), dtype=np.int64)
    last_two[:, 1] = idx[:, -1].numpy()
    last_two[:, 0] = idx[:, -2].numpy() if plen >= 2 else -1

    for t in range(steps):
        next_ids = _pick_next(logits, mode, temperature, generator)
        arr = next_ids.numpy()
        generated[:, t] = arr
        last_two[:, 0] = last_two[:, 1]
        last_two[:, 1] = arr
        if stop == "terminator":
            hit = (last_two[:, 0] == NEWLINE_ID) & (last_two[:, 1] == NEWLINE_ID)
        elif stop == "newline":
            hit = arr == NEWLINE_ID
        else:
            hit = np.zeros(B, dtype=bool)
        newly = hit & ~done
        done_at[newly] = t + 1
        done |= newly
        caps_arr = np.asarray(caps)
        done_at = np.minimum(done_at, caps_arr)
        if t + 1 >= steps or (done | (caps_arr <= t + 1)).all():
            break
        step_in = next_ids.unsqueeze(1)
        total = plen + t + 1
        if cache is not None and total < block:
            with torch.no_grad():
                logits = model(step_in, cache)[:, -1]
        else:
            cache = None  # context now slides; recompute on the cropped window
            ctx = np.concatenate([np.stack(prompts)[:, max(0, total - block):], generated[:, :t + 1]], axis=1)
            ctx = ctx[:, -block:]
            with torch.no_grad():
                logits = model(torch.from_numpy(ctx))[:, -1]
    return [generated[b, :done_at[b]] for b in range(B)]


def generate(
    model: TinyGPT,
    prompt_ids,
    max_new: int,
    mode: str = "greedy",
    temperature: float = 1.0,
    seed: int = 0,
    stop: str = "terminator",
) -> np.ndarray:
    """Single-sequence convenience wrapper around :func:`generate_batch`;
    prompts longer than the block are cropped to their last `block_size` ids."""
    prompt = np.asarray(prompt_ids, dtype=np.int64)
    if prompt.size == 0:
        raise ValueError("prompt must be non-empty")
    return generate_batch(model, [prompt], max_new, mode, temperature, seed, stop)[0]


# ---------------------------------------------------------------------------
# Checkpoints
# ---------------------------------------------------------------------------

def _tensor_bytes(t: torch.Tensor) -> bytes:
    return t.detach().to(torch.float32).contiguous().numpy().astype("<f4").tobytes()


def save_checkpoint(path, model: TinyGPT, optimizer: AdamW = None, rng_state: bytes = None, meta: dict = None):
    """Lossless binary checkpoint: header JSON, float32 parameter tensors in
    registration order, optimizer moments, sampler RNG state, CRC-32."""
    names = [name for name, _ in model.named_parameters()]
    header = {
        "config": asdict(model.config),
        "param_names": names,
        "alphabet_crc": alphabet_crc(),
        "has_optimizer": optimizer is not None,
        "has_rng": rng_state is not None,
        "meta": meta or {},
    }
    if optimizer is not None:
        header["optimizer"] = {
            "betas": list(optimizer.betas),
            "eps": optimizer.eps,
            "weight_decay": optimizer.weight_decay,
            "step_count": optimizer.step_count,
        }
    blob = bytearray()
    blob += CHECKPOINT_MAGIC
    blob += struct.pack("<I", CHECKPOINT_VERSION)
    head = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("ascii")
    blob += struct.pack("<I", len(head)) + head
    params = dict(model.named_parameters())
    for name in names:
        blob += _tensor_bytes(params[name])
    if optimizer is not None:
        for buf in (*optimizer.m, *optimizer.v):
            blob += _tensor_bytes(buf)
    if rng_state is not None:
        blob += struct.pack("<I", len(rng_state)) + rng_state
    blob += struct.pack("<I", zlib.crc32(bytes(blob)))
    Path(path).write_bytes(bytes(blob))


@dataclass
class Checkpoint:
    model: TinyGPT
    optimizer: AdamW = None
    rng_state: bytes = None
    meta: dict = field(default_factory=dict)


def load_checkpoint(path) -> Checkpoint:
    blob = Path(path).read_bytes()
    if len(blob) < 12 or blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointCorruptError(f"{path}: not a TPCL checkpoint")
    if zlib.crc32(blob[:-4]) != struct.unpack("<I", blob[-4:])[0]:
        raise CheckpointCorruptError(f"{path}: CRC mismatch (truncated or corrupt)")
    version = struct.unpack("<I", blob[4:8])[0]
    if version != CHECKPOINT_VERSION:
        raise CheckpointVersionError(f"{path}: format version {version}, expected {CHECKPOINT_VERSION}")
    hlen = struct.unpack("<I", blob[8:12])[0]
    header = json.loads(blob[12:12 + hlen].decode("ascii"))
    if header["alphabet_crc"] != alphabet_crc():
        raise CheckpointCorruptError(f"{path}: alphabet checksum mismatch")
    pos = 12 + hlen
    cfg = ModelConfig(**header["config"])
    model = TinyGPT(cfg)

    def read_into(t: torch.Tensor):
        nonlocal pos
        n = t.numel() * 4
        if pos + n > len(blob) - 4:
            raise CheckpointCorruptError(f"{path}: unexpected end of tensor data")
        arr = np.frombuffer(blob[pos:pos + n], dtype="<f4").reshape(tuple(t.shape))
        with torch.no_grad():
            t.copy_(torch.from_numpy(arr.copy()))
        pos += n

    params = dict(model.named_parameters())
    if header["param_names"] != list(params):
        raise CheckpointCorruptError(f"{path}: parameter inventory mismatch")
    for name in header["param_names"]:
        read_into(params[name])

    optimizer = None
    if header["has_optimizer"]:
        opt_info = header["optimizer"]
        optimizer = AdamW(
            model.param_groups(),
            betas=tuple(opt_info["betas"]),
            eps=opt_info["eps"],
            weight_decay=opt_info["weight_decay"],
        )
        optimizer.step_count = opt_info["step_count"]
        for buf in (*optimizer.m, *optimizer.v):
            read_into(buf)

    rng_state = None
    if header["has_rng"]:
        n = struct.unpack("<I", blob[pos:pos + 4])[0]
        pos += 4
        rng_state = blob[pos:pos + n]
        pos += n
    if pos != len(blob) - 4:
        raise CheckpointCorruptError(f"{path}: trailing bytes")
    return Checkpoint(model=model, optimizer=optimizer, rng_state=rng_state, meta=header["meta"])


def generator_state_bytes(generator: torch.Generator) -> bytes:
    return generator.get_state().numpy().tobytes()


def generator_from_bytes(state: bytes) -> torch.Generator:
    g = torch.Generator()
    g.set_state(torch.from_numpy(np.frombuffer(state, dtype=np.uint8).copy()))
    return g

"""
The SSPlanner micro model.

One small causal transformer plays both the context encoder ``f`` and the
surface decoder ``g``. On top of it sit the self-supervision heads: sentence
position embeddings, the plan predictor, the next-sentence classifier and the
copy-guided (pointer-generator style) content guidance.
"""

import logging
import math
from dataclasses import asdict, dataclass
from typing import Any, Dict, List, Optional, Tuple

import torch
import torch.nn as nn

from ..corpus import SPECIAL_TOKENS
from .losses import mix_distributions

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PlannerConfig:
    """Shapes and switches of one SSPlanner instance"""
    vocab_size: int
    d_model: int = 64
    d_pos: int = 16
    n_layers: int = 2
    n_heads: int = 2
    max_seq: int = 128
    max_para_len: int = 16
    p: int = 9
    init_range: float = 0.05
    use_sentence_positions: bool = True

    def __post_init__(self):
        if min(self.vocab_size, self.d_model, self.d_pos, self.n_heads, self.p) < 1:
            raise ValueError(f"all model dimensions must be positive: {self}")
        if self.n_layers < 1:
            raise ValueError(f"n_layers must be >= 1, got {self.n_layers}")
        if self.d_model % self.n_heads:
            raise ValueError(f"d_model={self.d_model} is not divisible by n_heads={self.n_heads}")

    @property
    def d_context(self) -> int:
        return self.d_model + self.d_pos

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    @classmethod
    def from_dict(cls, payload: Dict[str, Any]) -> "PlannerConfig":
        return cls(**payload)

    @classmethod
    def from_train_config(cls, config, vocab_size: int) -> "PlannerConfig":
        return cls(
            vocab_size=vocab_size,
            d_model=config.d_model,
            d_pos=config.d_pos,
            n_layers=config.n_layers,
            n_heads=config.n_heads,
            max_seq=config.max_seq,
            max_para_len=config.max_para_len,
            p=config.keywords_per_instance,
            init_range=config.init_range,
            use_sentence_positions=config.use_sentence_positions,
        )


class CausalSelfAttention(nn.Module):
    """Multi-head causal self-attention that also returns its attention maps"""

    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.n_heads = n_heads
        self.head_dim = d_model // n_heads
        self.qkv = nn.Linear(d_model, 3 * d_model)
        self.out = nn.Linear(d_model, d_model)

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        batch, length, d_model = x.shape
        q, k, v = self.qkv(x).split(d_model, dim=-1)
        shape = (batch, length, self.n_heads, self.head_dim)
        q, k, v = (tensor.view(shape).transpose(1, 2) for tensor in (q, k, v))

        scores = q @ k.transpose(-2, -1) / math.sqrt(self.head_dim)
        causal = torch.ones(length, length, dtype=torch.bool, device=x.device).tril()
        scores = scores.masked_fill(~causal, float("-inf"))
        weights = torch.softmax(scores, dim=-1)

        mixed = (weights @ v).transpose(1, 2).reshape(batch, length, d_model)
        return self.out(mixed), weights


class TransformerBlock(nn.Module):
    """Pre-norm transformer block with a GELU feed-forward layer"""

    def __init__(self, d_model: int, n_heads: int):
        super().__init__()
        self.attn_norm = nn.LayerNorm(d_model)
        self.attn = CausalSelfAttention(d_model, n_heads)
        self.ff_norm = nn.LayerNorm(d_model)
        self.ff = nn.Sequential(
            nn.Linear(d_model, 4 * d_model),
            nn.GELU(),
            nn.Linear(4 * d_model, d_model),
        )

    def forward(self, x: torch.Tensor) -> Tuple[torch.Tensor, torch.Tensor]:
        attended, weights = self.attn(self.attn_norm(x))
        x = x + attended
        x = x + self.ff(self.ff_norm(x))
        return x, weights


@dataclass
class EncoderOutputs:
    """Context-side quantities shared by all heads"""
    sentence_vectors: torch.Tensor   # (N, d + d_pos), every encoded sentence
    context_vector: torch.Tensor     # (B, d + d_pos), h_c
    joint_vector: torch.Tensor       # (B, d + d_pos), context plus candidate target
    plan_probs: torch.Tensor         # (B, |V|)
    nsp_prob: torch.Tensor           # (B,)


@dataclass
class PlannerOutputs:
    """Full forward pass over a teacher-forced batch"""
    encoder: EncoderOutputs
    keyword_probs: torch.Tensor      # (B, p), k-hat
    mixed_probs: torch.Tensor        # (M, |V|) P(y) at every labelled step
    lm_probs: torch.Tensor           # (M, |V|)
    gate: torch.Tensor               # (M,)
    alpha: torch.Tensor              # (M, p)
    labels: torch.Tensor             # (M,)
    label_owner: torch.Tensor        # (M,) batch row of each step
    attentions: Optional[List[torch.Tensor]] = None


class SSPlanner(nn.Module):
    """Self-supervised text planner over a micro causal transformer"""

    def __init__(self, config: PlannerConfig):
        super().__init__()
        self.config = config
        d, d_pos, d_ctx = config.d_model, config.d_pos, config.d_context

        self.token_embeddings = nn.Embedding(config.vocab_size, d)
        self.word_position_embeddings = nn.Embedding(config.max_seq, d)
        self.sentence_position_embeddings = nn.Embedding(config.max_para_len, d_pos)
        self.blocks = nn.ModuleList([TransformerBlock(d, config.n_heads) for _ in range(config.n_layers)])
        self.final_norm = nn.LayerNorm(d)
        self.lm_head = nn.Linear(d, config.vocab_size)

        self.context_bridge = nn.Linear(d_ctx, d)
        self.plan_head = nn.Linear(d_ctx, d, bias=False)                       # W^cv
        self.nsp_head = nn.Linear(d_ctx, 1)                                    # W^c
        self.copy_gate_head = nn.Linear(d_ctx + config.p + d_pos + d, 1)       # W^ck
        self.keyword_attention = nn.Linear(d + d_pos, d, bias=False)           # W^kj

        # set by the trainer or checkpoint loader
        self.vocab_fingerprint: Optional[str] = None

    def reset_parameters(self, generator: torch.Generator) -> None:
        """Uniform(-r, r) initialisation from a seeded generator; layer norms start at identity."""
        r = self.config.init_range
        with torch.no_grad():
            for name, param in self.named_parameters():
                if "norm" in name:
                    param.fill_(1.0 if name.endswith("weight") else 0.0)
                else:
                    param.uniform_(-r, r, generator=generator)

    # ------------------------------------------------------------------
    # shared transformer
    # ------------------------------------------------------------------
    def run_transformer(self, embeds: torch.Tensor, return_attention: bool = False):
        """Add word positions and run every block; returns hidden states (and maps)."""
        length = embeds.shape[1]
        if length > self.config.max_seq:
            raise ValueError(f"sequence of length {length} exceeds max_seq={self.config.max_seq}")
        positions = torch.arange(length, device=embeds.device)
        x = embeds + self.word_position_embeddings(positions)
        attentions = []
        for block in self.blocks:
            x, weights = block(x)
            if return_attention:
                attentions.append(weights)
        x = self.final_norm(x)
        return (x, attentions) if return_attention else x

    def sentence_positions(self, positions: torch.Tensor) -> torch.Tensor:
        """pos^c / pos^t lookup; a constant zero row when the module is ablated."""
        if positions.numel() and int(positions.max()) >= self.config.max_para_len:
            raise ValueError(
                f"sentence position {int(positions.max())} outside embedding range {self.config.max_para_len}"
            )
        if not self.config.use_sentence_positions:
            weight = self.sentence_position_embeddings.weight
            return torch.zeros(*positions.shape, self.config.d_pos, dtype=weight.dtype, device=weight.device)
        return self.sentence_position_embeddings(positions)

    # ------------------------------------------------------------------
    # context encoding and heads
    # ------------------------------------------------------------------
    def encode_sentences(self, sentence_ids: torch.Tensor, sentence_lengths: torch.Tensor) -> torch.Tensor:
        """h_i: mean of the word states of every (right-padded) sentence."""
        hidden = self.run_transformer(self.token_embeddings(sentence_ids))
        mask = (torch.arange(sentence_ids.shape[1], device=sentence_ids.device)[None, :] < sentence_lengths[:, None])
        mask = mask.to(hidden.dtype).unsqueeze(-1)
        return (hidden * mask).sum(dim=1) / mask.sum(dim=1).clamp_min(1.0)

    @staticmethod
    def pool(vectors: torch.Tensor, owner: torch.Tensor, n_owners: int, keep: torch.Tensor) -> torch.Tensor:
        """Average the kept rows of ``vectors`` per owning instance."""
        weights = keep.to(vectors.dtype)
        sums = torch.zeros(n_owners, vectors.shape[1], dtype=vectors.dtype, device=vectors.device)
        sums = sums.index_add(0, owner, vectors * weights[:, None])
        counts = torch.zeros(n_owners, dtype=vectors.dtype, device=vectors.device).index_add(0, owner, weights)
        return sums / counts.clamp_min(1.0)[:, None]

    def predict_plan_probs(self, context_vector: torch.Tensor) -> torch.Tensor:
        """softmax(h_c W^cv E^T) over the whole vocabulary."""
        return torch.softmax(self.plan_logits(context_vector), dim=-1)

    def plan_logits(self, context_vector: torch.Tensor) -> torch.Tensor:
        return self.plan_head(context_vector) @ self.token_embeddings.weight.t()

    def nsp_prob(self, vector: torch.Tensor) -> torch.Tensor:
        """Probability that the candidate target really continues the context."""
        return torch.sigmoid(self.nsp_head(vector).squeeze(-1))

    def encode(self, batch) -> EncoderOutputs:
        """Encode every sentence of the batch and run the plan and NSP heads."""
        h = self.encode_sentences(batch.sentence_ids, batch.sentence_lengths)
        vectors = torch.cat([h, self.sentence_positions(batch.sentence_positions)], dim=-1)
        n = batch.size
        context_vector = self.pool(vectors, batch.sentence_owner, n, ~batch.sentence_is_target)
        joint_vector = self.pool(vectors, batch.sentence_owner, n, torch.ones_like(batch.sentence_is_target))
        return EncoderOutputs(
            sentence_vectors=vectors,
            context_vector=context_vector,
            joint_vector=joint_vector,
            plan_probs=self.predict_plan_probs(context_vector),
            nsp_prob=self.nsp_prob(joint_vector),
        )

    def copy_gate(
        self,
        context_vector: torch.Tensor,
        keyword_probs: torch.Tensor,
        target_positions: torch.Tensor,
        decoder_state: Optional[torch.Tensor] = None,
    ) -> torch.Tensor:
        """P_plan = sigmoid(W^ck [h_c; k-hat; pos^t_j; s]) for each row."""
        if decoder_state is None:
            decoder_state = context_vector.new_zeros(context_vector.shape[0], self.config.d_model)
        features = torch.cat(
            [context_vector, keyword_probs, self.sentence_positions(target_positions), decoder_state], dim=-1
        )
        return torch.sigmoid(self.copy_gate_head(features).squeeze(-1))

    def plan_attention(
        self,
        decoder_state: torch.Tensor,
        target_positions: torch.Tensor,
        keyword_probs: torch.Tensor,
        keyword_ids: torch.Tensor,
        keyword_mask: torch.Tensor,
    ) -> torch.Tensor:
        """alpha_k = softmax_k(k-hat_k * e_k . W^kj [s; pos^t_j]); zero rows when no keyword exists."""
        query = self.keyword_attention(torch.cat([decoder_state, self.sentence_positions(target_positions)], dim=-1))
        keyword_embeddings = self.token_embeddings(keyword_ids)
        scores = keyword_probs * (keyword_embeddings @ query.unsqueeze(-1)).squeeze(-1)
        scores = scores.masked_fill(~keyword_mask, float("-inf"))
        has_keyword = keyword_mask.any(dim=-1, keepdim=True)
        scores = torch.where(has_keyword, scores, torch.zeros_like(scores))
        alpha = torch.softmax(scores, dim=-1)
        return torch.where(has_keyword, alpha, torch.zeros_like(alpha))

    def keyword_probs(self, plan_probs: torch.Tensor, keyword_ids: torch.Tensor, keyword_mask: torch.Tensor) -> torch.Tensor:
        """k-hat: plan probabilities of the chosen keywords, zero padded to p."""
        return plan_probs.gather(1, keyword_ids) * keyword_mask.to(plan_probs.dtype)

    # ------------------------------------------------------------------
    # decoding
    # ------------------------------------------------------------------
    def decoder_hidden(self, context_vector: torch.Tensor, decoder_ids: torch.Tensor, return_attention: bool = False):
        """Run g over ``[CTX] context <sep> ... <bos> target ...``; slot 0 carries h_c."""
        bridge = self.context_bridge(context_vector).unsqueeze(1)
        embeds = torch.cat([bridge, self.token_embeddings(decoder_ids[:, 1:])], dim=1)
        return self.run_transformer(embeds, return_attention=return_attention)

    def mixed_step_probs(
        self,
        hidden: torch.Tensor,
        context_vector: torch.Tensor,
        keyword_probs: torch.Tensor,
        keyword_ids: torch.Tensor,
        keyword_mask: torch.Tensor,
        target_positions: torch.Tensor,
    ) -> Tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
        """LM distribution, copy gate, keyword attention and their mixture for rows of states."""
        lm_probs = torch.softmax(self.lm_head(hidden), dim=-1)
        gate = self.copy_gate(context_vector, keyword_probs, target_positions, hidden)
        gate = gate * keyword_mask.any(dim=-1).to(gate.dtype)
        alpha = self.plan_attention(hidden, target_positions, keyword_probs, keyword_ids, keyword_mask)
        mixed = mix_distributions(gate, alpha, keyword_ids, lm_probs)
        return mixed, lm_probs, gate, alpha

    def forward(self, batch, return_attention: bool = False) -> PlannerOutputs:
        """Teacher-forced pass producing every distribution the objective needs."""
        encoder = self.encode(batch)
        k_hat = self.keyword_probs(encoder.plan_probs, batch.keyword_ids, batch.keyword_mask)

        decoded = self.decoder_hidden(encoder.context_vector, batch.decoder_ids, return_attention)
        hidden, attentions = decoded if return_attention else (decoded, None)

        rows, cols = batch.label_mask.nonzero(as_tuple=True)
        step_hidden = hidden[rows, cols]
        mixed, lm_probs, gate, alpha = self.mixed_step_probs(
            step_hidden,
            encoder.context_vector[rows],
            k_hat[rows],
            batch.keyword_ids[rows],
            batch.keyword_mask[rows],
            batch.step_positions[rows, cols],
        )
        return PlannerOutputs(
            encoder=encoder,
            keyword_probs=k_hat,
            mixed_probs=mixed,
            lm_probs=lm_probs,
            gate=gate,
            alpha=alpha,
            labels=batch.labels[rows, cols],
            label_owner=rows,
            attentions=attentions,
        )

    def top_keywords(self, plan_probs: torch.Tensor, p: int) -> Tuple[torch.Tensor, torch.Tensor]:
        """The p most probable non-special tokens of each row (ids, probabilities)."""
        if p > self.config.vocab_size - len(SPECIAL_TOKENS):
            raise ValueError(f"p={p} exceeds the number of non-special vocabulary entries")
        scores = plan_probs.clone()
        scores[..., : len(SPECIAL_TOKENS)] = float("-inf")
        ids = scores.topk(p, dim=-1).indices
        return ids, plan_probs.gather(-1, ids)

    def parameter_summary(self) -> Dict[str, Any]:
        """Norms and finiteness per parameter, used in failure diagnostics."""
        summary = {}
        for name, param in self.named_parameters():
            summary[name] = {
                "norm": float(param.detach().norm()),
                "finite": bool(torch.isfinite(param).all()),
                "grad_finite": None if param.grad is None else bool(torch.isfinite(param.grad).all()),
            }
        return summary
